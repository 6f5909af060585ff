#pragma once

#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace glyphsynth {

// All recoverable failures surface as Error; the CLI maps them to exit code 2.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

template <class... Args>
[[noreturn]] void fail(const char* fmt, Args... args) {
    char buf[1024];
    std::snprintf(buf, sizeof(buf), fmt, args...);
    throw Error(buf);
}

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

// Verbosity comes from the GLYPHSYNTH_LOG environment variable only
// (quiet|info|debug); default info.
inline LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("GLYPHSYNTH_LOG");
        if (!env) return LogLevel::Info;
        const std::string v(env);
        if (v == "quiet") return LogLevel::Quiet;
        if (v == "debug") return LogLevel::Debug;
        return LogLevel::Info;
    }();
    return level;
}

template <class... Args>
void log_info(const char* fmt, Args... args) {
    if (log_level() >= LogLevel::Info) {
        std::fprintf(stderr, fmt, args...);
        std::fputc('\n', stderr);
    }
}

template <class... Args>
void log_debug(const char* fmt, Args... args) {
    if (log_level() >= LogLevel::Debug) {
        std::fprintf(stderr, fmt, args...);
        std::fputc('\n', stderr);
    }
}

}  // namespace glyphsynth
