#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace glyphsynth {

// xoshiro256** with splitmix64 seeding. Self-contained so that seeded runs
// are bit-identical across compilers and standard libraries.
class Rng {
public:
    Rng() : Rng(0x9e3779b97f4a7c15ULL) {}

    explicit Rng(uint64_t seed) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t x = seed;
        for (auto& word : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            word = z ^ (z >> 31);
        }
        has_gauss_ = false;
        gauss_spare_ = 0.0;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0,1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) {
        // Lemire rejection-free-ish: rejection loop keeps it exactly uniform.
        const uint64_t threshold = (0 - n) % n;
        for (;;) {
            const uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    int index(int n) { return static_cast<int>(below(static_cast<uint64_t>(n))); }

    // Box-Muller with a cached spare.
    double gauss(double mean = 0.0, double std = 1.0) {
        if (has_gauss_) {
            has_gauss_ = false;
            return mean + std * gauss_spare_;
        }
        double u1 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        gauss_spare_ = r * std::sin(theta);
        has_gauss_ = true;
        return mean + std * r * std::cos(theta);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Serializable state for checkpoint resume.
    std::string save_state() const {
        std::string s;
        for (int i = 0; i < 4; ++i) {
            s += std::to_string(state_[i]);
            if (i < 3) s += ' ';
        }
        s += has_gauss_ ? " 1 " : " 0 ";
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", gauss_spare_);
        s += buf;
        return s;
    }

    void load_state(const std::string& s) {
        uint64_t w[4];
        int hg = 0;
        double spare = 0.0;
        if (std::sscanf(s.c_str(), "%lu %lu %lu %lu %d %lg", &w[0], &w[1], &w[2], &w[3], &hg,
                        &spare) != 6) {
            throw std::invalid_argument("Rng::load_state: malformed state string");
        }
        for (int i = 0; i < 4; ++i) state_[i] = w[i];
        has_gauss_ = hg != 0;
        gauss_spare_ = spare;
    }

    // Derives an independent stream (e.g. per style id) from this generator's seed space.
    static Rng derive(uint64_t seed, uint64_t stream) {
        return Rng(seed * 0x9e3779b97f4a7c15ULL + stream * 0xd1342543de82ef95ULL + 1);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t state_[4] = {};
    bool has_gauss_ = false;
    double gauss_spare_ = 0.0;
};

}  // namespace glyphsynth
