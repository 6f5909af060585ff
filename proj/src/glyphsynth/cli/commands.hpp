#pragma once

#include <optional>
#include <string>
#include <vector>

#include "glyphsynth/common.hpp"

namespace glyphsynth::cli {

// Command implementations live in the library so tests can drive them
// directly; tools/main.cpp only parses flags. All commands throw Error on
// runtime failure (the binary maps that to exit code 2).

struct MakeCorpusArgs {
    std::string out_dir;
    int n_styles = 10;
    int n_primitives = 10;
    int n_chars = 100;
    int img_size = 32;
    uint64_t seed = 1;
    bool force = false;
    // real-font mode (used when fonts is non-empty)
    std::vector<std::string> fonts;
    std::string chars_file;
    std::string decomposition_tsv;
    std::string vocab_file;
};
void cmd_make_corpus(const MakeCorpusArgs& args);

struct TrainArgs {
    std::string config_path;  // optional; defaults apply when empty
    std::string resume_checkpoint;
    // flag overrides (applied over the config file)
    std::optional<std::string> corpus_dir, out_dir, supervision, cam_losses, g_loss_form;
    std::optional<int> max_steps, batch, img_size, epochs_total, epochs_constant;
    std::optional<uint64_t> seed;
    std::optional<double> lr;
    std::optional<int> n_val_styles, n_val_chars;
};
void cmd_train(const TrainArgs& args);

struct GenerateArgs {
    std::string checkpoint;
    std::string corpus_dir;             // needed for --content-chars / --style-ref
    std::string style_image;            // PNG path, or
    std::string style_ref;              // "style_id,char_id" into the corpus
    std::vector<std::string> content_chars;   // character symbols from the corpus table
    std::vector<std::string> content_images;  // or explicit PNG paths
    std::string out_dir;
};
void cmd_generate(const GenerateArgs& args);

struct EvaluateArgs {
    std::string checkpoint;
    std::string corpus_dir;
    std::string split = "unseen-style";  // seen-style | unseen-style
    std::string recognizer_checkpoint;   // optional: component/style accuracy + CAM FID
    std::string report_path;
    std::string grid_path;  // optional qualitative grid
    int ref_char = 0;
    std::string fid_backbone = "pool";  // pool | cam | none
};
void cmd_evaluate(const EvaluateArgs& args);

struct VizAttnArgs {
    std::string checkpoint;  // recognizer checkpoint or trainer checkpoint with a CAM
    std::string corpus_dir;
    int style_id = 0;
    std::vector<std::string> chars;   // corpus character symbols
    std::vector<std::string> images;  // or explicit PNG paths
    std::string out_dir;
};
void cmd_viz_attn(const VizAttnArgs& args);

}  // namespace glyphsynth::cli
