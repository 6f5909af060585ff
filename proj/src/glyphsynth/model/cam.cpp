#include "glyphsynth/model/cam.hpp"

#include <atomic>

namespace glyphsynth {

using namespace nn;

void CamConfig::validate() const {
    check(img_size % 16 == 0 && grid() >= 1, "CamConfig: img_size must be a multiple of 16");
    check(n_styles >= 1, "CamConfig: n_styles must be set");
    check(vocab_size >= 2, "CamConfig: vocab_size must include EOS");
    check(t_max >= 1, "CamConfig: t_max must be >= 1");
    check(hidden >= 1 && embed >= 1, "CamConfig: hidden/embed must be positive");
}

nlohmann::json CamConfig::to_json() const {
    nlohmann::json j;
    j["img_size"] = img_size;
    j["channels"] = channels;
    j["hidden"] = hidden;
    j["embed"] = embed;
    j["n_styles"] = n_styles;
    j["vocab_size"] = vocab_size;
    j["t_max"] = t_max;
    j["cls_channels"] = cls_channels;
    j["comp_channels"] = comp_channels;
    return j;
}

CamConfig CamConfig::from_json(const nlohmann::json& j) {
    CamConfig c;
    c.img_size = j.at("img_size").get<int>();
    c.channels = j.at("channels").get<std::array<int, 5>>();
    c.hidden = j.at("hidden").get<int>();
    c.embed = j.at("embed").get<int>();
    c.n_styles = j.at("n_styles").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.t_max = j.at("t_max").get<int>();
    c.cls_channels = j.at("cls_channels").get<std::array<int, 3>>();
    c.comp_channels = j.at("comp_channels").get<std::array<int, 3>>();
    c.validate();
    return c;
}

namespace detail {

CamFeatureEncoder::CamFeatureEncoder(const CamConfig& cfg) {
    const int kernel[5] = {7, 3, 3, 3, 3};
    int64_t in_ch = 3;
    for (int i = 0; i < 5; ++i) {
        const int64_t out_ch = cfg.channels[static_cast<size_t>(i)];
        convs_.push_back(
            std::make_unique<Conv2d>(in_ch, out_ch, kernel[i], 1, kernel[i] / 2));
        norms_.push_back(std::make_unique<BatchNorm2d>(out_ch));
        acts_.push_back(std::make_unique<PReLU>(out_ch));
        const std::string idx = std::to_string(i + 1);
        reg_child("conv" + idx, convs_.back().get());
        reg_child("bn" + idx, norms_.back().get());
        reg_child("act" + idx, acts_.back().get());
        in_ch = out_ch;
    }
}

Var CamFeatureEncoder::forward(const Var& x) {
    Var h = x;
    for (int i = 0; i < 5; ++i) {
        h = acts_[static_cast<size_t>(i)]->forward(
            norms_[static_cast<size_t>(i)]->forward(convs_[static_cast<size_t>(i)]->forward(h)));
        if (i != 3) h = maxpool2(h);  // pools after layers 1, 2, 3, 5
    }
    return h;
}

StyleClassifierHead::StyleClassifierHead(const CamConfig& cfg)
    : c1_(cfg.channels[4], cfg.cls_channels[0], 3, 1, 1),
      c2_(cfg.cls_channels[0], cfg.cls_channels[1], 3, 1, 1),
      c3_(cfg.cls_channels[1], cfg.cls_channels[2], 3, 1, 1),
      c4_(cfg.cls_channels[2], cfg.n_styles, 3, 1, 1),
      n1_(cfg.cls_channels[0]), n2_(cfg.cls_channels[1]), n3_(cfg.cls_channels[2]),
      a1_(cfg.cls_channels[0]), a2_(cfg.cls_channels[1]), a3_(cfg.cls_channels[2]) {
    reg_child("c1", &c1_);
    reg_child("n1", &n1_);
    reg_child("a1", &a1_);
    reg_child("c2", &c2_);
    reg_child("n2", &n2_);
    reg_child("a2", &a2_);
    reg_child("c3", &c3_);
    reg_child("n3", &n3_);
    reg_child("a3", &a3_);
    reg_child("c4", &c4_);
}

Var StyleClassifierHead::forward(const Var& feat) {
    Var h = maxpool2(a1_.forward(n1_.forward(c1_.forward(feat))));
    h = a2_.forward(n2_.forward(c2_.forward(h)));
    h = maxpool2(a3_.forward(n3_.forward(c3_.forward(h))));
    h = c4_.forward(h);
    return global_avg_pool(h);  // [N, n_styles]
}

ComponentDiscriminatorHead::ComponentDiscriminatorHead(const CamConfig& cfg)
    : c1_(cfg.channels[4], cfg.comp_channels[0], 3, 1, 1),
      c2_(cfg.comp_channels[0], cfg.comp_channels[1], 3, 1, 1),
      c3_(cfg.comp_channels[1], cfg.comp_channels[2], 3, 1, 1),
      c4_(cfg.comp_channels[2], 1, 3, 1, 1),
      n1_(cfg.comp_channels[0]), n2_(cfg.comp_channels[1]), n3_(cfg.comp_channels[2]),
      a1_(cfg.comp_channels[0]), a2_(cfg.comp_channels[1]), a3_(cfg.comp_channels[2]) {
    reg_child("c1", &c1_);
    reg_child("n1", &n1_);
    reg_child("a1", &a1_);
    reg_child("c2", &c2_);
    reg_child("n2", &n2_);
    reg_child("a2", &a2_);
    reg_child("c3", &c3_);
    reg_child("n3", &n3_);
    reg_child("a3", &a3_);
    reg_child("c4", &c4_);
}

Var ComponentDiscriminatorHead::forward(const Var& feat) {
    Var h = maxpool2(a1_.forward(n1_.forward(c1_.forward(feat))));
    h = maxpool2(a2_.forward(n2_.forward(c2_.forward(h))));
    h = a3_.forward(n3_.forward(c3_.forward(h)));
    return c4_.forward(h);  // single-channel score map
}

}  // namespace detail

AttentionDecoder::AttentionDecoder(const CamConfig& cfg)
    : cfg_(cfg),
      embedding_(cfg.vocab_size + 1, cfg.embed),  // +1: GO row
      gru_(cfg.channels[4] + cfg.embed, cfg.hidden),
      out_(cfg.hidden, cfg.vocab_size) {
    reg_child("embedding", &embedding_);
    reg_child("gru", &gru_);
    w_s_ = &reg_param("w_s", ParamKind::LinearWeight, {cfg.hidden, cfg.grid_cells()});
    w_y_ = &reg_param("w_y", ParamKind::LinearWeight, {cfg.embed, cfg.grid_cells()});
    b_ = &reg_param("b", ParamKind::Bias, {cfg.grid_cells()});
    reg_child("out", &out_);
}

Var AttentionDecoder::initial_state(int batch) const {
    return Var::constant(Tensor::zeros({batch, cfg_.hidden}));
}

AttentionDecoder::Attend AttentionDecoder::attend(const Var& state, const Var& y_prev_emb,
                                                  const Var& feat) const {
    const int64_t B = state.val().size(0);
    Var energy = matmul(state, w_s_->var);                 // [B, L]
    energy = add(energy, matmul(y_prev_emb, w_y_->var));   // + y_prev W_y
    Var bias_rows = reshape(b_->var, {1, cfg_.grid_cells()});
    Var e;
    if (B == 1) {
        e = add(energy, bias_rows);
    } else {
        // bias broadcast over the batch via a ones column
        Tensor ones({B, 1});
        ones.fill(1.0);
        e = add(energy, matmul(Var::constant(ones), bias_rows));
    }
    Attend out;
    out.alpha = softmax_rows(tanh_op(e));
    out.glimpse = glimpse(feat, out.alpha);
    return out;
}

AttentionDecoder::StepOut AttentionDecoder::decode_step(const Var& state,
                                                        const std::vector<int>& y_prev_ids,
                                                        const Var& feat) const {
    check(static_cast<int64_t>(y_prev_ids.size()) == state.val().size(0),
          "decode_step: batch mismatch");
    Var y_emb = embedding_.forward(y_prev_ids);
    Attend att = attend(state, y_emb, feat);
    Var new_state = gru_.forward(concat_cols(att.glimpse, y_emb), state);
    StepOut out;
    out.logits = out_.forward(new_state);  // raw; softmax lives in the loss
    out.state = new_state;
    out.alpha = att.alpha;
    return out;
}

BatchRollout AttentionDecoder::decode_teacher_forced(
    const Var& feat, const std::vector<ComponentSequence>& targets) const {
    const int B = static_cast<int>(feat.val().size(0));
    check(static_cast<int>(targets.size()) == B, "decode_teacher_forced: target count mismatch");
    int max_t = 0;
    BatchRollout roll;
    for (const ComponentSequence& t : targets) {
        check(t.length() >= 1, "decode_teacher_forced: empty target");
        if (t.length() > cfg_.t_max)
            fail("decode_teacher_forced: target length %d exceeds T_max %d", t.length(),
                 cfg_.t_max);
        roll.lengths.push_back(t.length());
        max_t = std::max(max_t, t.length());
    }
    const int eos = cfg_.vocab_size - 1;
    Var state = initial_state(B);
    std::vector<int> prev(static_cast<size_t>(B), go_token());
    for (int t = 0; t < max_t + 1; ++t) {
        StepOut step = decode_step(state, prev, feat);
        roll.logits.push_back(step.logits);
        roll.alphas.push_back(step.alpha);
        state = step.state;
        for (int b = 0; b < B; ++b) {
            const ComponentSequence& tgt = targets[static_cast<size_t>(b)];
            prev[static_cast<size_t>(b)] =
                t < tgt.length() ? tgt.ids[static_cast<size_t>(t)] : eos;
        }
    }
    return roll;
}

BatchRollout AttentionDecoder::decode_greedy(const Var& feat) const {
    const int B = static_cast<int>(feat.val().size(0));
    const int eos = cfg_.vocab_size - 1;
    BatchRollout roll;
    roll.predictions.assign(static_cast<size_t>(B), {});
    std::vector<bool> done(static_cast<size_t>(B), false);
    Var state = initial_state(B);
    std::vector<int> prev(static_cast<size_t>(B), go_token());
    for (int t = 0; t < cfg_.t_max + 1; ++t) {
        StepOut step = decode_step(state, prev, feat);
        roll.logits.push_back(step.logits);
        roll.alphas.push_back(step.alpha);
        state = step.state;
        bool all_done = true;
        for (int b = 0; b < B; ++b) {
            const double* row = step.logits.val().data() + b * cfg_.vocab_size;
            int best = 0;
            for (int v = 1; v < cfg_.vocab_size; ++v)
                if (row[v] > row[best]) best = v;
            if (!done[static_cast<size_t>(b)]) {
                if (best == eos) {
                    done[static_cast<size_t>(b)] = true;
                } else {
                    roll.predictions[static_cast<size_t>(b)].push_back(best);
                }
            }
            prev[static_cast<size_t>(b)] = best;
            all_done = all_done && done[static_cast<size_t>(b)];
        }
        if (all_done) break;
    }
    for (int b = 0; b < B; ++b)
        roll.lengths.push_back(static_cast<int>(roll.predictions[static_cast<size_t>(b)].size()));
    return roll;
}

Var mask_features(const Var& feat, const Var& alpha) { return mul_mask_hw(feat, alpha); }

namespace {
std::atomic<int64_t> g_cam_forward_calls{0};
}

int64_t Cam::forward_calls() { return g_cam_forward_calls.load(); }
void Cam::reset_forward_calls() { g_cam_forward_calls.store(0); }

Cam::Cam(CamConfig cfg)
    : cfg_((cfg.validate(), cfg)), encoder_(cfg_), decoder_(cfg_), cls_(cfg_), comp_(cfg_) {
    reg_child("encoder", &encoder_);
    reg_child("decoder", &decoder_);
    reg_child("cls", &cls_);
    reg_child("comp", &comp_);
}

Var Cam::encode_features(const Var& images) {
    check(images.val().ndim() == 4 && images.val().size(1) == 3 &&
              images.val().size(2) == cfg_.img_size && images.val().size(3) == cfg_.img_size,
          "encode_features: expected [N,3," + std::to_string(cfg_.img_size) + "," +
              std::to_string(cfg_.img_size) + "], got " + nn::shape_str(images.shape()));
    g_cam_forward_calls.fetch_add(1);
    return encoder_.forward(images);
}

Var Cam::classify_style(const Var& feat) { return cls_.forward(feat); }

Var Cam::discriminate_component(const Var& feat) { return comp_.forward(feat); }

double sequence_accuracy(const std::vector<std::vector<int>>& predictions,
                         const std::vector<ComponentSequence>& targets) {
    check(predictions.size() == targets.size(), "sequence_accuracy: size mismatch");
    if (predictions.empty()) return 0.0;
    int correct = 0;
    for (size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == targets[i].ids) ++correct;
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

}  // namespace glyphsynth
