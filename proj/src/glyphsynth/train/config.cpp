#include "glyphsynth/train/config.hpp"

#include <fstream>
#include <set>

namespace glyphsynth {

using nlohmann::json;

SupervisionLevel supervision_from_string(const std::string& s) {
    if (s == "pixel") return SupervisionLevel::Pixel;
    if (s == "character") return SupervisionLevel::Character;
    if (s == "component") return SupervisionLevel::Component;
    fail("config: unknown supervision level '%s' (pixel|character|component)", s.c_str());
}

std::string to_string(SupervisionLevel s) {
    switch (s) {
        case SupervisionLevel::Pixel: return "pixel";
        case SupervisionLevel::Character: return "character";
        case SupervisionLevel::Component: return "component";
    }
    return "component";
}

CamAblation cam_ablation_from_string(const std::string& s) {
    if (s == "baseline") return CamAblation::Baseline;
    if (s == "strc") return CamAblation::Strc;
    if (s == "strc_sty") return CamAblation::StrcSty;
    if (s == "full") return CamAblation::Full;
    fail("config: unknown cam_losses '%s' (baseline|strc|strc_sty|full)", s.c_str());
}

std::string to_string(CamAblation a) {
    switch (a) {
        case CamAblation::Baseline: return "baseline";
        case CamAblation::Strc: return "strc";
        case CamAblation::StrcSty: return "strc_sty";
        case CamAblation::Full: return "full";
    }
    return "full";
}

void TrainConfig::validate() const {
    check(lr > 0.0, "config: lr must be positive");
    check(batch >= 1, "config: batch must be >= 1");
    check(init_std > 0.0, "config: init_std must be positive");
    check(epochs_total >= 1 && epochs_constant >= 0 && epochs_constant <= epochs_total,
          "config: epoch schedule must satisfy 0 <= epochs_constant <= epochs_total");
    check(img_size >= 32 && img_size % 32 == 0,
          "config: img_size must be a positive multiple of 32");
    check(t_max >= 1, "config: t_max must be >= 1");
    check(lambda_dec >= 0 && lambda_cnt >= 0 && lambda_pix >= 0,
          "config: loss weights must be non-negative");
    check(g_loss_form == "nonsaturating" || g_loss_form == "saturating",
          "config: g_loss_form must be nonsaturating|saturating");
    check(n_val_styles >= 0 && n_val_chars >= 0, "config: negative validation split");
    check(p_idt <= 1.0, "config: p_idt must be <= 1");
}

json TrainConfig::to_json() const {
    json j;
    j["corpus_dir"] = corpus_dir;
    j["n_val_styles"] = n_val_styles;
    j["n_val_chars"] = n_val_chars;
    j["content_style"] = content_style;
    j["p_idt"] = p_idt;
    j["lr"] = lr;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["batch"] = batch;
    j["init_std"] = init_std;
    j["epochs_total"] = epochs_total;
    j["epochs_constant"] = epochs_constant;
    j["steps_per_epoch"] = steps_per_epoch;
    j["max_steps"] = max_steps;
    j["seed"] = seed;
    j["grad_clip"] = grad_clip;
    j["img_size"] = img_size;
    j["gen_ch"] = gen_ch;
    j["d_s"] = d_s;
    j["gen_blocks"] = gen_blocks;
    j["cam_channels"] = cam_channels;
    j["cam_hidden"] = cam_hidden;
    j["cam_embed"] = cam_embed;
    j["cls_channels"] = cls_channels;
    j["comp_channels"] = comp_channels;
    j["disc_ch"] = disc_ch;
    j["t_max"] = t_max;
    j["lambda_dec"] = lambda_dec;
    j["lambda_cnt"] = lambda_cnt;
    j["lambda_pix"] = lambda_pix;
    j["supervision"] = to_string(supervision);
    j["cam_losses"] = to_string(cam_losses);
    j["use_style_latent"] = use_style_latent;
    j["use_dec_head"] = use_dec_head;
    j["g_loss_form"] = g_loss_form;
    j["cam_bn_train_on_fake"] = cam_bn_train_on_fake;
    j["out_dir"] = out_dir;
    j["log_every"] = log_every;
    j["checkpoint_every"] = checkpoint_every;
    return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
    static const std::set<std::string> known = {
        "corpus_dir", "n_val_styles", "n_val_chars", "content_style", "p_idt", "lr", "beta1",
        "beta2", "batch", "init_std", "epochs_total", "epochs_constant", "steps_per_epoch",
        "max_steps", "seed", "grad_clip", "img_size", "gen_ch", "d_s", "gen_blocks",
        "cam_channels", "cam_hidden", "cam_embed", "cls_channels", "comp_channels", "disc_ch",
        "t_max", "lambda_dec", "lambda_cnt", "lambda_pix", "supervision", "cam_losses",
        "use_style_latent", "use_dec_head", "g_loss_form", "cam_bn_train_on_fake", "out_dir",
        "log_every", "checkpoint_every"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) fail("config: unknown key '%s'", it.key().c_str());

    TrainConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("corpus_dir", c.corpus_dir);
    get("n_val_styles", c.n_val_styles);
    get("n_val_chars", c.n_val_chars);
    get("content_style", c.content_style);
    get("p_idt", c.p_idt);
    get("lr", c.lr);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("batch", c.batch);
    get("init_std", c.init_std);
    get("epochs_total", c.epochs_total);
    get("epochs_constant", c.epochs_constant);
    get("steps_per_epoch", c.steps_per_epoch);
    get("max_steps", c.max_steps);
    get("seed", c.seed);
    get("grad_clip", c.grad_clip);
    get("img_size", c.img_size);
    get("gen_ch", c.gen_ch);
    get("d_s", c.d_s);
    get("gen_blocks", c.gen_blocks);
    get("cam_channels", c.cam_channels);
    get("cam_hidden", c.cam_hidden);
    get("cam_embed", c.cam_embed);
    get("cls_channels", c.cls_channels);
    get("comp_channels", c.comp_channels);
    get("disc_ch", c.disc_ch);
    get("t_max", c.t_max);
    get("lambda_dec", c.lambda_dec);
    get("lambda_cnt", c.lambda_cnt);
    get("lambda_pix", c.lambda_pix);
    if (j.contains("supervision"))
        c.supervision = supervision_from_string(j.at("supervision").get<std::string>());
    if (j.contains("cam_losses"))
        c.cam_losses = cam_ablation_from_string(j.at("cam_losses").get<std::string>());
    get("use_style_latent", c.use_style_latent);
    get("use_dec_head", c.use_dec_head);
    get("g_loss_form", c.g_loss_form);
    get("cam_bn_train_on_fake", c.cam_bn_train_on_fake);
    get("out_dir", c.out_dir);
    get("log_every", c.log_every);
    get("checkpoint_every", c.checkpoint_every);
    c.validate();
    return c;
}

TrainConfig TrainConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("config: cannot open %s", path.c_str());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        fail("config: %s is not valid JSON: %s", path.c_str(), e.what());
    }
    return from_json(j);
}

GeneratorConfig make_generator_config(const TrainConfig& cfg) {
    GeneratorConfig g;
    g.img_size = cfg.img_size;
    g.ch = cfg.gen_ch;
    g.n_blocks = cfg.gen_blocks;
    g.d_s = cfg.d_s;
    g.use_style_latent = cfg.use_style_latent;
    return g;
}

CamConfig make_cam_config(const TrainConfig& cfg, int n_styles, int vocab_size) {
    CamConfig c;
    c.img_size = cfg.img_size;
    c.channels = cfg.cam_channels;
    c.hidden = cfg.cam_hidden;
    c.embed = cfg.cam_embed;
    c.n_styles = n_styles;
    c.vocab_size = vocab_size;
    c.t_max = cfg.t_max;
    c.cls_channels = cfg.cls_channels;
    c.comp_channels = cfg.comp_channels;
    return c;
}

DiscConfig make_disc_config(const TrainConfig& cfg) {
    DiscConfig d;
    d.img_size = cfg.img_size;
    d.ch = cfg.disc_ch;
    d.use_dec_head = cfg.use_dec_head;
    return d;
}

double lr_for_epoch(int epoch, const TrainConfig& cfg) {
    check(epoch >= 0, "lr_for_epoch: negative epoch");
    if (epoch <= cfg.epochs_constant) return cfg.lr;
    if (epoch >= cfg.epochs_total) return 0.0;
    const double span = static_cast<double>(cfg.epochs_total - cfg.epochs_constant);
    return cfg.lr * static_cast<double>(cfg.epochs_total - epoch) / span;
}

}  // namespace glyphsynth
