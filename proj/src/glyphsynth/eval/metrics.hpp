#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "glyphsynth/model/cam.hpp"
#include "glyphsynth/nn/tensor.hpp"

namespace glyphsynth {

// Structural similarity over [3,H,W] images in [-1,1]: 11x11 Gaussian window
// (sigma 1.5), K1=0.01, K2=0.03, dynamic range 2, valid-region windows,
// channel-averaged.
double ssim(const nn::Tensor& a, const nn::Tensor& b);

// Root mean squared error computed in the [0,1] pixel domain.
double rmse(const nn::Tensor& a, const nn::Tensor& b);

// Deterministic image -> feature-vector map for FID.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::vector<double> extract(const nn::Tensor& image) = 0;
    virtual int dim() const = 0;
    virtual std::string name() const = 0;
};

// Dependency-free backbone: grayscale average-pooled to an 8x8 grid.
class PoolExtractor : public FeatureExtractor {
public:
    explicit PoolExtractor(int grid = 8) : grid_(grid) {}
    std::vector<double> extract(const nn::Tensor& image) override;
    int dim() const override { return grid_ * grid_; }
    std::string name() const override { return "pool" + std::to_string(grid_) + "x" +
                                               std::to_string(grid_); }

private:
    int grid_;
};

// Pooled CAM features from a trained recognizer (eval mode).
class CamFeatureExtractor : public FeatureExtractor {
public:
    explicit CamFeatureExtractor(Cam& cam) : cam_(cam) {}
    std::vector<double> extract(const nn::Tensor& image) override;
    int dim() const override { return cam_.config().channels[4]; }
    std::string name() const override { return "cam-gap-" + std::to_string(dim()) + "d"; }

private:
    Cam& cam_;
};

// Frechet distance between Gaussian fits of the two feature sets, covariances
// regularized with eps*I.
double fid(const std::vector<std::vector<double>>& real_features,
           const std::vector<std::vector<double>>& fake_features, double eps = 1e-6);

struct MetricReport {
    int count = 0;
    double ssim_mean = 0.0;
    double rmse_mean = 0.0;
    std::optional<double> fid_value;
    std::string fid_backbone;

    // key=value lines (machine-readable); `save` writes them to a file.
    std::vector<std::string> key_values() const;
    void save(const std::string& path) const;
};

}  // namespace glyphsynth
