#include "glyphsynth/eval/metrics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>

namespace glyphsynth {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01, kK2 = 0.03, kRange = 2.0;

const std::array<double, kWin>& gaussian_taps() {
    static const std::array<double, kWin> taps = [] {
        std::array<double, kWin> t{};
        double sum = 0.0;
        for (int i = 0; i < kWin; ++i) {
            const double x = i - (kWin - 1) / 2.0;
            t[static_cast<size_t>(i)] = std::exp(-x * x / (2.0 * kSigma * kSigma));
            sum += t[static_cast<size_t>(i)];
        }
        for (double& v : t) v /= sum;
        return t;
    }();
    return taps;
}

// Separable valid-region Gaussian filter; out is (H-10) x (W-10).
void gauss_valid(const double* img, int H, int W, std::vector<double>& tmp,
                 std::vector<double>& out) {
    const auto& g = gaussian_taps();
    const int OW = W - kWin + 1;
    const int OH = H - kWin + 1;
    tmp.assign(static_cast<size_t>(H) * OW, 0.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < OW; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWin; ++k) s += g[static_cast<size_t>(k)] * img[y * W + x + k];
            tmp[static_cast<size_t>(y) * OW + x] = s;
        }
    out.assign(static_cast<size_t>(OH) * OW, 0.0);
    for (int y = 0; y < OH; ++y)
        for (int x = 0; x < OW; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWin; ++k)
                s += g[static_cast<size_t>(k)] * tmp[static_cast<size_t>(y + k) * OW + x];
            out[static_cast<size_t>(y) * OW + x] = s;
        }
}

}  // namespace

double ssim(const nn::Tensor& a, const nn::Tensor& b) {
    check(a.ndim() == 3 && a.size(0) == 3, "ssim: expected [3,H,W]");
    check(a.shape() == b.shape(), "ssim: shape mismatch");
    const int H = static_cast<int>(a.size(1)), W = static_cast<int>(a.size(2));
    check(H >= kWin && W >= kWin, "ssim: image smaller than the 11x11 window");
    const double c1 = (kK1 * kRange) * (kK1 * kRange);
    const double c2 = (kK2 * kRange) * (kK2 * kRange);

    // Evaluated on the shifted [0,2] domain (luminance means must be
    // non-negative for the sign conventions to behave; variances are
    // shift-invariant). Dynamic range stays 2.
    std::vector<double> xs(static_cast<size_t>(H) * W), ys(xs.size());
    std::vector<double> xy(xs.size()), xx(xs.size()), yy(xs.size());
    std::vector<double> tmp, mu_x, mu_y, m_xx, m_yy, m_xy;
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double* xraw = a.data() + static_cast<int64_t>(c) * H * W;
        const double* yraw = b.data() + static_cast<int64_t>(c) * H * W;
        for (int i = 0; i < H * W; ++i) {
            xs[static_cast<size_t>(i)] = xraw[i] + 1.0;
            ys[static_cast<size_t>(i)] = yraw[i] + 1.0;
        }
        const double* x = xs.data();
        const double* y = ys.data();
        for (int i = 0; i < H * W; ++i) {
            xx[static_cast<size_t>(i)] = x[i] * x[i];
            yy[static_cast<size_t>(i)] = y[i] * y[i];
            xy[static_cast<size_t>(i)] = x[i] * y[i];
        }
        gauss_valid(x, H, W, tmp, mu_x);
        gauss_valid(y, H, W, tmp, mu_y);
        gauss_valid(xx.data(), H, W, tmp, m_xx);
        gauss_valid(yy.data(), H, W, tmp, m_yy);
        gauss_valid(xy.data(), H, W, tmp, m_xy);
        double acc = 0.0;
        for (size_t i = 0; i < mu_x.size(); ++i) {
            const double sx = m_xx[i] - mu_x[i] * mu_x[i];
            const double sy = m_yy[i] - mu_y[i] * mu_y[i];
            const double sxy = m_xy[i] - mu_x[i] * mu_y[i];
            acc += ((2.0 * mu_x[i] * mu_y[i] + c1) * (2.0 * sxy + c2)) /
                   ((mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1) * (sx + sy + c2));
        }
        total += acc / static_cast<double>(mu_x.size());
    }
    return total / 3.0;
}

double rmse(const nn::Tensor& a, const nn::Tensor& b) {
    check(a.shape() == b.shape(), "rmse: shape mismatch");
    check(a.numel() > 0, "rmse: empty input");
    double acc = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        const double d = (a[i] - b[i]) * 0.5;  // [-1,1] -> [0,1] halves the difference
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(a.numel()));
}

std::vector<double> PoolExtractor::extract(const nn::Tensor& image) {
    check(image.ndim() == 3 && image.size(0) == 3, "PoolExtractor: expected [3,H,W]");
    const int H = static_cast<int>(image.size(1)), W = static_cast<int>(image.size(2));
    std::vector<double> out(static_cast<size_t>(grid_) * grid_, 0.0);
    std::vector<int> counts(out.size(), 0);
    const int64_t hw = static_cast<int64_t>(H) * W;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const int gy = y * grid_ / H, gx = x * grid_ / W;
            const double gray =
                (image[0 * hw + y * W + x] + image[1 * hw + y * W + x] + image[2 * hw + y * W + x]) /
                3.0;
            out[static_cast<size_t>(gy) * grid_ + gx] += gray;
            ++counts[static_cast<size_t>(gy) * grid_ + gx];
        }
    for (size_t i = 0; i < out.size(); ++i) out[i] /= std::max(1, counts[i]);
    return out;
}

std::vector<double> CamFeatureExtractor::extract(const nn::Tensor& image) {
    const bool was_training = cam_.training();
    cam_.set_training(false);
    nn::NoGradGuard ng;
    nn::Tensor batch({1, image.size(0), image.size(1), image.size(2)});
    std::copy(image.begin(), image.end(), batch.begin());
    nn::Var feat = cam_.encode_features(nn::Var::constant(batch));
    nn::Var pooled = nn::global_avg_pool(feat);
    cam_.set_training(was_training);
    return std::vector<double>(pooled.val().begin(), pooled.val().end());
}

double fid(const std::vector<std::vector<double>>& real_features,
           const std::vector<std::vector<double>>& fake_features, double eps) {
    check(real_features.size() >= 2 && fake_features.size() >= 2,
          "fid: need at least two samples per side");
    const int d = static_cast<int>(real_features[0].size());
    check(d >= 1 && static_cast<int>(fake_features[0].size()) == d,
          "fid: feature dimension mismatch");

    using Mat = Eigen::MatrixXd;
    using Vec = Eigen::VectorXd;
    auto moments = [d](const std::vector<std::vector<double>>& feats, Vec& mu, Mat& sigma) {
        const int n = static_cast<int>(feats.size());
        mu = Vec::Zero(d);
        for (const auto& f : feats) {
            check(static_cast<int>(f.size()) == d, "fid: ragged feature set");
            for (int i = 0; i < d; ++i) mu[i] += f[static_cast<size_t>(i)];
        }
        mu /= n;
        sigma = Mat::Zero(d, d);
        for (const auto& f : feats) {
            Vec v(d);
            for (int i = 0; i < d; ++i) v[i] = f[static_cast<size_t>(i)] - mu[i];
            sigma.noalias() += v * v.transpose();
        }
        sigma /= (n - 1);
    };

    Vec mu_r, mu_f;
    Mat sig_r, sig_f;
    moments(real_features, mu_r, sig_r);
    moments(fake_features, mu_f, sig_f);
    for (int i = 0; i < d; ++i) {
        sig_r(i, i) += eps;
        sig_f(i, i) += eps;
    }

    // Tr((Sr Sf)^1/2) via the symmetric form S Sf S with S = Sr^1/2.
    Eigen::SelfAdjointEigenSolver<Mat> es_r(sig_r);
    check(es_r.info() == Eigen::Success, "fid: eigendecomposition failed");
    const double min_eig = es_r.eigenvalues().minCoeff();
    if (min_eig < -1e-6) fail("fid: covariance is not PSD beyond regularization (%g)", min_eig);
    Vec sqrt_eigs = es_r.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Mat s = es_r.eigenvectors() * sqrt_eigs.asDiagonal() * es_r.eigenvectors().transpose();
    Mat m = s * sig_f * s;
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es_m(m);
    check(es_m.info() == Eigen::Success, "fid: eigendecomposition failed");
    const double tr_sqrt = es_m.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    const double mean_term = (mu_r - mu_f).squaredNorm();
    const double value = mean_term + sig_r.trace() + sig_f.trace() - 2.0 * tr_sqrt;
    check(std::isfinite(value), "fid: non-finite result");
    return value;
}

std::vector<std::string> MetricReport::key_values() const {
    char buf[96];
    std::vector<std::string> out;
    std::snprintf(buf, sizeof(buf), "count=%d", count);
    out.emplace_back(buf);
    std::snprintf(buf, sizeof(buf), "ssim=%.6f", ssim_mean);
    out.emplace_back(buf);
    std::snprintf(buf, sizeof(buf), "rmse=%.6f", rmse_mean);
    out.emplace_back(buf);
    if (fid_value) {
        std::snprintf(buf, sizeof(buf), "fid=%.6f", *fid_value);
        out.emplace_back(buf);
        out.emplace_back("fid_backbone=" + fid_backbone);
    }
    return out;
}

void MetricReport::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) fail("MetricReport: cannot write %s", path.c_str());
    for (const std::string& line : key_values()) out << line << '\n';
}

}  // namespace glyphsynth
