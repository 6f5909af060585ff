#pragma once

#include <vector>

#include "glyphsynth/nn/autograd.hpp"

namespace glyphsynth::nn {

// Elementwise (same shape).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);
Var abs_op(const Var& a);
Var relu(const Var& a);
Var lrelu(const Var& a, double slope);
Var tanh_op(const Var& a);
Var sigmoid_op(const Var& a);

// Shape view (shares the value buffer).
Var reshape(const Var& a, std::vector<int64_t> shape);

// [M,K] x [K,N] -> [M,N]
Var matmul(const Var& a, const Var& b);
// x:[N,in], w:[out,in], b:[out] (optional, pass undefined Var to skip) -> [N,out]
Var linear(const Var& x, const Var& w, const Var& b);

// x:[N,C,H,W], w:[F,C,kh,kw], b:[F] optional.
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);

// 2x2 stride-2 pooling; border windows are clipped so sizes round up (1 stays 1).
Var maxpool2(const Var& x);
Var avgpool2(const Var& x);
Var global_avg_pool(const Var& x);  // [N,C,H,W] -> [N,C]
Var upsample2(const Var& x);        // nearest x2

// Per-(n,c) normalization over H*W; xhat = (x - mu) / sqrt(var + eps).
Var instance_norm(const Var& x, double eps);

struct BatchNormResult {
    Var y;
    Tensor batch_mean;  // [C], biased variance companion below
    Tensor batch_var;
};
// Training-mode batch norm (stats over N,H,W per channel). The layer applies
// affine parameters and maintains running stats from batch_mean/batch_var.
BatchNormResult batch_norm_train(const Var& x, double eps);
// Eval mode: fixed stats.
Var batch_norm_eval(const Var& x, const Tensor& mean, const Tensor& var, double eps);

// NCHW broadcasts.
Var mul_channel(const Var& x, const Var& g);   // g:[C]
Var add_channel(const Var& x, const Var& b);   // b:[C]
Var prelu(const Var& x, const Var& slope);     // slope:[C]
Var mul_nc(const Var& x, const Var& s);        // s:[N,C]
Var add_nc(const Var& x, const Var& s);        // s:[N,C]
Var mul_mask_hw(const Var& x, const Var& m);   // m:[N,H*W], broadcast over C

Var concat_channels(const std::vector<Var>& xs);
Var concat_cols(const Var& a, const Var& b);            // [N,A],[N,B] -> [N,A+B]
Var slice_cols(const Var& x, int64_t c0, int64_t c1);  // x:[N,M] -> [N,c1-c0]

// table:[V,E], ids per row -> [N,E]
Var embedding(const Var& table, const std::vector<int>& ids);

Var softmax_rows(const Var& x);  // [N,L]
// logits:[N,V], targets[N] -> per-row CE losses [N]
Var cross_entropy_rows(const Var& logits, const std::vector<int>& targets);
// Elementwise binary cross-entropy with logits against a constant target
// (0 or 1); logits are clipped to +-clip inside.
Var bce_logits(const Var& z, double target, double clip = 20.0);

// H:[N,C,h,w], alpha:[N,h*w] -> [N,C]; g_n = sum_l alpha[n,l] * H[n,:,l]
Var glimpse(const Var& feat, const Var& alpha);

Var sum_all(const Var& x);   // -> [1]
Var mean_all(const Var& x);  // -> [1]
Var mean_per_sample(const Var& x);  // [N,...] -> [N]

// Finiteness guard: throws if any element is NaN/Inf (used by the trainer).
void check_finite(const Tensor& t, const char* what);

}  // namespace glyphsynth::nn
