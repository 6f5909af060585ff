#include "glyphsynth/nn/ops.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace glyphsynth::nn {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using MapC = Eigen::Map<const EMat>;

namespace {

bool wants(const Node& node, size_t i) { return node.parents[i]->requires_grad; }

void shape_check(const Var& a, const Var& b, const char* op) {
    if (!a.val().same_shape(b.val()))
        fail("%s: shape mismatch %s vs %s", op, shape_str(a.shape()).c_str(),
             shape_str(b.shape()).c_str());
}

}  // namespace

void check_finite(const Tensor& t, const char* what) {
    for (const double v : t)
        if (!std::isfinite(v)) fail("non-finite value in %s", what);
}

Var add(const Var& a, const Var& b) {
    shape_check(a, b, "add");
    Tensor out = a.val().clone();
    const double* pb = b.val().data();
    double* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] += pb[i];
    return make_op(std::move(out), {a, b}, [](Node& n) {
        if (wants(n, 0)) accumulate(*n.parents[0], n.grad);
        if (wants(n, 1)) accumulate(*n.parents[1], n.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    shape_check(a, b, "sub");
    Tensor out = a.val().clone();
    const double* pb = b.val().data();
    double* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] -= pb[i];
    return make_op(std::move(out), {a, b}, [](Node& n) {
        if (wants(n, 0)) accumulate(*n.parents[0], n.grad);
        if (wants(n, 1)) {
            Tensor& g = n.parents[1]->grad_ref();
            for (int64_t i = 0; i < g.numel(); ++i) g[i] -= n.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    shape_check(a, b, "mul");
    Tensor out = a.val().clone();
    const double* pb = b.val().data();
    double* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] *= pb[i];
    return make_op(std::move(out), {a, b}, [](Node& n) {
        if (wants(n, 0)) {
            Tensor& g = n.parents[0]->grad_ref();
            const Tensor& bv = n.parents[1]->value;
            for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * bv[i];
        }
        if (wants(n, 1)) {
            Tensor& g = n.parents[1]->grad_ref();
            const Tensor& av = n.parents[0]->value;
            for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * av[i];
        }
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor out = a.val().clone();
    for (double& v : out) v += s;
    return make_op(std::move(out), {a}, [](Node& n) {
        if (wants(n, 0)) accumulate(*n.parents[0], n.grad);
    });
}

Var mul_scalar(const Var& a, double s) {
    Tensor out = a.val().clone();
    for (double& v : out) v *= s;
    return make_op(std::move(out), {a}, [s](Node& n) {
        if (wants(n, 0)) {
            Tensor& g = n.parents[0]->grad_ref();
            for (int64_t i = 0; i < g.numel(); ++i) g[i] += s * n.grad[i];
        }
    });
}

Var abs_op(const Var& a) {
    Tensor out = a.val().clone();
    for (double& v : out) v = std::fabs(v);
    return make_op(std::move(out), {a}, [](Node& n) {
        if (!wants(n, 0)) return;
        Tensor& g = n.parents[0]->grad_ref();
        const Tensor& x = n.parents[0]->value;
        for (int64_t i = 0; i < g.numel(); ++i)
            g[i] += (x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0)) * n.grad[i];
    });
}

Var relu(const Var& a) {
    Tensor out = a.val().clone();
    for (double& v : out) v = v > 0.0 ? v : 0.0;
    return make_op(std::move(out), {a}, [](Node& n) {
        if (!wants(n, 0)) return;
        Tensor& g = n.parents[0]->grad_ref();
        const Tensor& x = n.parents[0]->value;
        for (int64_t i = 0; i < g.numel(); ++i)
            if (x[i] > 0.0) g[i] += n.grad[i];
    });
}

Var lrelu(const Var& a, double slope) {
    Tensor out = a.val().clone();
    for (double& v : out) v = v > 0.0 ? v : slope * v;
    return make_op(std::move(out), {a}, [slope](Node& n) {
        if (!wants(n, 0)) return;
        Tensor& g = n.parents[0]->grad_ref();
        const Tensor& x = n.parents[0]->value;
        for (int64_t i = 0; i < g.numel(); ++i) g[i] += (x[i] > 0.0 ? 1.0 : slope) * n.grad[i];
    });
}

Var tanh_op(const Var& a) {
    Tensor out = a.val().clone();
    for (double& v : out) v = std::tanh(v);
    return make_op(std::move(out), {a}, [](Node& n) {
        if (!wants(n, 0)) return;
        Tensor& g = n.parents[0]->grad_ref();
        const Tensor& y = n.value;
        for (int64_t i = 0; i < g.numel(); ++i) g[i] += (1.0 - y[i] * y[i]) * n.grad[i];
    });
}

Var sigmoid_op(const Var& a) {
    Tensor out = a.val().clone();
    for (double& v : out) v = 1.0 / (1.0 + std::exp(-v));
    return make_op(std::move(out), {a}, [](Node& n) {
        if (!wants(n, 0)) return;
        Tensor& g = n.parents[0]->grad_ref();
        const Tensor& y = n.value;
        for (int64_t i = 0; i < g.numel(); ++i) g[i] += y[i] * (1.0 - y[i]) * n.grad[i];
    });
}

Var reshape(const Var& a, std::vector<int64_t> shape) {
    Tensor out = a.val().reshaped(std::move(shape));
    return make_op(std::move(out), {a}, [](Node& n) {
        if (!wants(n, 0)) return;
        accumulate(*n.parents[0], n.grad.reshaped(n.parents[0]->value.shape()));
    });
}

Var matmul(const Var& a, const Var& b) {
    check(a.val().ndim() == 2 && b.val().ndim() == 2 && a.val().size(1) == b.val().size(0),
          "matmul: incompatible shapes");
    const int64_t m = a.val().size(0), k = a.val().size(1), n = b.val().size(1);
    Tensor out({m, n});
    MapM(out.data(), m, n).noalias() =
        MapC(a.val().data(), m, k) * MapC(b.val().data(), k, n);
    return make_op(std::move(out), {a, b}, [m, k, n](Node& nd) {
        MapC dy(nd.grad.data(), m, n);
        if (wants(nd, 0)) {
            Tensor& ga = nd.parents[0]->grad_ref();
            MapM(ga.data(), m, k).noalias() +=
                dy * MapC(nd.parents[1]->value.data(), k, n).transpose();
        }
        if (wants(nd, 1)) {
            Tensor& gb = nd.parents[1]->grad_ref();
            MapM(gb.data(), k, n).noalias() +=
                MapC(nd.parents[0]->value.data(), m, k).transpose() * dy;
        }
    });
}

Var linear(const Var& x, const Var& w, const Var& b) {
    check(x.val().ndim() == 2 && w.val().ndim() == 2 && x.val().size(1) == w.val().size(1),
          "linear: incompatible shapes");
    const int64_t n = x.val().size(0), in = x.val().size(1), out_dim = w.val().size(0);
    Tensor out({n, out_dim});
    MapM y(out.data(), n, out_dim);
    y.noalias() = MapC(x.val().data(), n, in) * MapC(w.val().data(), out_dim, in).transpose();
    if (b.defined()) {
        check(b.val().numel() == out_dim, "linear: bias size mismatch");
        const double* pb = b.val().data();
        for (int64_t r = 0; r < n; ++r)
            for (int64_t c = 0; c < out_dim; ++c) out.at(r, c) += pb[c];
    }
    std::vector<Var> parents = {x, w};
    if (b.defined()) parents.push_back(b);
    return make_op(std::move(out), std::move(parents), [n, in, out_dim](Node& nd) {
        MapC dy(nd.grad.data(), n, out_dim);
        if (wants(nd, 0)) {
            MapM(nd.parents[0]->grad_ref().data(), n, in).noalias() +=
                dy * MapC(nd.parents[1]->value.data(), out_dim, in);
        }
        if (wants(nd, 1)) {
            MapM(nd.parents[1]->grad_ref().data(), out_dim, in).noalias() +=
                dy.transpose() * MapC(nd.parents[0]->value.data(), n, in);
        }
        if (nd.parents.size() > 2 && wants(nd, 2)) {
            Tensor& gb = nd.parents[2]->grad_ref();
            for (int64_t r = 0; r < n; ++r)
                for (int64_t c = 0; c < out_dim; ++c) gb[c] += nd.grad.at(r, c);
        }
    });
}

namespace {

struct ConvDims {
    int64_t N, C, H, W, F, kh, kw, OH, OW;
    int stride, pad;
};

void im2col(const double* x, const ConvDims& d, int64_t n, double* col) {
    // col layout: [C*kh*kw, OH*OW]
    const int64_t plane = d.H * d.W;
    const double* xn = x + n * d.C * plane;
    int64_t row = 0;
    for (int64_t c = 0; c < d.C; ++c) {
        for (int64_t ki = 0; ki < d.kh; ++ki) {
            for (int64_t kj = 0; kj < d.kw; ++kj, ++row) {
                double* dst = col + row * d.OH * d.OW;
                for (int64_t oh = 0; oh < d.OH; ++oh) {
                    const int64_t ih = oh * d.stride - d.pad + ki;
                    if (ih < 0 || ih >= d.H) {
                        for (int64_t ow = 0; ow < d.OW; ++ow) *dst++ = 0.0;
                        continue;
                    }
                    const double* src_row = xn + c * plane + ih * d.W;
                    for (int64_t ow = 0; ow < d.OW; ++ow) {
                        const int64_t iw = ow * d.stride - d.pad + kj;
                        *dst++ = (iw >= 0 && iw < d.W) ? src_row[iw] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_accum(const double* col, const ConvDims& d, int64_t n, double* gx) {
    const int64_t plane = d.H * d.W;
    double* gxn = gx + n * d.C * plane;
    int64_t row = 0;
    for (int64_t c = 0; c < d.C; ++c) {
        for (int64_t ki = 0; ki < d.kh; ++ki) {
            for (int64_t kj = 0; kj < d.kw; ++kj, ++row) {
                const double* src = col + row * d.OH * d.OW;
                for (int64_t oh = 0; oh < d.OH; ++oh, src += d.OW) {
                    const int64_t ih = oh * d.stride - d.pad + ki;
                    if (ih < 0 || ih >= d.H) continue;
                    double* dst_row = gxn + c * plane + ih * d.W;
                    for (int64_t ow = 0; ow < d.OW; ++ow) {
                        const int64_t iw = ow * d.stride - d.pad + kj;
                        if (iw >= 0 && iw < d.W) dst_row[iw] += src[ow];
                    }
                }
            }
        }
    }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    check(x.val().ndim() == 4 && w.val().ndim() == 4, "conv2d: expects 4-d input and weight");
    check(x.val().size(1) == w.val().size(1), "conv2d: channel mismatch");
    ConvDims d;
    d.N = x.val().size(0);
    d.C = x.val().size(1);
    d.H = x.val().size(2);
    d.W = x.val().size(3);
    d.F = w.val().size(0);
    d.kh = w.val().size(2);
    d.kw = w.val().size(3);
    d.stride = stride;
    d.pad = pad;
    d.OH = (d.H + 2 * pad - d.kh) / stride + 1;
    d.OW = (d.W + 2 * pad - d.kw) / stride + 1;
    check(d.OH > 0 && d.OW > 0, "conv2d: output would be empty");
    if (b.defined()) check(b.val().numel() == d.F, "conv2d: bias size mismatch");

    const int64_t ckk = d.C * d.kh * d.kw;
    const int64_t ohw = d.OH * d.OW;
    Tensor out({d.N, d.F, d.OH, d.OW});
    std::vector<double> col(static_cast<size_t>(ckk * ohw));
    MapC wm(w.val().data(), d.F, ckk);
    for (int64_t n = 0; n < d.N; ++n) {
        im2col(x.val().data(), d, n, col.data());
        MapM(out.data() + n * d.F * ohw, d.F, ohw).noalias() =
            wm * MapC(col.data(), ckk, ohw);
    }
    if (b.defined()) {
        const double* pb = b.val().data();
        double* po = out.data();
        for (int64_t n = 0; n < d.N; ++n)
            for (int64_t f = 0; f < d.F; ++f) {
                const double bias = pb[f];
                for (int64_t i = 0; i < ohw; ++i) *po++ += bias;
            }
    }

    std::vector<Var> parents = {x, w};
    if (b.defined()) parents.push_back(b);
    return make_op(std::move(out), std::move(parents), [d, ckk, ohw](Node& nd) {
        const bool want_x = wants(nd, 0);
        const bool want_w = wants(nd, 1);
        const bool want_b = nd.parents.size() > 2 && wants(nd, 2);
        std::vector<double> col(static_cast<size_t>(ckk * ohw));
        std::vector<double> dcol(want_x ? static_cast<size_t>(ckk * ohw) : 0);
        const Tensor& xv = nd.parents[0]->value;
        MapC wm(nd.parents[1]->value.data(), d.F, ckk);
        for (int64_t n = 0; n < d.N; ++n) {
            MapC dy(nd.grad.data() + n * d.F * ohw, d.F, ohw);
            if (want_w) {
                im2col(xv.data(), d, n, col.data());
                MapM(nd.parents[1]->grad_ref().data(), d.F, ckk).noalias() +=
                    dy * MapC(col.data(), ckk, ohw).transpose();
            }
            if (want_x) {
                MapM(dcol.data(), ckk, ohw).noalias() = wm.transpose() * dy;
                col2im_accum(dcol.data(), d, n, nd.parents[0]->grad_ref().data());
            }
        }
        if (want_b) {
            Tensor& gb = nd.parents[2]->grad_ref();
            const double* pg = nd.grad.data();
            for (int64_t n = 0; n < d.N; ++n)
                for (int64_t f = 0; f < d.F; ++f) {
                    double s = 0.0;
                    for (int64_t i = 0; i < ohw; ++i) s += *pg++;
                    gb[f] += s;
                }
        }
    });
}

Var maxpool2(const Var& x) {
    check(x.val().ndim() == 4, "maxpool2: expects NCHW");
    const int64_t N = x.val().size(0), C = x.val().size(1), H = x.val().size(2),
                  W = x.val().size(3);
    const int64_t OH = (H + 1) / 2, OW = (W + 1) / 2;
    Tensor out({N, C, OH, OW});
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(N * C * OH * OW));
    const double* px = x.val().data();
    double* po = out.data();
    int64_t oi = 0;
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const double* plane = px + nc * H * W;
        for (int64_t oh = 0; oh < OH; ++oh) {
            for (int64_t ow = 0; ow < OW; ++ow, ++oi) {
                double best = -1e300;
                int64_t best_idx = -1;
                for (int64_t ih = 2 * oh; ih < std::min<int64_t>(2 * oh + 2, H); ++ih)
                    for (int64_t iw = 2 * ow; iw < std::min<int64_t>(2 * ow + 2, W); ++iw) {
                        const double v = plane[ih * W + iw];
                        if (v > best) {
                            best = v;
                            best_idx = nc * H * W + ih * W + iw;
                        }
                    }
                po[oi] = best;
                (*argmax)[static_cast<size_t>(oi)] = best_idx;
            }
        }
    }
    return make_op(std::move(out), {x}, [argmax](Node& n) {
        if (!wants(n, 0)) return;
        Tensor& g = n.parents[0]->grad_ref();
        for (int64_t i = 0; i < n.grad.numel(); ++i) g[(*argmax)[static_cast<size_t>(i)]] += n.grad[i];
    });
}

Var avgpool2(const Var& x) {
    check(x.val().ndim() == 4, "avgpool2: expects NCHW");
    const int64_t N = x.val().size(0), C = x.val().size(1), H = x.val().size(2),
                  W = x.val().size(3);
    const int64_t OH = (H + 1) / 2, OW = (W + 1) / 2;
    Tensor out({N, C, OH, OW});
    const double* px = x.val().data();
    double* po = out.data();
    int64_t oi = 0;
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const double* plane = px + nc * H * W;
        for (int64_t oh = 0; oh < OH; ++oh)
            for (int64_t ow = 0; ow < OW; ++ow, ++oi) {
                double s = 0.0;
                int cnt = 0;
                for (int64_t ih = 2 * oh; ih < std::min<int64_t>(2 * oh + 2, H); ++ih)
                    for (int64_t iw = 2 * ow; iw < std::min<int64_t>(2 * ow + 2, W); ++iw) {
                        s += plane[ih * W + iw];
                        ++cnt;
                    }
                po[oi] = s / cnt;
            }
    }
    return make_op(std::move(out), {x}, [N, C, H, W, OH, OW](Node& n) {
        if (!wants(n, 0)) return;
        Tensor& g = n.parents[0]->grad_ref();
        int64_t oi = 0;
        for (int64_t nc = 0; nc < N * C; ++nc) {
            double* gplane = g.data() + nc * H * W;
            for (int64_t oh = 0; oh < OH; ++oh)
                for (int64_t ow = 0; ow < OW; ++ow, ++oi) {
                    const int64_t h1 = std::min<int64_t>(2 * oh + 2, H);
                    const int64_t w1 = std::min<int64_t>(2 * ow + 2, W);
                    const int cnt = static_cast<int>((h1 - 2 * oh) * (w1 - 2 * ow));
                    const double v = n.grad[oi] / cnt;
                    for (int64_t ih = 2 * oh; ih < h1; ++ih)
                        for (int64_t iw = 2 * ow; iw < w1; ++iw) gplane[ih * W + iw] += v;
                }
        }
    });
}

Var global_avg_pool(const Var& x) {
    check(x.val().ndim() == 4, "global_avg_pool: expects NCHW");
    const int64_t N = x.val().size(0), C = x.val().size(1), m = x.val().size(2) * x.val().size(3);
    Tensor out({N, C});
    const double* px = x.val().data();
    for (int64_t nc = 0; nc < N * C; ++nc) {
        double s = 0.0;
        for (int64_t i = 0; i < m; ++i) s += px[nc * m + i];
        out[nc] = s / static_cast<double>(m);
    }
    return make_op(std::move(out), {x}, [m](Node& n) {
        if (!wants(n, 0)) return;
        Tensor& g = n.parents[0]->grad_ref();
        for (int64_t nc = 0; nc < n.grad.numel(); ++nc) {
            const double v = n.grad[nc] / static_cast<double>(m);
            for (int64_t i = 0; i < m; ++i) g[nc * m + i] += v;
        }
    });
}

Var upsample2(const Var& x) {
    check(x.val().ndim() == 4, "upsample2: expects NCHW");
    const int64_t N = x.val().size(0), C = x.val().size(1), H = x.val().size(2),
                  W = x.val().size(3);
    Tensor out({N, C, 2 * H, 2 * W});
    const double* px = x.val().data();
    double* po = out.data();
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const double* plane = px + nc * H * W;
        double* oplane = po + nc * 4 * H * W;
        for (int64_t oh = 0; oh < 2 * H; ++oh) {
            const double* src_row = plane + (oh / 2) * W;
            double* dst = oplane + oh * 2 * W;
            for (int64_t ow = 0; ow < 2 * W; ++ow) dst[ow] = src_row[ow / 2];
        }
    }
    return make_op(std::move(out), {x}, [N, C, H, W](Node& n) {
        if (!wants(n, 0)) return;
        Tensor& g = n.parents[0]->grad_ref();
        const double* pg = n.grad.data();
        for (int64_t nc = 0; nc < N * C; ++nc) {
            double* gplane = g.data() + nc * H * W;
            const double* gout = pg + nc * 4 * H * W;
            for (int64_t oh = 0; oh < 2 * H; ++oh)
                for (int64_t ow = 0; ow < 2 * W; ++ow)
                    gplane[(oh / 2) * W + ow / 2] += gout[oh * 2 * W + ow];
        }
    });
}

Var instance_norm(const Var& x, double eps) {
    check(x.val().ndim() == 4, "instance_norm: expects NCHW");
    const int64_t NC = x.val().size(0) * x.val().size(1);
    const int64_t m = x.val().size(2) * x.val().size(3);
    Tensor out(x.val().shape());
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(NC));
    const double* px = x.val().data();
    double* po = out.data();
    for (int64_t nc = 0; nc < NC; ++nc) {
        const double* xs = px + nc * m;
        double mu = 0.0;
        for (int64_t i = 0; i < m; ++i) mu += xs[i];
        mu /= static_cast<double>(m);
        double var = 0.0;
        for (int64_t i = 0; i < m; ++i) {
            const double dlt = xs[i] - mu;
            var += dlt * dlt;
        }
        var /= static_cast<double>(m);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[static_cast<size_t>(nc)] = is;
        double* ys = po + nc * m;
        for (int64_t i = 0; i < m; ++i) ys[i] = (xs[i] - mu) * is;
    }
    return make_op(std::move(out), {x}, [NC, m, inv_std](Node& n) {
        if (!wants(n, 0)) return;
        Tensor& g = n.parents[0]->grad_ref();
        const Tensor& y = n.value;  // xhat
        for (int64_t nc = 0; nc < NC; ++nc) {
            const double* dy = n.grad.data() + nc * m;
            const double* xh = y.data() + nc * m;
            double* gx = g.data() + nc * m;
            double mean_dy = 0.0, mean_dyxh = 0.0;
            for (int64_t i = 0; i < m; ++i) {
                mean_dy += dy[i];
                mean_dyxh += dy[i] * xh[i];
            }
            mean_dy /= static_cast<double>(m);
            mean_dyxh /= static_cast<double>(m);
            const double is = (*inv_std)[static_cast<size_t>(nc)];
            for (int64_t i = 0; i < m; ++i)
                gx[i] += is * (dy[i] - mean_dy - xh[i] * mean_dyxh);
        }
    });
}

BatchNormResult batch_norm_train(const Var& x, double eps) {
    check(x.val().ndim() == 4, "batch_norm: expects NCHW");
    const int64_t N = x.val().size(0), C = x.val().size(1), HW = x.val().size(2) * x.val().size(3);
    const int64_t m = N * HW;
    Tensor mean({C}), var({C});
    const double* px = x.val().data();
    for (int64_t c = 0; c < C; ++c) {
        double mu = 0.0;
        for (int64_t n = 0; n < N; ++n) {
            const double* xs = px + (n * C + c) * HW;
            for (int64_t i = 0; i < HW; ++i) mu += xs[i];
        }
        mu /= static_cast<double>(m);
        double v = 0.0;
        for (int64_t n = 0; n < N; ++n) {
            const double* xs = px + (n * C + c) * HW;
            for (int64_t i = 0; i < HW; ++i) {
                const double dlt = xs[i] - mu;
                v += dlt * dlt;
            }
        }
        mean[c] = mu;
        var[c] = v / static_cast<double>(m);
    }
    Tensor out(x.val().shape());
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(C));
    for (int64_t c = 0; c < C; ++c)
        (*inv_std)[static_cast<size_t>(c)] = 1.0 / std::sqrt(var[c] + eps);
    double* po = out.data();
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double* xs = px + (n * C + c) * HW;
            double* ys = po + (n * C + c) * HW;
            const double mu = mean[c], is = (*inv_std)[static_cast<size_t>(c)];
            for (int64_t i = 0; i < HW; ++i) ys[i] = (xs[i] - mu) * is;
        }
    Var y = make_op(std::move(out), {x}, [N, C, HW, m, inv_std](Node& nd) {
        if (!wants(nd, 0)) return;
        Tensor& g = nd.parents[0]->grad_ref();
        const Tensor& xh = nd.value;
        for (int64_t c = 0; c < C; ++c) {
            double mean_dy = 0.0, mean_dyxh = 0.0;
            for (int64_t n = 0; n < N; ++n) {
                const double* dy = nd.grad.data() + (n * C + c) * HW;
                const double* h = xh.data() + (n * C + c) * HW;
                for (int64_t i = 0; i < HW; ++i) {
                    mean_dy += dy[i];
                    mean_dyxh += dy[i] * h[i];
                }
            }
            mean_dy /= static_cast<double>(m);
            mean_dyxh /= static_cast<double>(m);
            const double is = (*inv_std)[static_cast<size_t>(c)];
            for (int64_t n = 0; n < N; ++n) {
                const double* dy = nd.grad.data() + (n * C + c) * HW;
                const double* h = xh.data() + (n * C + c) * HW;
                double* gx = g.data() + (n * C + c) * HW;
                for (int64_t i = 0; i < HW; ++i)
                    gx[i] += is * (dy[i] - mean_dy - h[i] * mean_dyxh);
            }
        }
    });
    return {std::move(y), std::move(mean), std::move(var)};
}

Var batch_norm_eval(const Var& x, const Tensor& mean, const Tensor& var, double eps) {
    check(x.val().ndim() == 4, "batch_norm: expects NCHW");
    const int64_t N = x.val().size(0), C = x.val().size(1), HW = x.val().size(2) * x.val().size(3);
    check(mean.numel() == C && var.numel() == C, "batch_norm_eval: stat size mismatch");
    Tensor out(x.val().shape());
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(C));
    for (int64_t c = 0; c < C; ++c)
        (*inv_std)[static_cast<size_t>(c)] = 1.0 / std::sqrt(var[c] + eps);
    const double* px = x.val().data();
    double* po = out.data();
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double mu = mean[c], is = (*inv_std)[static_cast<size_t>(c)];
            const double* xs = px + (n * C + c) * HW;
            double* ys = po + (n * C + c) * HW;
            for (int64_t i = 0; i < HW; ++i) ys[i] = (xs[i] - mu) * is;
        }
    return make_op(std::move(out), {x}, [N, C, HW, inv_std](Node& nd) {
        if (!wants(nd, 0)) return;
        Tensor& g = nd.parents[0]->grad_ref();
        for (int64_t n = 0; n < N; ++n)
            for (int64_t c = 0; c < C; ++c) {
                const double is = (*inv_std)[static_cast<size_t>(c)];
                const double* dy = nd.grad.data() + (n * C + c) * HW;
                double* gx = g.data() + (n * C + c) * HW;
                for (int64_t i = 0; i < HW; ++i) gx[i] += is * dy[i];
            }
    });
}

Var mul_channel(const Var& x, const Var& g) {
    check(x.val().ndim() == 4, "mul_channel: expects NCHW");
    const int64_t N = x.val().size(0), C = x.val().size(1), HW = x.val().size(2) * x.val().size(3);
    check(g.val().numel() == C, "mul_channel: parameter size mismatch");
    Tensor out(x.val().shape());
    const double* px = x.val().data();
    const double* pg = g.val().data();
    double* po = out.data();
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double s = pg[c];
            const double* xs = px + (n * C + c) * HW;
            double* ys = po + (n * C + c) * HW;
            for (int64_t i = 0; i < HW; ++i) ys[i] = xs[i] * s;
        }
    return make_op(std::move(out), {x, g}, [N, C, HW](Node& nd) {
        if (wants(nd, 0)) {
            Tensor& gx = nd.parents[0]->grad_ref();
            const Tensor& gv = nd.parents[1]->value;
            for (int64_t n = 0; n < N; ++n)
                for (int64_t c = 0; c < C; ++c) {
                    const double s = gv[c];
                    const double* dy = nd.grad.data() + (n * C + c) * HW;
                    double* dst = gx.data() + (n * C + c) * HW;
                    for (int64_t i = 0; i < HW; ++i) dst[i] += dy[i] * s;
                }
        }
        if (wants(nd, 1)) {
            Tensor& gg = nd.parents[1]->grad_ref();
            const Tensor& xv = nd.parents[0]->value;
            for (int64_t n = 0; n < N; ++n)
                for (int64_t c = 0; c < C; ++c) {
                    const double* dy = nd.grad.data() + (n * C + c) * HW;
                    const double* xs = xv.data() + (n * C + c) * HW;
                    double s = 0.0;
                    for (int64_t i = 0; i < HW; ++i) s += dy[i] * xs[i];
                    gg[c] += s;
                }
        }
    });
}

Var add_channel(const Var& x, const Var& b) {
    check(x.val().ndim() == 4, "add_channel: expects NCHW");
    const int64_t N = x.val().size(0), C = x.val().size(1), HW = x.val().size(2) * x.val().size(3);
    check(b.val().numel() == C, "add_channel: parameter size mismatch");
    Tensor out = x.val().clone();
    const double* pb = b.val().data();
    double* po = out.data();
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double s = pb[c];
            double* ys = po + (n * C + c) * HW;
            for (int64_t i = 0; i < HW; ++i) ys[i] += s;
        }
    return make_op(std::move(out), {x, b}, [N, C, HW](Node& nd) {
        if (wants(nd, 0)) accumulate(*nd.parents[0], nd.grad);
        if (wants(nd, 1)) {
            Tensor& gb = nd.parents[1]->grad_ref();
            for (int64_t n = 0; n < N; ++n)
                for (int64_t c = 0; c < C; ++c) {
                    const double* dy = nd.grad.data() + (n * C + c) * HW;
                    double s = 0.0;
                    for (int64_t i = 0; i < HW; ++i) s += dy[i];
                    gb[c] += s;
                }
        }
    });
}

Var prelu(const Var& x, const Var& slope) {
    check(x.val().ndim() == 4, "prelu: expects NCHW");
    const int64_t N = x.val().size(0), C = x.val().size(1), HW = x.val().size(2) * x.val().size(3);
    check(slope.val().numel() == C, "prelu: slope size mismatch");
    Tensor out(x.val().shape());
    const double* px = x.val().data();
    const double* pa = slope.val().data();
    double* po = out.data();
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double a = pa[c];
            const double* xs = px + (n * C + c) * HW;
            double* ys = po + (n * C + c) * HW;
            for (int64_t i = 0; i < HW; ++i) ys[i] = xs[i] > 0.0 ? xs[i] : a * xs[i];
        }
    return make_op(std::move(out), {x, slope}, [N, C, HW](Node& nd) {
        const Tensor& xv = nd.parents[0]->value;
        const Tensor& av = nd.parents[1]->value;
        if (wants(nd, 0)) {
            Tensor& gx = nd.parents[0]->grad_ref();
            for (int64_t n = 0; n < N; ++n)
                for (int64_t c = 0; c < C; ++c) {
                    const double a = av[c];
                    const double* dy = nd.grad.data() + (n * C + c) * HW;
                    const double* xs = xv.data() + (n * C + c) * HW;
                    double* dst = gx.data() + (n * C + c) * HW;
                    for (int64_t i = 0; i < HW; ++i) dst[i] += (xs[i] > 0.0 ? 1.0 : a) * dy[i];
                }
        }
        if (wants(nd, 1)) {
            Tensor& ga = nd.parents[1]->grad_ref();
            for (int64_t n = 0; n < N; ++n)
                for (int64_t c = 0; c < C; ++c) {
                    const double* dy = nd.grad.data() + (n * C + c) * HW;
                    const double* xs = xv.data() + (n * C + c) * HW;
                    double s = 0.0;
                    for (int64_t i = 0; i < HW; ++i)
                        if (xs[i] <= 0.0) s += xs[i] * dy[i];
                    ga[c] += s;
                }
        }
    });
}

Var mul_nc(const Var& x, const Var& s) {
    check(x.val().ndim() == 4 && s.val().ndim() == 2, "mul_nc: expects NCHW and [N,C]");
    const int64_t N = x.val().size(0), C = x.val().size(1), HW = x.val().size(2) * x.val().size(3);
    check(s.val().size(0) == N && s.val().size(1) == C, "mul_nc: shape mismatch");
    Tensor out(x.val().shape());
    const double* px = x.val().data();
    const double* ps = s.val().data();
    double* po = out.data();
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const double v = ps[nc];
        for (int64_t i = 0; i < HW; ++i) po[nc * HW + i] = px[nc * HW + i] * v;
    }
    return make_op(std::move(out), {x, s}, [HW](Node& nd) {
        const int64_t NC = nd.parents[1]->value.numel();
        if (wants(nd, 0)) {
            Tensor& gx = nd.parents[0]->grad_ref();
            const Tensor& sv = nd.parents[1]->value;
            for (int64_t nc = 0; nc < NC; ++nc) {
                const double v = sv[nc];
                for (int64_t i = 0; i < HW; ++i) gx[nc * HW + i] += nd.grad[nc * HW + i] * v;
            }
        }
        if (wants(nd, 1)) {
            Tensor& gs = nd.parents[1]->grad_ref();
            const Tensor& xv = nd.parents[0]->value;
            for (int64_t nc = 0; nc < NC; ++nc) {
                double acc = 0.0;
                for (int64_t i = 0; i < HW; ++i) acc += nd.grad[nc * HW + i] * xv[nc * HW + i];
                gs[nc] += acc;
            }
        }
    });
}

Var add_nc(const Var& x, const Var& s) {
    check(x.val().ndim() == 4 && s.val().ndim() == 2, "add_nc: expects NCHW and [N,C]");
    const int64_t N = x.val().size(0), C = x.val().size(1), HW = x.val().size(2) * x.val().size(3);
    check(s.val().size(0) == N && s.val().size(1) == C, "add_nc: shape mismatch");
    Tensor out = x.val().clone();
    const double* ps = s.val().data();
    double* po = out.data();
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const double v = ps[nc];
        for (int64_t i = 0; i < HW; ++i) po[nc * HW + i] += v;
    }
    return make_op(std::move(out), {x, s}, [HW](Node& nd) {
        if (wants(nd, 0)) accumulate(*nd.parents[0], nd.grad);
        if (wants(nd, 1)) {
            Tensor& gs = nd.parents[1]->grad_ref();
            for (int64_t nc = 0; nc < gs.numel(); ++nc) {
                double acc = 0.0;
                for (int64_t i = 0; i < HW; ++i) acc += nd.grad[nc * HW + i];
                gs[nc] += acc;
            }
        }
    });
}

Var mul_mask_hw(const Var& x, const Var& m) {
    check(x.val().ndim() == 4 && m.val().ndim() == 2, "mul_mask_hw: expects NCHW and [N,HW]");
    const int64_t N = x.val().size(0), C = x.val().size(1), HW = x.val().size(2) * x.val().size(3);
    check(m.val().size(0) == N && m.val().size(1) == HW, "mul_mask_hw: mask shape mismatch");
    Tensor out(x.val().shape());
    const double* px = x.val().data();
    const double* pm = m.val().data();
    double* po = out.data();
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double* xs = px + (n * C + c) * HW;
            const double* ms = pm + n * HW;
            double* ys = po + (n * C + c) * HW;
            for (int64_t i = 0; i < HW; ++i) ys[i] = xs[i] * ms[i];
        }
    return make_op(std::move(out), {x, m}, [N, C, HW](Node& nd) {
        const Tensor& xv = nd.parents[0]->value;
        const Tensor& mv = nd.parents[1]->value;
        if (wants(nd, 0)) {
            Tensor& gx = nd.parents[0]->grad_ref();
            for (int64_t n = 0; n < N; ++n)
                for (int64_t c = 0; c < C; ++c) {
                    const double* dy = nd.grad.data() + (n * C + c) * HW;
                    const double* ms = mv.data() + n * HW;
                    double* dst = gx.data() + (n * C + c) * HW;
                    for (int64_t i = 0; i < HW; ++i) dst[i] += dy[i] * ms[i];
                }
        }
        if (wants(nd, 1)) {
            Tensor& gm = nd.parents[1]->grad_ref();
            for (int64_t n = 0; n < N; ++n) {
                double* dst = gm.data() + n * HW;
                for (int64_t c = 0; c < C; ++c) {
                    const double* dy = nd.grad.data() + (n * C + c) * HW;
                    const double* xs = xv.data() + (n * C + c) * HW;
                    for (int64_t i = 0; i < HW; ++i) dst[i] += dy[i] * xs[i];
                }
            }
        }
    });
}

Var concat_channels(const std::vector<Var>& xs) {
    check(!xs.empty(), "concat_channels: empty input");
    const int64_t N = xs[0].val().size(0), H = xs[0].val().size(2), W = xs[0].val().size(3);
    int64_t C = 0;
    for (const Var& x : xs) {
        check(x.val().ndim() == 4 && x.val().size(0) == N && x.val().size(2) == H &&
                  x.val().size(3) == W,
              "concat_channels: incompatible shapes");
        C += x.val().size(1);
    }
    Tensor out({N, C, H, W});
    const int64_t HW = H * W;
    double* po = out.data();
    for (int64_t n = 0; n < N; ++n) {
        int64_t coff = 0;
        for (const Var& x : xs) {
            const int64_t ci = x.val().size(1);
            std::copy(x.val().data() + n * ci * HW, x.val().data() + (n + 1) * ci * HW,
                      po + (n * C + coff) * HW);
            coff += ci;
        }
    }
    std::vector<Var> parents(xs.begin(), xs.end());
    return make_op(std::move(out), std::move(parents), [N, C, HW](Node& nd) {
        int64_t coff = 0;
        for (size_t pi = 0; pi < nd.parents.size(); ++pi) {
            const int64_t ci = nd.parents[pi]->value.size(1);
            if (wants(nd, pi)) {
                Tensor& g = nd.parents[pi]->grad_ref();
                for (int64_t n = 0; n < N; ++n) {
                    const double* src = nd.grad.data() + (n * C + coff) * HW;
                    double* dst = g.data() + n * ci * HW;
                    for (int64_t i = 0; i < ci * HW; ++i) dst[i] += src[i];
                }
            }
            coff += ci;
        }
    });
}

Var concat_cols(const Var& a, const Var& b) {
    check(a.val().ndim() == 2 && b.val().ndim() == 2 && a.val().size(0) == b.val().size(0),
          "concat_cols: incompatible shapes");
    const int64_t N = a.val().size(0), A = a.val().size(1), B = b.val().size(1);
    Tensor out({N, A + B});
    for (int64_t n = 0; n < N; ++n) {
        std::copy(a.val().data() + n * A, a.val().data() + (n + 1) * A, out.data() + n * (A + B));
        std::copy(b.val().data() + n * B, b.val().data() + (n + 1) * B,
                  out.data() + n * (A + B) + A);
    }
    return make_op(std::move(out), {a, b}, [N, A, B](Node& nd) {
        if (wants(nd, 0)) {
            Tensor& g = nd.parents[0]->grad_ref();
            for (int64_t n = 0; n < N; ++n)
                for (int64_t i = 0; i < A; ++i) g[n * A + i] += nd.grad[n * (A + B) + i];
        }
        if (wants(nd, 1)) {
            Tensor& g = nd.parents[1]->grad_ref();
            for (int64_t n = 0; n < N; ++n)
                for (int64_t i = 0; i < B; ++i) g[n * B + i] += nd.grad[n * (A + B) + A + i];
        }
    });
}

Var slice_cols(const Var& x, int64_t c0, int64_t c1) {
    check(x.val().ndim() == 2 && c0 >= 0 && c1 <= x.val().size(1) && c0 < c1,
          "slice_cols: bad range");
    const int64_t N = x.val().size(0), M = x.val().size(1), K = c1 - c0;
    Tensor out({N, K});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t k = 0; k < K; ++k) out.at(n, k) = x.val().at(n, c0 + k);
    return make_op(std::move(out), {x}, [N, M, K, c0](Node& nd) {
        if (!wants(nd, 0)) return;
        Tensor& g = nd.parents[0]->grad_ref();
        for (int64_t n = 0; n < N; ++n)
            for (int64_t k = 0; k < K; ++k) g[n * M + c0 + k] += nd.grad[n * K + k];
    });
}

Var embedding(const Var& table, const std::vector<int>& ids) {
    check(table.val().ndim() == 2, "embedding: table must be [V,E]");
    const int64_t V = table.val().size(0), E = table.val().size(1);
    const int64_t N = static_cast<int64_t>(ids.size());
    for (int id : ids)
        check(id >= 0 && id < V, "embedding: token id out of range");
    Tensor out({N, E});
    for (int64_t n = 0; n < N; ++n)
        std::copy(table.val().data() + ids[static_cast<size_t>(n)] * E,
                  table.val().data() + (ids[static_cast<size_t>(n)] + 1) * E, out.data() + n * E);
    auto ids_copy = std::make_shared<std::vector<int>>(ids);
    return make_op(std::move(out), {table}, [E, ids_copy](Node& nd) {
        if (!wants(nd, 0)) return;
        Tensor& g = nd.parents[0]->grad_ref();
        for (size_t n = 0; n < ids_copy->size(); ++n) {
            const double* src = nd.grad.data() + static_cast<int64_t>(n) * E;
            double* dst = g.data() + (*ids_copy)[n] * E;
            for (int64_t e = 0; e < E; ++e) dst[e] += src[e];
        }
    });
}

Var softmax_rows(const Var& x) {
    check(x.val().ndim() == 2, "softmax_rows: expects [N,L]");
    const int64_t N = x.val().size(0), L = x.val().size(1);
    Tensor out({N, L});
    for (int64_t n = 0; n < N; ++n) {
        const double* xs = x.val().data() + n * L;
        double* ys = out.data() + n * L;
        double mx = xs[0];
        for (int64_t i = 1; i < L; ++i) mx = std::max(mx, xs[i]);
        double sum = 0.0;
        for (int64_t i = 0; i < L; ++i) {
            ys[i] = std::exp(xs[i] - mx);
            sum += ys[i];
        }
        for (int64_t i = 0; i < L; ++i) ys[i] /= sum;
    }
    return make_op(std::move(out), {x}, [N, L](Node& nd) {
        if (!wants(nd, 0)) return;
        Tensor& g = nd.parents[0]->grad_ref();
        const Tensor& y = nd.value;
        for (int64_t n = 0; n < N; ++n) {
            const double* ys = y.data() + n * L;
            const double* dy = nd.grad.data() + n * L;
            double dot = 0.0;
            for (int64_t i = 0; i < L; ++i) dot += dy[i] * ys[i];
            double* gx = g.data() + n * L;
            for (int64_t i = 0; i < L; ++i) gx[i] += ys[i] * (dy[i] - dot);
        }
    });
}

Var cross_entropy_rows(const Var& logits, const std::vector<int>& targets) {
    check(logits.val().ndim() == 2, "cross_entropy_rows: expects [N,V]");
    const int64_t N = logits.val().size(0), V = logits.val().size(1);
    check(static_cast<int64_t>(targets.size()) == N, "cross_entropy_rows: target count mismatch");
    for (int t : targets)
        check(t >= 0 && t < V, "cross_entropy_rows: target out of range");
    Tensor out({N});
    for (int64_t n = 0; n < N; ++n) {
        const double* xs = logits.val().data() + n * V;
        double mx = xs[0];
        for (int64_t i = 1; i < V; ++i) mx = std::max(mx, xs[i]);
        double sum = 0.0;
        for (int64_t i = 0; i < V; ++i) sum += std::exp(xs[i] - mx);
        out[n] = std::log(sum) + mx - xs[targets[static_cast<size_t>(n)]];
    }
    auto tgt = std::make_shared<std::vector<int>>(targets);
    return make_op(std::move(out), {logits}, [N, V, tgt](Node& nd) {
        if (!wants(nd, 0)) return;
        Tensor& g = nd.parents[0]->grad_ref();
        const Tensor& x = nd.parents[0]->value;
        for (int64_t n = 0; n < N; ++n) {
            const double* xs = x.data() + n * V;
            double mx = xs[0];
            for (int64_t i = 1; i < V; ++i) mx = std::max(mx, xs[i]);
            double sum = 0.0;
            for (int64_t i = 0; i < V; ++i) sum += std::exp(xs[i] - mx);
            const double dl = nd.grad[n];
            double* gx = g.data() + n * V;
            for (int64_t i = 0; i < V; ++i) {
                const double p = std::exp(xs[i] - mx) / sum;
                gx[i] += dl * (p - (i == (*tgt)[static_cast<size_t>(n)] ? 1.0 : 0.0));
            }
        }
    });
}

Var bce_logits(const Var& z, double target, double clip) {
    check(target == 0.0 || target == 1.0, "bce_logits: target must be 0 or 1");
    check_finite(z.val(), "bce_logits input");
    Tensor out(z.val().shape());
    const double* pz = z.val().data();
    for (int64_t i = 0; i < out.numel(); ++i) {
        const double zc = std::clamp(pz[i], -clip, clip);
        // softplus(zc) - zc*target, computed stably
        const double sp = std::max(zc, 0.0) + std::log1p(std::exp(-std::fabs(zc)));
        out[i] = sp - zc * target;
    }
    return make_op(std::move(out), {z}, [target, clip](Node& nd) {
        if (!wants(nd, 0)) return;
        Tensor& g = nd.parents[0]->grad_ref();
        const Tensor& zv = nd.parents[0]->value;
        for (int64_t i = 0; i < g.numel(); ++i) {
            if (std::fabs(zv[i]) > clip) continue;  // clipped region: zero slope
            const double s = 1.0 / (1.0 + std::exp(-zv[i]));
            g[i] += (s - target) * nd.grad[i];
        }
    });
}

Var glimpse(const Var& feat, const Var& alpha) {
    check(feat.val().ndim() == 4 && alpha.val().ndim() == 2, "glimpse: expects NCHW and [N,L]");
    const int64_t N = feat.val().size(0), C = feat.val().size(1),
                  L = feat.val().size(2) * feat.val().size(3);
    check(alpha.val().size(0) == N && alpha.val().size(1) == L, "glimpse: alpha shape mismatch");
    Tensor out({N, C});
    const double* pf = feat.val().data();
    const double* pa = alpha.val().data();
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double* fs = pf + (n * C + c) * L;
            const double* as = pa + n * L;
            double s = 0.0;
            for (int64_t l = 0; l < L; ++l) s += as[l] * fs[l];
            out.at(n, c) = s;
        }
    return make_op(std::move(out), {feat, alpha}, [N, C, L](Node& nd) {
        const Tensor& fv = nd.parents[0]->value;
        const Tensor& av = nd.parents[1]->value;
        if (wants(nd, 0)) {
            Tensor& gf = nd.parents[0]->grad_ref();
            for (int64_t n = 0; n < N; ++n)
                for (int64_t c = 0; c < C; ++c) {
                    const double dg = nd.grad[n * C + c];
                    const double* as = av.data() + n * L;
                    double* dst = gf.data() + (n * C + c) * L;
                    for (int64_t l = 0; l < L; ++l) dst[l] += dg * as[l];
                }
        }
        if (wants(nd, 1)) {
            Tensor& ga = nd.parents[1]->grad_ref();
            for (int64_t n = 0; n < N; ++n) {
                double* dst = ga.data() + n * L;
                for (int64_t c = 0; c < C; ++c) {
                    const double dg = nd.grad[n * C + c];
                    const double* fs = fv.data() + (n * C + c) * L;
                    for (int64_t l = 0; l < L; ++l) dst[l] += dg * fs[l];
                }
            }
        }
    });
}

Var sum_all(const Var& x) {
    double s = 0.0;
    for (const double v : x.val()) s += v;
    return make_op(Tensor::scalar(s), {x}, [](Node& nd) {
        if (!wants(nd, 0)) return;
        Tensor& g = nd.parents[0]->grad_ref();
        const double dl = nd.grad[0];
        for (int64_t i = 0; i < g.numel(); ++i) g[i] += dl;
    });
}

Var mean_all(const Var& x) {
    const int64_t n = x.val().numel();
    check(n > 0, "mean_all: empty tensor");
    double s = 0.0;
    for (const double v : x.val()) s += v;
    return make_op(Tensor::scalar(s / static_cast<double>(n)), {x}, [n](Node& nd) {
        if (!wants(nd, 0)) return;
        Tensor& g = nd.parents[0]->grad_ref();
        const double dl = nd.grad[0] / static_cast<double>(n);
        for (int64_t i = 0; i < g.numel(); ++i) g[i] += dl;
    });
}

Var mean_per_sample(const Var& x) {
    check(x.val().ndim() >= 1, "mean_per_sample: needs batch dim");
    const int64_t N = x.val().size(0);
    const int64_t m = N > 0 ? x.val().numel() / N : 0;
    Tensor out({N});
    for (int64_t n = 0; n < N; ++n) {
        double s = 0.0;
        for (int64_t i = 0; i < m; ++i) s += x.val()[n * m + i];
        out[n] = s / static_cast<double>(m);
    }
    return make_op(std::move(out), {x}, [N, m](Node& nd) {
        if (!wants(nd, 0)) return;
        Tensor& g = nd.parents[0]->grad_ref();
        for (int64_t n = 0; n < N; ++n) {
            const double dl = nd.grad[n] / static_cast<double>(m);
            for (int64_t i = 0; i < m; ++i) g[n * m + i] += dl;
        }
    });
}

}  // namespace glyphsynth::nn
