#include "condseg/layers.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstring>

#include "condseg/error.hpp"

namespace condseg {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

void init_param(Param& p, uint64_t model_seed) {
    Rng rng(hash_u64(model_seed, p.name));
    switch (p.init) {
        case InitKind::zeros:
            p.value.zero();
            break;
        case InitKind::ones:
            p.value.fill(1.0f);
            break;
        case InitKind::he_normal: {
            const double std = std::sqrt(2.0 / std::max(1, p.fan_in));
            for (long i = 0; i < p.value.numel(); ++i)
                p.value[i] = static_cast<float>(rng.normal(0.0, std));
            break;
        }
    }
    p.grad.zero();
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

Linear::Linear(int in, int out) : in_(in), out_(out) {
    w.value = Tensor({out, in});
    w.grad = Tensor({out, in});
    w.init = InitKind::he_normal;
    w.fan_in = in;
    b.value = Tensor({out});
    b.grad = Tensor({out});
    b.init = InitKind::zeros;
}

Tensor Linear::forward(const Tensor& x, bool train) {
    if (x.ndim() != 2 || x.dim(1) != in_)
        throw ShapeError("Linear: expected [N," + std::to_string(in_) + "], got " + x.shape_string());
    const int n = x.dim(0);
    Tensor y({n, out_});
    CMapMat xm(x.data(), n, in_);
    CMapMat wm(w.value.data(), out_, in_);
    MapMat ym(y.data(), n, out_);
    ym.noalias() = xm * wm.transpose();
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < out_; ++o) y.at2(i, o) += b.value[o];
    if (train) x_ = x;
    return y;
}

Tensor Linear::backward(const Tensor& gy) {
    const int n = x_.dim(0);
    if (gy.ndim() != 2 || gy.dim(0) != n || gy.dim(1) != out_)
        throw ShapeError("Linear backward: gradient shape mismatch");
    CMapMat gym(gy.data(), n, out_);
    CMapMat xm(x_.data(), n, in_);
    MapMat gwm(w.grad.data(), out_, in_);
    gwm.noalias() += gym.transpose() * xm;
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < out_; ++o) b.grad[o] += gy.at2(i, o);
    Tensor gx({n, in_});
    CMapMat wm(w.value.data(), out_, in_);
    MapMat gxm(gx.data(), n, in_);
    gxm.noalias() = gym * wm;
    return gx;
}

void Linear::collect(const std::string& prefix, ParamRefs& out) {
    w.name = prefix + ".weight";
    b.name = prefix + ".bias";
    out.push_back(&w);
    out.push_back(&b);
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(int in_ch, int out_ch, int k, int pad) : in_(in_ch), out_(out_ch), k_(k), pad_(pad) {
    w.value = Tensor({out_ch, in_ch, k, k});
    w.grad = Tensor({out_ch, in_ch, k, k});
    w.init = InitKind::he_normal;
    w.fan_in = in_ch * k * k;
    b.value = Tensor({out_ch});
    b.grad = Tensor({out_ch});
    b.init = InitKind::zeros;
}

// col is [in*k*k, H*W] row-major; row (c, ky, kx) holds the shifted image row
// so the whole fill is memcpy plus zeroed borders.
void Conv2d::im2col(const float* x, int h, int w, float* col) const {
    const long hw = static_cast<long>(h) * w;
    long row = 0;
    for (int c = 0; c < in_; ++c) {
        const float* xc = x + static_cast<long>(c) * hw;
        for (int ky = 0; ky < k_; ++ky) {
            for (int kx = 0; kx < k_; ++kx, ++row) {
                float* dst = col + row * hw;
                const int dy = ky - pad_;
                const int dx = kx - pad_;
                for (int y = 0; y < h; ++y) {
                    float* drow = dst + static_cast<long>(y) * w;
                    const int sy = y + dy;
                    if (sy < 0 || sy >= h) {
                        std::memset(drow, 0, sizeof(float) * static_cast<size_t>(w));
                        continue;
                    }
                    const float* srow = xc + static_cast<long>(sy) * w;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(w, w - dx);
                    if (x0 > 0) std::memset(drow, 0, sizeof(float) * static_cast<size_t>(x0));
                    if (x1 > x0)
                        std::memcpy(drow + x0, srow + x0 + dx, sizeof(float) * static_cast<size_t>(x1 - x0));
                    if (x1 < w) std::memset(drow + x1, 0, sizeof(float) * static_cast<size_t>(w - x1));
                }
            }
        }
    }
}

void Conv2d::col2im_add(const float* col, int h, int w, float* gx) const {
    const long hw = static_cast<long>(h) * w;
    long row = 0;
    for (int c = 0; c < in_; ++c) {
        float* xc = gx + static_cast<long>(c) * hw;
        for (int ky = 0; ky < k_; ++ky) {
            for (int kx = 0; kx < k_; ++kx, ++row) {
                const float* src = col + row * hw;
                const int dy = ky - pad_;
                const int dx = kx - pad_;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + dy;
                    if (sy < 0 || sy >= h) continue;
                    const float* srow = src + static_cast<long>(y) * w;
                    float* drow = xc + static_cast<long>(sy) * w;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(w, w - dx);
                    for (int x = x0; x < x1; ++x) drow[x + dx] += srow[x];
                }
            }
        }
    }
}

Tensor Conv2d::forward(const Tensor& x, bool train) {
    if (x.ndim() != 4 || x.dim(1) != in_)
        throw ShapeError("Conv2d: expected [N," + std::to_string(in_) + ",H,W], got " + x.shape_string());
    const int n = x.dim(0), ih = x.dim(2), iw = x.dim(3);
    const long hw = static_cast<long>(ih) * iw;
    const int kk = in_ * k_ * k_;
    Tensor y({n, out_, ih, iw});

    col_.resize(static_cast<size_t>(kk) * hw);
    CMapMat wm(w.value.data(), out_, kk);
    for (int i = 0; i < n; ++i) {
        im2col(x.data() + x.idx4(i, 0, 0, 0), ih, iw, col_.data());
        CMapMat cm(col_.data(), kk, hw);
        MapMat ym(y.data() + y.idx4(i, 0, 0, 0), out_, hw);
        ym.noalias() = wm * cm;
        for (int o = 0; o < out_; ++o) {
            float* yo = y.data() + y.idx4(i, o, 0, 0);
            const float bo = b.value[o];
            for (long p = 0; p < hw; ++p) yo[p] += bo;
        }
    }
    if (train) x_ = x;
    return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
    const int n = x_.dim(0), h = x_.dim(2), w_sp = x_.dim(3);
    if (gy.ndim() != 4 || gy.dim(0) != n || gy.dim(1) != out_ || gy.dim(2) != h || gy.dim(3) != w_sp)
        throw ShapeError("Conv2d backward: gradient shape mismatch");
    const long hw = static_cast<long>(h) * w_sp;
    const int kk = in_ * k_ * k_;

    Tensor gx({n, in_, h, w_sp});
    col_.resize(static_cast<size_t>(kk) * hw);
    std::vector<float> gcol(static_cast<size_t>(kk) * hw);

    CMapMat wm(w.value.data(), out_, kk);
    MapMat gwm(w.grad.data(), out_, kk);
    for (int i = 0; i < n; ++i) {
        im2col(x_.data() + x_.idx4(i, 0, 0, 0), h, w_sp, col_.data());
        CMapMat cm(col_.data(), kk, hw);
        CMapMat gym(gy.data() + gy.idx4(i, 0, 0, 0), out_, hw);
        gwm.noalias() += gym * cm.transpose();
        for (int o = 0; o < out_; ++o) {
            const float* go = gy.data() + gy.idx4(i, o, 0, 0);
            double s = 0.0;
            for (long p = 0; p < hw; ++p) s += go[p];
            b.grad[o] += static_cast<float>(s);
        }
        MapMat gcm(gcol.data(), kk, hw);
        gcm.noalias() = wm.transpose() * gym;
        col2im_add(gcol.data(), h, w_sp, gx.data() + gx.idx4(i, 0, 0, 0));
    }
    return gx;
}

void Conv2d::collect(const std::string& prefix, ParamRefs& out) {
    w.name = prefix + ".weight";
    b.name = prefix + ".bias";
    out.push_back(&w);
    out.push_back(&b);
}

// ---------------------------------------------------------------------------
// BatchNorm2d
// ---------------------------------------------------------------------------

BatchNorm2d::BatchNorm2d(int channels, double momentum, double eps)
    : c_(channels), momentum_(momentum), eps_(eps) {
    gamma.value = Tensor({channels});
    gamma.grad = Tensor({channels});
    gamma.init = InitKind::ones;
    beta.value = Tensor({channels});
    beta.grad = Tensor({channels});
    beta.init = InitKind::zeros;
    running_mean.value = Tensor({channels});
    running_var.value = Tensor::full({channels}, 1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
    if (x.ndim() != 4 || x.dim(1) != c_) throw ShapeError("BatchNorm2d: channel mismatch");
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const long hw = static_cast<long>(h) * w;
    const long m = static_cast<long>(n) * hw;
    Tensor y({n, c_, h, w});

    if (train) {
        xhat_ = Tensor({n, c_, h, w});
        invstd_.assign(static_cast<size_t>(c_), 0.0);
        cached_ = true;
        for (int c = 0; c < c_; ++c) {
            double mean = 0.0;
            for (int i = 0; i < n; ++i) {
                const float* xc = x.data() + x.idx4(i, c, 0, 0);
                for (long p = 0; p < hw; ++p) mean += xc[p];
            }
            mean /= static_cast<double>(m);
            double var = 0.0;
            for (int i = 0; i < n; ++i) {
                const float* xc = x.data() + x.idx4(i, c, 0, 0);
                for (long p = 0; p < hw; ++p) {
                    const double d = xc[p] - mean;
                    var += d * d;
                }
            }
            var /= static_cast<double>(m);  // population variance
            const double inv = 1.0 / std::sqrt(var + eps_);
            invstd_[static_cast<size_t>(c)] = inv;
            const float g = gamma.value[c], bt = beta.value[c];
            for (int i = 0; i < n; ++i) {
                const float* xc = x.data() + x.idx4(i, c, 0, 0);
                float* xh = xhat_.data() + xhat_.idx4(i, c, 0, 0);
                float* yc = y.data() + y.idx4(i, c, 0, 0);
                for (long p = 0; p < hw; ++p) {
                    const float v = static_cast<float>((xc[p] - mean) * inv);
                    xh[p] = v;
                    yc[p] = g * v + bt;
                }
            }
            running_mean.value[c] =
                static_cast<float>((1.0 - momentum_) * running_mean.value[c] + momentum_ * mean);
            running_var.value[c] =
                static_cast<float>((1.0 - momentum_) * running_var.value[c] + momentum_ * var);
        }
    } else {
        cached_ = false;
        for (int c = 0; c < c_; ++c) {
            const double inv = 1.0 / std::sqrt(static_cast<double>(running_var.value[c]) + eps_);
            const double mean = running_mean.value[c];
            const float g = gamma.value[c], bt = beta.value[c];
            for (int i = 0; i < n; ++i) {
                const float* xc = x.data() + x.idx4(i, c, 0, 0);
                float* yc = y.data() + y.idx4(i, c, 0, 0);
                for (long p = 0; p < hw; ++p)
                    yc[p] = static_cast<float>(g * ((xc[p] - mean) * inv) + bt);
            }
        }
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& gy) {
    if (!cached_) throw InputError("BatchNorm2d backward without a training-mode forward");
    const int n = xhat_.dim(0), h = xhat_.dim(2), w = xhat_.dim(3);
    const long hw = static_cast<long>(h) * w;
    const long m = static_cast<long>(n) * hw;
    Tensor gx({n, c_, h, w});

    for (int c = 0; c < c_; ++c) {
        double s1 = 0.0, s2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const float* g = gy.data() + gy.idx4(i, c, 0, 0);
            const float* xh = xhat_.data() + xhat_.idx4(i, c, 0, 0);
            for (long p = 0; p < hw; ++p) {
                s1 += g[p];
                s2 += static_cast<double>(g[p]) * xh[p];
            }
        }
        gamma.grad[c] += static_cast<float>(s2);
        beta.grad[c] += static_cast<float>(s1);
        const double scale = gamma.value[c] * invstd_[static_cast<size_t>(c)] / static_cast<double>(m);
        for (int i = 0; i < n; ++i) {
            const float* g = gy.data() + gy.idx4(i, c, 0, 0);
            const float* xh = xhat_.data() + xhat_.idx4(i, c, 0, 0);
            float* gxc = gx.data() + gx.idx4(i, c, 0, 0);
            for (long p = 0; p < hw; ++p)
                gxc[p] = static_cast<float>(scale * (static_cast<double>(m) * g[p] - s1 - xh[p] * s2));
        }
    }
    return gx;
}

void BatchNorm2d::collect(const std::string& prefix, ParamRefs& out) {
    gamma.name = prefix + ".gamma";
    beta.name = prefix + ".beta";
    out.push_back(&gamma);
    out.push_back(&beta);
}

void BatchNorm2d::collect_buffers(const std::string& prefix, BufferRefs& out) {
    running_mean.name = prefix + ".running_mean";
    running_var.name = prefix + ".running_var";
    out.push_back(&running_mean);
    out.push_back(&running_var);
}

// ---------------------------------------------------------------------------
// ReLU / MaxPool2 / UpsampleBilinear2
// ---------------------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x, bool train) {
    Tensor y(x.dims());
    const float* xs = x.data();
    float* ys = y.data();
    for (long i = 0; i < x.numel(); ++i) ys[i] = xs[i] > 0.0f ? xs[i] : 0.0f;
    if (train) y_ = y;
    return y;
}

Tensor ReLU::backward(const Tensor& gy) {
    Tensor gx(gy.dims());
    const float* g = gy.data();
    const float* ys = y_.data();
    float* o = gx.data();
    for (long i = 0; i < gy.numel(); ++i) o[i] = ys[i] > 0.0f ? g[i] : 0.0f;
    return gx;
}

Tensor MaxPool2::forward(const Tensor& x, bool train) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % 2 != 0 || w % 2 != 0) throw ShapeError("MaxPool2: spatial dims must be even");
    const int oh = h / 2, ow = w / 2;
    Tensor y({n, c, oh, ow});
    if (train) {
        argmax_.assign(static_cast<size_t>(y.numel()), 0);
        n_ = n;
        c_ = c;
        h_ = h;
        w_ = w;
    }
    long oi = 0;
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const float* xc = x.data() + x.idx4(i, ch, 0, 0);
            float* yc = y.data() + y.idx4(i, ch, 0, 0);
            for (int yy = 0; yy < oh; ++yy)
                for (int xx = 0; xx < ow; ++xx, ++oi) {
                    const long base = static_cast<long>(2 * yy) * w + 2 * xx;
                    long best = base;
                    float bv = xc[base];
                    const long cands[3] = {base + 1, base + w, base + w + 1};
                    for (long cand : cands)
                        if (xc[cand] > bv) {
                            bv = xc[cand];
                            best = cand;
                        }
                    yc[static_cast<long>(yy) * ow + xx] = bv;
                    if (train) argmax_[static_cast<size_t>(oi)] = static_cast<int>(best);
                }
        }
    return y;
}

Tensor MaxPool2::backward(const Tensor& gy) {
    Tensor gx({n_, c_, h_, w_});
    const int oh = h_ / 2, ow = w_ / 2;
    long oi = 0;
    for (int i = 0; i < n_; ++i)
        for (int ch = 0; ch < c_; ++ch) {
            float* gxc = gx.data() + gx.idx4(i, ch, 0, 0);
            const float* gyc = gy.data() + gy.idx4(i, ch, 0, 0);
            for (long p = 0; p < static_cast<long>(oh) * ow; ++p, ++oi)
                gxc[argmax_[static_cast<size_t>(oi)]] += gyc[p];
        }
    return gx;
}

namespace {
// Half-pixel source mapping for 2x upsampling with edge clamp.
inline void up2_coords(int i, int limit, int& i0, int& i1, float& w1) {
    const float u = (i + 0.5f) * 0.5f - 0.5f;
    const float fl = std::floor(u);
    i0 = static_cast<int>(fl);
    i1 = i0 + 1;
    w1 = u - fl;
    if (i0 < 0) i0 = 0;
    if (i1 > limit - 1) i1 = limit - 1;
}
}  // namespace

Tensor UpsampleBilinear2::forward(const Tensor& x, bool train) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (train) {
        n_ = n;
        c_ = c;
        h_ = h;
        w_ = w;
    }
    const int oh = 2 * h, ow = 2 * w;
    Tensor y({n, c, oh, ow});
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const float* xc = x.data() + x.idx4(i, ch, 0, 0);
            float* yc = y.data() + y.idx4(i, ch, 0, 0);
            for (int yy = 0; yy < oh; ++yy) {
                int y0, y1;
                float wy;
                up2_coords(yy, h, y0, y1, wy);
                for (int xx = 0; xx < ow; ++xx) {
                    int x0, x1;
                    float wx;
                    up2_coords(xx, w, x0, x1, wx);
                    const float v00 = xc[static_cast<long>(y0) * w + x0];
                    const float v01 = xc[static_cast<long>(y0) * w + x1];
                    const float v10 = xc[static_cast<long>(y1) * w + x0];
                    const float v11 = xc[static_cast<long>(y1) * w + x1];
                    yc[static_cast<long>(yy) * ow + xx] =
                        (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
                }
            }
        }
    return y;
}

Tensor UpsampleBilinear2::backward(const Tensor& gy) {
    Tensor gx({n_, c_, h_, w_});
    const int oh = 2 * h_, ow = 2 * w_;
    for (int i = 0; i < n_; ++i)
        for (int ch = 0; ch < c_; ++ch) {
            float* gxc = gx.data() + gx.idx4(i, ch, 0, 0);
            const float* gyc = gy.data() + gy.idx4(i, ch, 0, 0);
            for (int yy = 0; yy < oh; ++yy) {
                int y0, y1;
                float wy;
                up2_coords(yy, h_, y0, y1, wy);
                for (int xx = 0; xx < ow; ++xx) {
                    int x0, x1;
                    float wx;
                    up2_coords(xx, w_, x0, x1, wx);
                    const float g = gyc[static_cast<long>(yy) * ow + xx];
                    gxc[static_cast<long>(y0) * w_ + x0] += (1 - wy) * (1 - wx) * g;
                    gxc[static_cast<long>(y0) * w_ + x1] += (1 - wy) * wx * g;
                    gxc[static_cast<long>(y1) * w_ + x0] += wy * (1 - wx) * g;
                    gxc[static_cast<long>(y1) * w_ + x1] += wy * wx * g;
                }
            }
        }
    return gx;
}

// ---------------------------------------------------------------------------
// Concatenation / replication plumbing
// ---------------------------------------------------------------------------

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 4 || b.ndim() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) ||
        a.dim(3) != b.dim(3))
        throw ShapeError("concat_channels: spatial/batch dims must match, got " + a.shape_string() +
                         " and " + b.shape_string());
    const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1), h = a.dim(2), w = a.dim(3);
    const long hw = static_cast<long>(h) * w;
    Tensor y({n, ca + cb, h, w});
    for (int i = 0; i < n; ++i) {
        std::memcpy(y.data() + y.idx4(i, 0, 0, 0), a.data() + a.idx4(i, 0, 0, 0),
                    sizeof(float) * static_cast<size_t>(ca * hw));
        std::memcpy(y.data() + y.idx4(i, ca, 0, 0), b.data() + b.idx4(i, 0, 0, 0),
                    sizeof(float) * static_cast<size_t>(cb * hw));
    }
    return y;
}

void split_channels(const Tensor& g, int channels_a, Tensor& ga, Tensor& gb) {
    const int n = g.dim(0), c = g.dim(1), h = g.dim(2), w = g.dim(3);
    const int cb = c - channels_a;
    const long hw = static_cast<long>(h) * w;
    ga = Tensor({n, channels_a, h, w});
    gb = Tensor({n, cb, h, w});
    for (int i = 0; i < n; ++i) {
        std::memcpy(ga.data() + ga.idx4(i, 0, 0, 0), g.data() + g.idx4(i, 0, 0, 0),
                    sizeof(float) * static_cast<size_t>(channels_a * hw));
        std::memcpy(gb.data() + gb.idx4(i, 0, 0, 0), g.data() + g.idx4(i, channels_a, 0, 0),
                    sizeof(float) * static_cast<size_t>(cb * hw));
    }
    return;
}

Tensor replicate_spatial(const Tensor& z, int h, int w) {
    if (z.ndim() != 2) throw ShapeError("replicate_spatial: expected [N,D]");
    if (h < 1 || w < 1) throw ShapeError("replicate_spatial: h, w must be >= 1");
    const int n = z.dim(0), d = z.dim(1);
    Tensor y({n, d, h, w});
    const long hw = static_cast<long>(h) * w;
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < d; ++c) {
            float* yc = y.data() + y.idx4(i, c, 0, 0);
            const float v = z.at2(i, c);
            for (long p = 0; p < hw; ++p) yc[p] = v;
        }
    return y;
}

Tensor replicate_spatial_backward(const Tensor& gy) {
    const int n = gy.dim(0), d = gy.dim(1);
    const long hw = static_cast<long>(gy.dim(2)) * gy.dim(3);
    Tensor gz({n, d});
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < d; ++c) {
            const float* g = gy.data() + gy.idx4(i, c, 0, 0);
            double s = 0.0;
            for (long p = 0; p < hw; ++p) s += g[p];
            gz.at2(i, c) = static_cast<float>(s);
        }
    return gz;
}

}  // namespace condseg
