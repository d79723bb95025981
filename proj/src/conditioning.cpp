#include "condseg/conditioning.hpp"

#include <cstring>

#include "condseg/error.hpp"

namespace condseg {

namespace {
ConditioningVector distribution_from_counts(const long counts[kNumLabels], long total) {
    ConditioningVector z;
    z.rv = 100.0 * static_cast<double>(counts[1]) / static_cast<double>(total);
    z.myo = 100.0 * static_cast<double>(counts[2]) / static_cast<double>(total);
    z.lv = 100.0 * static_cast<double>(counts[3]) / static_cast<double>(total);
    return z;
}
}  // namespace

ConditioningVector compute_label_distribution(const Mask2D& mask) {
    if (mask.v.empty()) throw InputError("compute_label_distribution: empty mask");
    long counts[kNumLabels] = {0, 0, 0, 0};
    for (uint8_t l : mask.v) {
        if (l >= kNumLabels) throw CorruptLabelsError("mask label outside {0,1,2,3}");
        ++counts[l];
    }
    return distribution_from_counts(counts, static_cast<long>(mask.v.size()));
}

ConditioningVector compute_label_distribution(const MaskVolume3D& labels) {
    if (labels.v.empty()) throw InputError("compute_label_distribution: empty volume");
    long counts[kNumLabels] = {0, 0, 0, 0};
    for (uint8_t l : labels.v) {
        if (l >= kNumLabels) throw CorruptLabelsError("mask label outside {0,1,2,3}");
        ++counts[l];
    }
    return distribution_from_counts(counts, static_cast<long>(labels.v.size()));
}

// ---------------------------------------------------------------------------
// EmbeddingMlp
// ---------------------------------------------------------------------------

EmbeddingMlp::EmbeddingMlp() {
    const auto& ws = EmbeddingSpec::kMlpWidths;
    for (size_t i = 0; i + 1 < ws.size(); ++i) layers.emplace_back(ws[i], ws[i + 1]);
    acts.resize(layers.size() - 1);
}

Tensor EmbeddingMlp::forward(const Tensor& z, bool train) {
    Tensor h = layers[0].forward(z, train);
    for (size_t i = 1; i < layers.size(); ++i) {
        h = acts[i - 1].forward(h, train);
        h = layers[i].forward(h, train);
    }
    return h;
}

Tensor EmbeddingMlp::backward(const Tensor& gy) {
    Tensor g = layers.back().backward(gy);
    for (size_t i = layers.size() - 1; i-- > 0;) {
        g = acts[i].backward(g);
        g = layers[i].backward(g);
    }
    return g;
}

void EmbeddingMlp::collect(const std::string& prefix, ParamRefs& out) {
    for (size_t i = 0; i < layers.size(); ++i)
        layers[i].collect(prefix + ".fc" + std::to_string(i), out);
}

Tensor embed(const Tensor& z, const EmbeddingSpec& spec, EmbeddingMlp* mlp, bool train) {
    if (z.ndim() != 2 || z.dim(1) != 3) throw ShapeError("embed: expected z of shape [N,3]");
    if (spec.kind == EmbeddingKind::identity) return z;
    if (mlp == nullptr) throw ConfigError("embed: mlp weights required for kind=mlp");
    return mlp->forward(z, train);
}

// ---------------------------------------------------------------------------
// FiLM
// ---------------------------------------------------------------------------

FilmGenerator::FilmGenerator(int channels, int hidden)
    : fc0(3, hidden), fc1(hidden, 2 * channels), channels_(channels) {
    if (channels < 1) throw ConfigError("FilmGenerator: channel count must be >= 1");
    // Zero-initialized final layer: gamma == 1, beta == 0 at initialization.
    fc1.w.init = InitKind::zeros;
    fc1.b.init = InitKind::zeros;
}

void FilmGenerator::forward(const Tensor& z, bool train, Tensor& gamma, Tensor& beta) {
    Tensor h = fc0.forward(z, train);
    h = act_.forward(h, train);
    Tensor out = fc1.forward(h, train);  // [N, 2C]
    const int n = out.dim(0);
    gamma = Tensor({n, channels_});
    beta = Tensor({n, channels_});
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < channels_; ++c) {
            gamma.at2(i, c) = 1.0f + out.at2(i, c);
            beta.at2(i, c) = out.at2(i, channels_ + c);
        }
}

Tensor FilmGenerator::backward(const Tensor& dgamma, const Tensor& dbeta) {
    const int n = dgamma.dim(0);
    Tensor dout({n, 2 * channels_});
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < channels_; ++c) {
            dout.at2(i, c) = dgamma.at2(i, c);  // d(1 + dg)/d(dg) = 1
            dout.at2(i, channels_ + c) = dbeta.at2(i, c);
        }
    Tensor g = fc1.backward(dout);
    g = act_.backward(g);
    return fc0.backward(g);
}

FilmParams FilmGenerator::generate(const ConditioningVector& z) {
    Tensor zt({1, 3});
    zt.at2(0, 0) = static_cast<float>(z.rv);
    zt.at2(0, 1) = static_cast<float>(z.myo);
    zt.at2(0, 2) = static_cast<float>(z.lv);
    Tensor gamma, beta;
    forward(zt, false, gamma, beta);
    FilmParams p;
    p.gamma.assign(gamma.data(), gamma.data() + channels_);
    p.beta.assign(beta.data(), beta.data() + channels_);
    return p;
}

void FilmGenerator::collect(const std::string& prefix, ParamRefs& out) {
    fc0.collect(prefix + ".fc0", out);
    fc1.collect(prefix + ".fc1", out);
}

Tensor film_apply(const Tensor& features, const FilmParams& p) {
    if (features.ndim() != 3) throw ShapeError("film_apply: expected [C,H,W]");
    const int c = features.dim(0);
    if (static_cast<int>(p.gamma.size()) != c || static_cast<int>(p.beta.size()) != c)
        throw ShapeError("film_apply: gamma/beta length " + std::to_string(p.gamma.size()) +
                         " does not match channel count " + std::to_string(c));
    const long hw = static_cast<long>(features.dim(1)) * features.dim(2);
    Tensor y(features.dims());
    for (int ch = 0; ch < c; ++ch) {
        const float g = p.gamma[static_cast<size_t>(ch)];
        const float b = p.beta[static_cast<size_t>(ch)];
        const float* f = features.data() + static_cast<long>(ch) * hw;
        float* o = y.data() + static_cast<long>(ch) * hw;
        for (long i = 0; i < hw; ++i) o[i] = g * f[i] + b;
    }
    return y;
}

FilmLayer::FilmLayer(int channels) : generator(channels) {}

Tensor FilmLayer::forward(const Tensor& x, const Tensor& z, bool train) {
    const int n = x.dim(0), c = x.dim(1);
    if (c != generator.channels()) throw ShapeError("FilmLayer: channel mismatch");
    Tensor gamma, beta;
    generator.forward(z, train, gamma, beta);
    const long hw = static_cast<long>(x.dim(2)) * x.dim(3);
    Tensor y(x.dims());
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const float g = gamma.at2(i, ch), b = beta.at2(i, ch);
            const float* xs = x.data() + x.idx4(i, ch, 0, 0);
            float* ys = y.data() + y.idx4(i, ch, 0, 0);
            for (long p = 0; p < hw; ++p) ys[p] = g * xs[p] + b;
        }
    if (train) {
        x_ = x;
        gamma_ = gamma;
        beta_ = beta;
    }
    return y;
}

Tensor FilmLayer::backward(const Tensor& gy) {
    const int n = x_.dim(0), c = x_.dim(1);
    const long hw = static_cast<long>(x_.dim(2)) * x_.dim(3);
    Tensor gx(x_.dims());
    Tensor dgamma({n, c}), dbeta({n, c});
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const float g = gamma_.at2(i, ch);
            const float* gys = gy.data() + gy.idx4(i, ch, 0, 0);
            const float* xs = x_.data() + x_.idx4(i, ch, 0, 0);
            float* gxs = gx.data() + gx.idx4(i, ch, 0, 0);
            double sg = 0.0, sb = 0.0;
            for (long p = 0; p < hw; ++p) {
                gxs[p] = g * gys[p];
                sg += static_cast<double>(gys[p]) * xs[p];
                sb += gys[p];
            }
            dgamma.at2(i, ch) = static_cast<float>(sg);
            dbeta.at2(i, ch) = static_cast<float>(sb);
        }
    generator.backward(dgamma, dbeta);  // z is data, not a parameter; dz discarded
    return gx;
}

void FilmLayer::collect(const std::string& prefix, ParamRefs& out) {
    generator.collect(prefix, out);
}

// ---------------------------------------------------------------------------
// Single-sample functional forms
// ---------------------------------------------------------------------------

Tensor spatial_replicate(const std::array<double, 3>& z, int h, int w) {
    if (h < 1 || w < 1) throw ShapeError("spatial_replicate: h, w must be >= 1");
    Tensor y({3, h, w});
    const long hw = static_cast<long>(h) * w;
    for (int c = 0; c < 3; ++c) {
        float* yc = y.data() + static_cast<long>(c) * hw;
        const float v = static_cast<float>(z[static_cast<size_t>(c)]);
        for (long p = 0; p < hw; ++p) yc[p] = v;
    }
    return y;
}

Tensor concat_fuse(const Tensor& features, const Tensor& z_map) {
    if (features.ndim() != 3 || z_map.ndim() != 3)
        throw ShapeError("concat_fuse: expected [C,h,w] inputs");
    if (features.dim(1) != z_map.dim(1) || features.dim(2) != z_map.dim(2))
        throw ShapeError("concat_fuse: spatial dims mismatch: " + features.shape_string() + " vs " +
                         z_map.shape_string());
    Tensor y({features.dim(0) + z_map.dim(0), features.dim(1), features.dim(2)});
    std::memcpy(y.data(), features.data(), sizeof(float) * static_cast<size_t>(features.numel()));
    std::memcpy(y.data() + features.numel(), z_map.data(),
                sizeof(float) * static_cast<size_t>(z_map.numel()));
    return y;
}

}  // namespace condseg
