#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "condseg/layers.hpp"
#include "condseg/types.hpp"

namespace condseg {

// z_k = 100 * count(label == k) / count(all pixels) for the three foreground
// classes; the background class contributes to the denominator only.
ConditioningVector compute_label_distribution(const Mask2D& mask);
ConditioningVector compute_label_distribution(const MaskVolume3D& labels);

enum class EmbeddingKind { identity, mlp };

struct EmbeddingSpec {
    EmbeddingKind kind = EmbeddingKind::identity;
    // Fixed fully-connected widths used when kind == mlp.
    static constexpr std::array<int, 5> kMlpWidths{3, 6, 12, 6, 3};
};

// 3-6-12-6-3 fully-connected embedding, ReLU on hidden layers, linear output.
class EmbeddingMlp {
public:
    EmbeddingMlp();

    Tensor forward(const Tensor& z, bool train);  // [N,3] -> [N,3]
    Tensor backward(const Tensor& gy);            // -> dz [N,3]

    void collect(const std::string& prefix, ParamRefs& out);

    std::vector<Linear> layers;  // 3->6, 6->12, 12->6, 6->3

private:
    std::vector<ReLU> acts;
};

// Functional embedding per spec: identity passes z through untouched; mlp
// runs the 3-6-12-6-3 network (weights owned by the caller-provided module).
Tensor embed(const Tensor& z, const EmbeddingSpec& spec, EmbeddingMlp* mlp, bool train = false);

// Per-channel affine parameters for one feature map.
struct FilmParams {
    std::vector<float> gamma;
    std::vector<float> beta;
};

// MLP 3 -> 64 -> 2C predicting (delta-gamma, beta); gamma = 1 + delta-gamma so
// a zero-initialized final layer yields the identity modulation.
class FilmGenerator {
public:
    explicit FilmGenerator(int channels, int hidden = 64);

    // z: [N,3] -> gamma/beta: [N,C]
    void forward(const Tensor& z, bool train, Tensor& gamma, Tensor& beta);
    Tensor backward(const Tensor& dgamma, const Tensor& dbeta);  // -> dz [N,3]

    FilmParams generate(const ConditioningVector& z);  // single-sample convenience

    void collect(const std::string& prefix, ParamRefs& out);

    int channels() const { return channels_; }

    Linear fc0, fc1;

private:
    int channels_;
    ReLU act_;
};

// FiLM(F_c | gamma_c, beta_c) = gamma_c * F_c + beta_c, single sample [C,H,W].
Tensor film_apply(const Tensor& features, const FilmParams& p);

// Batched FiLM site: generator plus the modulation, with full backprop.
class FilmLayer {
public:
    explicit FilmLayer(int channels);

    Tensor forward(const Tensor& x, const Tensor& z, bool train);  // x [N,C,H,W], z [N,3]
    Tensor backward(const Tensor& gy);

    void collect(const std::string& prefix, ParamRefs& out);

    FilmGenerator generator;

private:
    Tensor x_, gamma_, beta_;
};

// Single-sample functional forms mirroring the batched plumbing.
Tensor spatial_replicate(const std::array<double, 3>& z, int h, int w);  // -> [3,h,w]
Tensor concat_fuse(const Tensor& features, const Tensor& z_map);         // [C,h,w]+[D,h,w]

}  // namespace condseg
