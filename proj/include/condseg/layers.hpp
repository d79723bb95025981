#pragma once

#include <string>
#include <vector>

#include "condseg/rng.hpp"
#include "condseg/tensor.hpp"

namespace condseg {

enum class InitKind { he_normal, zeros, ones };

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    InitKind init = InitKind::he_normal;
    int fan_in = 0;
};

struct Buffer {
    std::string name;
    Tensor value;
};

using ParamRefs = std::vector<Param*>;
using BufferRefs = std::vector<Buffer*>;

// Initializes a parameter from an RNG derived from (seed, param name), so a
// parameter's initial value depends only on its name and the model seed.
void init_param(Param& p, uint64_t model_seed);

// ---------------------------------------------------------------------------
// Layers. All take [N, C, H, W] feature maps (or [N, D] vectors for Linear),
// cache what backward needs during a training-mode forward, and accumulate
// parameter gradients in backward. backward returns the input gradient.
// ---------------------------------------------------------------------------

class Linear {
public:
    Linear(int in, int out);

    Tensor forward(const Tensor& x, bool train);  // x: [N, in]
    Tensor backward(const Tensor& gy);

    void collect(const std::string& prefix, ParamRefs& out);

    Param w;  // [out, in]
    Param b;  // [out]
    int in_features() const { return in_; }
    int out_features() const { return out_; }

private:
    int in_, out_;
    Tensor x_;
};

// k x k convolution, stride 1, symmetric zero padding.
class Conv2d {
public:
    Conv2d(int in_ch, int out_ch, int k, int pad);

    Tensor forward(const Tensor& x, bool train);  // x: [N, C, H, W]
    Tensor backward(const Tensor& gy);

    void collect(const std::string& prefix, ParamRefs& out);

    Param w;  // [out, in, k, k]
    Param b;  // [out]
    int in_channels() const { return in_; }
    int out_channels() const { return out_; }

private:
    int in_, out_, k_, pad_;
    Tensor x_;
    std::vector<float> col_;  // scratch: [in*k*k, H*W]

    void im2col(const float* x, int h, int w, float* col) const;
    void col2im_add(const float* col, int h, int w, float* gx) const;
};

class BatchNorm2d {
public:
    explicit BatchNorm2d(int channels, double momentum = 0.1, double eps = 1e-5);

    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& gy);

    void collect(const std::string& prefix, ParamRefs& out);
    void collect_buffers(const std::string& prefix, BufferRefs& out);

    Param gamma, beta;
    Buffer running_mean, running_var;

private:
    int c_;
    double momentum_, eps_;
    Tensor xhat_;
    std::vector<double> invstd_;
    bool cached_ = false;
};

class ReLU {
public:
    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& gy);

private:
    Tensor y_;
};

// 2x2 max pooling, stride 2. Spatial dims must be even.
class MaxPool2 {
public:
    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& gy);

private:
    std::vector<int> argmax_;
    int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
};

// Fixed 2x bilinear upsampling (half-pixel centers, edges clamped).
class UpsampleBilinear2 {
public:
    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& gy);

private:
    int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
};

// ---------------------------------------------------------------------------
// Stateless tensor plumbing shared by the fusion sites.
// ---------------------------------------------------------------------------

// Channel-wise concatenation, a's channels first.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Split a concatenated gradient back into the two channel groups.
void split_channels(const Tensor& g, int channels_a, Tensor& ga, Tensor& gb);

// [N, D] -> [N, D, h, w], every spatial position holds the same vector.
Tensor replicate_spatial(const Tensor& z, int h, int w);

// Gradient of replicate_spatial: sums over spatial positions, -> [N, D].
Tensor replicate_spatial_backward(const Tensor& gy);

}  // namespace condseg
