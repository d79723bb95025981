#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "condseg/error.hpp"

namespace condseg {

// Dense row-major float tensor. Dimension order for feature maps is
// [N, C, H, W]; vectors use [N, D]. Hot loops in the layers operate on raw
// pointers; this class only owns storage and shape.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
        data_.assign(static_cast<size_t>(count(dims_)), 0.0f);
    }
    Tensor(std::initializer_list<int> dims) : Tensor(std::vector<int>(dims)) {}

    static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }

    static Tensor full(std::vector<int> dims, float v) {
        Tensor t(std::move(dims));
        t.fill(v);
        return t;
    }

    int ndim() const { return static_cast<int>(dims_.size()); }
    int dim(int i) const { return dims_[static_cast<size_t>(i)]; }
    const std::vector<int>& dims() const { return dims_; }
    long numel() const { return static_cast<long>(data_.size()); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& operator[](long i) { return data_[static_cast<size_t>(i)]; }
    float operator[](long i) const { return data_[static_cast<size_t>(i)]; }

    // [N, C, H, W] addressing
    long idx4(int n, int c, int h, int w) const {
        return ((static_cast<long>(n) * dims_[1] + c) * dims_[2] + h) * dims_[3] + w;
    }
    float& at4(int n, int c, int h, int w) { return data_[static_cast<size_t>(idx4(n, c, h, w))]; }
    float at4(int n, int c, int h, int w) const { return data_[static_cast<size_t>(idx4(n, c, h, w))]; }

    // [N, D] addressing
    float& at2(int n, int d) { return data_[static_cast<size_t>(static_cast<long>(n) * dims_[1] + d)]; }
    float at2(int n, int d) const { return data_[static_cast<size_t>(static_cast<long>(n) * dims_[1] + d)]; }

    bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }

    void fill(float v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(0.0f); }

    std::string shape_string() const {
        std::string s = "[";
        for (size_t i = 0; i < dims_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(dims_[i]);
        }
        return s + "]";
    }

    static long count(const std::vector<int>& dims) {
        long n = dims.empty() ? 0 : 1;
        for (int d : dims) {
            if (d < 0) throw ShapeError("negative tensor dimension");
            n *= d;
        }
        return n;
    }

private:
    std::vector<int> dims_;
    std::vector<float> data_;
};

}  // namespace condseg
