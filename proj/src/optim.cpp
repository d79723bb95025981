#include "condseg/optim.hpp"

#include <cmath>

namespace condseg {

Adam::Adam(ParamRefs params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Param* p : params_) {
        m_.emplace_back(p->value.dims());
        v_.emplace_back(p->value.dims());
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t k = 0; k < params_.size(); ++k) {
        Param& p = *params_[k];
        float* m = m_[k].data();
        float* v = v_[k].data();
        float* val = p.value.data();
        const float* g = p.grad.data();
        const long n = p.value.numel();
        for (long i = 0; i < n; ++i) {
            const double gi = g[i];
            const double mi = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
            const double vi = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            val[i] = static_cast<float>(val[i] - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
        }
    }
}

void Adam::zero_grad() {
    for (Param* p : params_) p->grad.zero();
}

}  // namespace condseg
