#include "condseg/loss.hpp"

#include <cmath>

#include "condseg/error.hpp"

namespace condseg {

namespace {

struct PixelLoss {
    double loss;
    double a;  // prefactor of (delta_tj - p_j) in dFL/dz_j, or 0 when unused
};

// Per-pixel focal term from the log-probability of the target class.
// u = p_t; FL = -(1-u)^g * log(u);
// dFL/dz_j = [g*u*(1-u)^(g-1)*log(u) - (1-u)^g] * (delta_tj - p_j).
inline PixelLoss focal_terms(double logp_t, double gamma, bool want_grad) {
    const double u = std::exp(logp_t);
    const double om = 1.0 - u;
    if (om <= 1e-12) return {0.0, 0.0};  // perfectly confident: loss and gradient vanish
    if (gamma == 0.0) return {-logp_t, want_grad ? -1.0 : 0.0};
    const double pow_om = std::pow(om, gamma);
    const double loss = -pow_om * logp_t;
    double a = 0.0;
    if (want_grad) a = gamma * u * (pow_om / om) * logp_t - pow_om;
    return {loss, a};
}

double focal_impl(const Tensor& logits, const std::vector<uint8_t>& targets, double gamma,
                  Tensor* dlogits) {
    if (logits.ndim() != 4) throw ShapeError("focal_loss: expected logits [N,C,H,W]");
    if (gamma < 0.0) throw InputError("focal_loss: gamma must be >= 0");
    const int n = logits.dim(0), c = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
    const long hw = static_cast<long>(h) * w;
    const long total = static_cast<long>(n) * hw;
    if (static_cast<long>(targets.size()) != total)
        throw ShapeError("focal_loss: target count does not match logits");

    if (dlogits) {
        *dlogits = Tensor(logits.dims());
    }

    const double inv_total = 1.0 / static_cast<double>(total);
    double loss_sum = 0.0;
    std::vector<double> logp(static_cast<size_t>(c));
    for (int i = 0; i < n; ++i) {
        const float* base = logits.data() + logits.idx4(i, 0, 0, 0);
        float* gbase = dlogits ? dlogits->data() + dlogits->idx4(i, 0, 0, 0) : nullptr;
        for (long p = 0; p < hw; ++p) {
            const uint8_t t = targets[static_cast<size_t>(i) * hw + p];
            if (t >= c) throw InputError("focal_loss: target class outside [0, C)");
            // stable log-softmax over the channel axis
            double m = base[p];
            for (int ch = 1; ch < c; ++ch) m = std::max(m, static_cast<double>(base[static_cast<long>(ch) * hw + p]));
            double se = 0.0;
            for (int ch = 0; ch < c; ++ch) {
                const double e = base[static_cast<long>(ch) * hw + p] - m;
                logp[static_cast<size_t>(ch)] = e;
                se += std::exp(e);
            }
            const double lse = std::log(se);
            const PixelLoss pl = focal_terms(logp[t] - lse, gamma, dlogits != nullptr);
            loss_sum += pl.loss;
            if (gbase) {
                for (int ch = 0; ch < c; ++ch) {
                    const double pj = std::exp(logp[static_cast<size_t>(ch)] - lse);
                    const double delta = (ch == t) ? 1.0 : 0.0;
                    gbase[static_cast<long>(ch) * hw + p] =
                        static_cast<float>(pl.a * (delta - pj) * inv_total);
                }
            }
        }
    }
    return loss_sum * inv_total;
}

}  // namespace

double focal_loss(const Tensor& logits, const std::vector<uint8_t>& targets, double gamma) {
    return focal_impl(logits, targets, gamma, nullptr);
}

double focal_loss_with_grad(const Tensor& logits, const std::vector<uint8_t>& targets, double gamma,
                            Tensor& dlogits) {
    return focal_impl(logits, targets, gamma, &dlogits);
}

}  // namespace condseg
