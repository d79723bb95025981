#pragma once

#include <cstdint>
#include <vector>

#include "condseg/tensor.hpp"

namespace condseg {

// Multi-class focal loss, FL = -(1 - p_t)^gamma * log(p_t), averaged over all
// pixels of the batch. p_t is the softmax probability of the target class;
// log terms are evaluated through a log-softmax. gamma = 0 reduces to plain
// cross-entropy. No per-class alpha weighting.
//
// logits: [N, C, H, W]; targets: N*H*W class indices in [0, C).
double focal_loss(const Tensor& logits, const std::vector<uint8_t>& targets, double gamma = 0.5);

// Same evaluation, also producing d(loss)/d(logits).
double focal_loss_with_grad(const Tensor& logits, const std::vector<uint8_t>& targets, double gamma,
                            Tensor& dlogits);

}  // namespace condseg
