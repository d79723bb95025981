#pragma once

#include <vector>

#include "condseg/layers.hpp"

namespace condseg {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(ParamRefs params, AdamConfig cfg);

    void step();
    void zero_grad();

private:
    ParamRefs params_;
    AdamConfig cfg_;
    std::vector<Tensor> m_, v_;
    long t_ = 0;
};

}  // namespace condseg
