#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace koopman {

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamOptions options;
    std::size_t step = 0;
    std::vector<double> m;
    std::vector<double> v;

    AdamState() = default;
    AdamState(std::size_t n, AdamOptions opts) : options(opts), m(n, 0.0), v(n, 0.0) {}
};

// One bias-corrected Adam update in place.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

}  // namespace koopman
