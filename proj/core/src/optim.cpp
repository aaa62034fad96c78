#include "koopman/optim.hpp"

#include <cmath>
#include <string>

#include "koopman/errors.hpp"

namespace koopman {

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size())
        throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                             std::to_string(grads.size()) + " gradients, " + std::to_string(state.m.size()) +
                             " moments");
    const AdamOptions& o = state.options;
    ++state.step;
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = o.beta1 * state.m[i] + (1.0 - o.beta1) * g;
        state.v[i] = o.beta2 * state.v[i] + (1.0 - o.beta2) * g * g;
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        params[i] -= o.learning_rate * mhat / (std::sqrt(vhat) + o.epsilon);
    }
}

}  // namespace koopman
