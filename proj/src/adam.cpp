#include "sketchgnn/adam.hpp"

#include "sketchgnn/errors.hpp"

#include <cmath>

namespace sketchgnn {

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state) {
    if (params.size() != grads.size())
        throw ShapeError("numerics", "adam: " + std::to_string(params.size()) + " params but " +
                                         std::to_string(grads.size()) + " gradients");
    if (!(state.lr >= 0.0))
        throw InvalidArgument("numerics", "adam: learning rate must be >= 0");
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.shape(), 0.0);
            state.second_moment.emplace_back(p.shape(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size())
        throw ShapeError("numerics", "adam: state tracks a different parameter count");
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k].shape() != grads[k].shape() ||
            params[k].shape() != state.first_moment[k].shape())
            throw ShapeError("numerics", "adam: shape mismatch on parameter " + std::to_string(k) +
                                             ": " + shape_string(params[k].shape()) + " vs " +
                                             shape_string(grads[k].shape()));
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto p = params[k].data();
        auto g = grads[k].data();
        auto m = state.first_moment[k].data();
        auto v = state.second_moment[k].data();
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

} // namespace sketchgnn
