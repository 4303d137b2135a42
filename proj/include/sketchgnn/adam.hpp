#pragma once

#include "sketchgnn/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace sketchgnn {

struct AdamState {
    double lr = 0.002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
};

/// One bias-corrected Adam update of `params` in place. Moment buffers are
/// created on the first call; `state.step` is incremented once per call.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state);

} // namespace sketchgnn
