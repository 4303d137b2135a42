#pragma once

#include "sketchgnn/graph.hpp"
#include "sketchgnn/tensor.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace sketchgnn {

class Tape;

/// Handle to a tensor recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Tensor& grad() const;
};

/// Records a computation for reverse-mode differentiation. Nodes are appended
/// in evaluation order, so walking them backwards is a reverse topological
/// order. A tape is used by one thread at a time.
class Tape {
public:
    using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

    Var leaf(Tensor value, bool requires_grad = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    /// Appends an operation result. Throws NumericsError on NaN/Inf.
    Var record(Tensor value, std::vector<std::size_t> parents, Backward backward);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    const Tensor& grad(std::size_t id) const;
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

    /// Gradient buffer of node `id`, allocated on first use.
    Tensor& grad_buffer(std::size_t id);

    /// Seeds d(root)/d(root) with `seed` (root must be a single element) and
    /// propagates to every node that requires a gradient.
    void backward(Var root, double seed = 1.0);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<std::size_t> parents;
        Backward backward;
        bool requires_grad = false;
    };
    std::vector<Node> nodes_;
};

// Operators. All of them record onto the tape of their first argument.

/// input[n,a] * weight[a,b] + bias[b]
Var linear(Var input, Var weight, Var bias);
Var relu(Var input);
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var sum(Var input);

/// Per destination node, the elementwise max over the rows of `edge_values`
/// pointing at it. The gradient goes to the first argmax row.
Var max_aggregate(Var edge_values, std::span<const int> dst, std::size_t node_count);

/// Column-wise concatenation in argument order.
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);

/// out[r] = input[index[r]]
Var gather_rows(Var input, std::span<const int> index);

/// Per edge (src -> dst): concat(f_dst, f_src - f_dst).
Var edge_features(Var features, std::span<const Edge> edges);

/// linear(edge_features(features, edges), weight, bias) without materialising
/// the [m, 2d] edge matrix: the product splits into two node-level products
/// that are gathered per edge.
Var edge_linear(Var features, std::span<const Edge> edges, Var weight, Var bias);

/// Mean over rows of -log softmax(logits)[target].
Var cross_entropy(Var logits, std::span<const int> targets);

// Verification harness.

using ScalarFunction = std::function<Var(Tape&, std::span<const Var> params)>;

struct GradCheckOptions {
    double step = 1e-5;
    /// Coordinates checked per call. Larger parameter sets are sampled.
    std::size_t max_coords = 400;
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t coords_checked = 0;
};

/// Compares the tape gradient with central finite differences:
/// max |g_ad - g_fd| / max(1, |g_fd|).
GradCheckResult gradient_check(const ScalarFunction& f, std::span<const Tensor> params,
                               const GradCheckOptions& opts = {});

} // namespace sketchgnn
