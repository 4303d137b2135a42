#pragma once

#include "sketchgnn/autodiff.hpp"
#include "sketchgnn/graph.hpp"
#include "sketchgnn/sketch.hpp"
#include "sketchgnn/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sketchgnn {

struct ModelConfig {
    std::size_t units_per_branch = 4;
    std::size_t conv_width = 32;
    std::size_t k = 8;
    std::vector<std::size_t> dilations{1, 4, 8, 16};
    std::size_t pool_width = 128;
    std::vector<std::size_t> head_hidden{128, 64};
    std::size_t num_classes = 2;
    std::size_t sample_points = 256;

    /// Throws InvalidArgument when the configuration is inconsistent.
    void validate() const;

    std::size_t feature_width() const { return conv_width + 2 * pool_width; }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Named parameter tensors in a fixed order.
class ModelParams {
public:
    void add(std::string name, Tensor value);

    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool contains(const std::string& name) const;

    const std::vector<std::string>& names() const { return names_; }
    std::vector<Tensor>& tensors() { return tensors_; }
    const std::vector<Tensor>& tensors() const { return tensors_; }
    std::size_t size() const { return names_.size(); }
    std::size_t parameter_count() const;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;

private:
    std::size_t index_of(const std::string& name) const;

    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
};

/// Parameters with the shapes `config` implies, all zero.
ModelParams zero_params(const ModelConfig& config);

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// ModelParams bound to a tape.
class BoundParams {
public:
    BoundParams(Tape& tape, const ModelParams& params, bool requires_grad);
    /// Uses vars already on a tape, one per parameter in `names` order.
    BoundParams(const ModelParams& names, std::vector<Var> vars);

    Var operator[](const std::string& name) const;
    const std::vector<Var>& vars() const { return vars_; }

private:
    const ModelParams* params_;
    std::vector<Var> vars_;
};

/// Rows scaled from the [0,256] canvas to [-1,1].
Tensor input_coordinates(const Sketch& s);

/// Per edge (src -> dst): ReLU(linear(concat(f_dst, f_src - f_dst))); each node
/// takes the elementwise max over its in-edges.
Var edge_conv(Var features, std::span<const Edge> edges, Var weight, Var bias);

/// edge_conv plus the residual shortcut: identity, or a learned projection
/// when the input width differs from the unit width.
Var conv_unit(Var features, std::span<const Edge> edges, const BoundParams& params,
              const std::string& prefix, std::size_t unit);

Var static_branch(Var coords, const Graph& graph, const ModelConfig& config,
                  const BoundParams& params);

struct DynamicBranchResult {
    Var features;
    std::vector<DynamicEdgeSet> edges;
};

/// When `frozen` is given its edge sets are used instead of running KNN.
DynamicBranchResult dynamic_branch(Var coords, const Graph& graph, const ModelConfig& config,
                                   const BoundParams& params, KnnMode mode, std::uint64_t seed,
                                   const std::vector<DynamicEdgeSet>* frozen = nullptr);

struct MixPoolResult {
    Var sketch;
    Var stroke;
};

MixPoolResult mix_pool(Var dynamic_features, std::span<const int> stroke_of,
                       const BoundParams& params);

struct ForwardOptions {
    KnnMode mode = KnnMode::eval;
    std::uint64_t seed = 0;
    const std::vector<DynamicEdgeSet>* frozen_edges = nullptr;
};

struct ForwardResult {
    Var logits;
    Var point;
    Var stroke;
    Var sketch;
    std::vector<DynamicEdgeSet> dynamic_edges;
};

/// The full network on one normalized, resampled sketch.
ForwardResult forward(Tape& tape, const BoundParams& params, const Sketch& sketch,
                      const ModelConfig& config, const ForwardOptions& opts = {});

/// Eval-mode forward followed by a per-point argmax (ties to the lower class).
std::vector<int> predict(const ModelParams& params, const ModelConfig& config,
                         const Sketch& sketch);

std::vector<int> argmax_rows(const Tensor& logits);

struct Checkpoint {
    ModelConfig config;
    ModelParams params;
    std::string category;
    std::vector<std::string> classes;
    std::uint64_t seed = 0;
    /// Epoch the parameters were taken from (best validation loss).
    std::optional<std::size_t> epoch;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(std::string_view text);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

} // namespace sketchgnn
