#include "sketchgnn/model.hpp"

#include "sketchgnn/errors.hpp"
#include "sketchgnn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace sketchgnn {

namespace {

const char* kModule = "model";

std::string unit_prefix(const std::string& branch, std::size_t unit) {
    return branch + "." + std::to_string(unit);
}

} // namespace

void ModelConfig::validate() const {
    if (units_per_branch == 0)
        throw InvalidArgument(kModule, "units_per_branch must be >= 1");
    if (dilations.size() != units_per_branch)
        throw InvalidArgument(kModule, "need one dilation per unit: " +
                                           std::to_string(dilations.size()) + " dilations for " +
                                           std::to_string(units_per_branch) + " units");
    if (std::any_of(dilations.begin(), dilations.end(), [](std::size_t d) { return d == 0; }))
        throw InvalidArgument(kModule, "dilations must be >= 1");
    if (k == 0)
        throw InvalidArgument(kModule, "k must be >= 1");
    if (num_classes < 2)
        throw InvalidArgument(kModule, "num_classes must be >= 2");
    if (sample_points < 8)
        throw InvalidArgument(kModule, "sample_points must be >= 8");
    if (conv_width == 0 || pool_width == 0 ||
        std::any_of(head_hidden.begin(), head_hidden.end(), [](std::size_t w) { return w == 0; }))
        throw InvalidArgument(kModule, "layer widths must be positive");
}

void ModelParams::add(std::string name, Tensor value) {
    if (contains(name))
        throw InvalidArgument(kModule, "duplicate parameter " + name);
    names_.push_back(std::move(name));
    tensors_.push_back(std::move(value));
}

std::size_t ModelParams::index_of(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end())
        throw InvalidArgument(kModule, "unknown parameter " + name);
    return static_cast<std::size_t>(it - names_.begin());
}

Tensor& ModelParams::at(const std::string& name) { return tensors_[index_of(name)]; }
const Tensor& ModelParams::at(const std::string& name) const { return tensors_[index_of(name)]; }

bool ModelParams::contains(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_)
        n += t.size();
    return n;
}

ModelParams zero_params(const ModelConfig& config) {
    config.validate();
    ModelParams p;
    auto dense = [&](const std::string& name, std::size_t in, std::size_t out) {
        p.add(name + ".weight", Tensor({in, out}));
        p.add(name + ".bias", Tensor({out}));
    };
    for (const std::string branch : {"sconv", "dconv"}) {
        for (std::size_t l = 0; l < config.units_per_branch; ++l) {
            const std::size_t d_in = l == 0 ? 2 : config.conv_width;
            dense(unit_prefix(branch, l), 2 * d_in, config.conv_width);
            if (d_in != config.conv_width)
                dense(unit_prefix(branch, l) + ".proj", d_in, config.conv_width);
        }
    }
    dense("pool.sk", config.conv_width, config.pool_width);
    dense("pool.st", config.conv_width, config.pool_width);
    std::size_t in = config.feature_width();
    for (std::size_t h = 0; h < config.head_hidden.size(); ++h) {
        dense("head." + std::to_string(h), in, config.head_hidden[h]);
        in = config.head_hidden[h];
    }
    dense("head." + std::to_string(config.head_hidden.size()), in, config.num_classes);
    return p;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    ModelParams p = zero_params(config);
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k < p.size(); ++k) {
        Tensor& t = p.tensors()[k];
        if (t.rank() != 2)
            continue;
        const double limit = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (auto& v : t.data())
            v = dist(rng);
    }
    return p;
}

BoundParams::BoundParams(Tape& tape, const ModelParams& params, bool requires_grad)
    : params_(&params) {
    vars_.reserve(params.size());
    for (const auto& t : params.tensors())
        vars_.push_back(tape.leaf(t, requires_grad));
}

BoundParams::BoundParams(const ModelParams& names, std::vector<Var> vars)
    : params_(&names), vars_(std::move(vars)) {
    if (vars_.size() != names.size())
        throw InvalidArgument(kModule, "expected " + std::to_string(names.size()) +
                                           " parameter vars, got " + std::to_string(vars_.size()));
}

Var BoundParams::operator[](const std::string& name) const {
    const auto& names = params_->names();
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end())
        throw InvalidArgument(kModule, "unknown parameter " + name);
    return vars_[static_cast<std::size_t>(it - names.begin())];
}

Tensor input_coordinates(const Sketch& s) {
    Tensor coords({s.point_count(), 2});
    std::size_t r = 0;
    for (const auto& st : s.strokes) {
        for (const auto& p : st.points) {
            coords.at(r, 0) = p.x / (kCanvasSize / 2) - 1.0;
            coords.at(r, 1) = p.y / (kCanvasSize / 2) - 1.0;
            ++r;
        }
    }
    return coords;
}

Var edge_conv(Var features, std::span<const Edge> edges, Var weight, Var bias) {
    std::vector<int> dst(edges.size());
    std::transform(edges.begin(), edges.end(), dst.begin(), [](const Edge& e) { return e.dst; });
    Var messages = relu(edge_linear(features, edges, weight, bias));
    return max_aggregate(messages, dst, features.value().rows());
}

Var conv_unit(Var features, std::span<const Edge> edges, const BoundParams& params,
              const std::string& prefix, std::size_t unit) {
    const std::string name = unit_prefix(prefix, unit);
    Var conv = edge_conv(features, edges, params[name + ".weight"], params[name + ".bias"]);
    Var shortcut = features;
    if (features.value().cols() != conv.value().cols())
        shortcut = linear(features, params[name + ".proj.weight"], params[name + ".proj.bias"]);
    return add(conv, shortcut);
}

Var static_branch(Var coords, const Graph& graph, const ModelConfig& config,
                  const BoundParams& params) {
    Var f = coords;
    for (std::size_t l = 0; l < config.units_per_branch; ++l)
        f = conv_unit(f, graph.edges, params, "sconv", l);
    return f;
}

DynamicBranchResult dynamic_branch(Var coords, const Graph& graph, const ModelConfig& config,
                                   const BoundParams& params, KnnMode mode, std::uint64_t seed,
                                   const std::vector<DynamicEdgeSet>* frozen) {
    if (frozen != nullptr && frozen->size() != config.units_per_branch)
        throw InvalidArgument(kModule, "frozen edges need one set per unit");
    DynamicBranchResult out{coords, {}};
    for (std::size_t l = 0; l < config.units_per_branch; ++l) {
        DynamicEdgeSet dyn;
        if (frozen != nullptr) {
            dyn = (*frozen)[l];
        } else {
            const Tensor& f = out.features.value();
            dyn = knn_dilated(FeatureView{f.data(), f.cols()}, config.k, config.dilations[l], mode,
                              derive_seed(seed, {l}), l);
        }
        const EdgeList edges = layer_edges(graph, dyn);
        out.features = conv_unit(out.features, edges, params, "dconv", l);
        out.edges.push_back(std::move(dyn));
    }
    return out;
}

MixPoolResult mix_pool(Var dynamic_features, std::span<const int> stroke_of,
                       const BoundParams& params) {
    const std::size_t n = dynamic_features.value().rows();
    if (stroke_of.size() != n)
        throw ShapeError(kModule, "stroke_of covers " + std::to_string(stroke_of.size()) +
                                      " of " + std::to_string(n) + " nodes");
    const std::vector<int> everyone(n, 0);
    Var sk = relu(linear(dynamic_features, params["pool.sk.weight"], params["pool.sk.bias"]));
    Var sketch = gather_rows(max_aggregate(sk, everyone, 1), everyone);

    const int strokes = n == 0 ? 0 : *std::max_element(stroke_of.begin(), stroke_of.end()) + 1;
    Var st = relu(linear(dynamic_features, params["pool.st.weight"], params["pool.st.bias"]));
    Var stroke = gather_rows(max_aggregate(st, stroke_of, static_cast<std::size_t>(strokes)),
                             stroke_of);
    return {sketch, stroke};
}

ForwardResult forward(Tape& tape, const BoundParams& params, const Sketch& sketch,
                      const ModelConfig& config, const ForwardOptions& opts) {
    if (sketch.point_count() != config.sample_points)
        throw InvalidArgument(kModule, "sketch has " + std::to_string(sketch.point_count()) +
                                           " points, model expects " +
                                           std::to_string(config.sample_points));
    const Graph graph = build_static_graph(sketch);
    Var coords = tape.constant(input_coordinates(sketch));

    Var point = static_branch(coords, graph, config, params);
    auto dyn = dynamic_branch(coords, graph, config, params, opts.mode, opts.seed,
                              opts.frozen_edges);
    auto pooled = mix_pool(dyn.features, graph.stroke_of, params);

    Var h = concat({point, pooled.stroke, pooled.sketch});
    const std::size_t layers = config.head_hidden.size();
    for (std::size_t i = 0; i <= layers; ++i) {
        const std::string name = "head." + std::to_string(i);
        h = linear(h, params[name + ".weight"], params[name + ".bias"]);
        if (i < layers)
            h = relu(h);
    }
    return {h, point, pooled.stroke, pooled.sketch, std::move(dyn.edges)};
}

std::vector<int> argmax_rows(const Tensor& logits) {
    std::vector<int> out(logits.rows());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const double* row = logits.row(r);
        out[r] = static_cast<int>(std::max_element(row, row + logits.cols()) - row);
    }
    return out;
}

std::vector<int> predict(const ModelParams& params, const ModelConfig& config,
                         const Sketch& sketch) {
    Tape tape;
    BoundParams bound(tape, params, false);
    return argmax_rows(forward(tape, bound, sketch, config).logits.value());
}

} // namespace sketchgnn
