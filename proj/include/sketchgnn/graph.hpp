#pragma once

#include "sketchgnn/sketch.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sketchgnn {

/// Directed edge. Messages flow from `src` to `dst`; a node aggregates over
/// its in-edges.
struct Edge {
    int src = 0;
    int dst = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

using EdgeList = std::vector<Edge>;

/// The static input graph: chain edges inside each stroke (both directions)
/// plus one self-loop per node.
struct Graph {
    std::size_t node_count = 0;
    EdgeList edges;
    std::vector<int> stroke_of;
};

enum class KnnMode { train, eval };

/// One layer's dynamic edges. Each node i receives an edge (neighbor -> i)
/// for every selected neighbor; layer_edges() adds the reverse direction.
struct DynamicEdgeSet {
    std::size_t layer = 0;
    std::size_t k = 0;
    std::size_t dilation = 1;
    KnnMode mode = KnnMode::eval;
    EdgeList edges;
};

Graph build_static_graph(const Sketch& s);

/// Row-major feature matrix view: `features.size() == node_count * dim`.
struct FeatureView {
    std::span<const double> data;
    std::size_t dim = 0;

    std::size_t rows() const { return dim == 0 ? 0 : data.size() / dim; }
    const double* row(std::size_t i) const { return data.data() + i * dim; }
};

/// Candidate pool of node i: the nearest other nodes by Euclidean distance,
/// ties broken by ascending index, truncated to `pool` entries.
std::vector<int> nearest_neighbors(FeatureView features, std::size_t i, std::size_t pool);

/// Dilated KNN over feature space. Eval mode takes every d-th neighbor of the
/// k*d nearest; train mode samples k of them uniformly without replacement.
DynamicEdgeSet knn_dilated(FeatureView features, std::size_t k, std::size_t dilation,
                           KnnMode mode, std::uint64_t seed, std::size_t layer = 0);

/// Static edges united with the dynamic edges in both directions, deduplicated.
/// Static edges keep their order and come first.
EdgeList layer_edges(const Graph& static_graph, const DynamicEdgeSet& dyn);

} // namespace sketchgnn
