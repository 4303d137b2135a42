#include "sketchgnn/graph.hpp"

#include "sketchgnn/errors.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace sketchgnn {

namespace {

const char* kModule = "graph";

double squared_distance(FeatureView f, std::size_t a, std::size_t b) {
    const double* x = f.row(a);
    const double* y = f.row(b);
    double acc = 0.0;
    for (std::size_t c = 0; c < f.dim; ++c) {
        const double d = x[c] - y[c];
        acc += d * d;
    }
    return acc;
}

} // namespace

Graph build_static_graph(const Sketch& s) {
    Graph g;
    g.node_count = s.point_count();
    g.stroke_of = s.stroke_of();
    g.edges.reserve(g.node_count * 3);
    for (std::size_t i = 0; i < g.node_count; ++i)
        g.edges.push_back({static_cast<int>(i), static_cast<int>(i)});
    int base = 0;
    for (const auto& st : s.strokes) {
        const int n = static_cast<int>(st.size());
        for (int i = 0; i + 1 < n; ++i) {
            g.edges.push_back({base + i, base + i + 1});
            g.edges.push_back({base + i + 1, base + i});
        }
        base += n;
    }
    return g;
}

namespace {

// Pool selection from one row of distances; (distance, index) order puts ties
// on the lower index.
std::vector<int> select_pool(std::span<const double> dist, std::size_t i, std::size_t pool,
                             std::vector<std::pair<double, int>>& scratch) {
    scratch.clear();
    for (std::size_t j = 0; j < dist.size(); ++j) {
        if (j != i)
            scratch.emplace_back(dist[j], static_cast<int>(j));
    }
    pool = std::min(pool, scratch.size());
    const auto mid = scratch.begin() + static_cast<std::ptrdiff_t>(pool);
    if (pool < scratch.size())
        std::nth_element(scratch.begin(), mid, scratch.end());
    std::sort(scratch.begin(), mid);
    std::vector<int> out(pool);
    for (std::size_t r = 0; r < pool; ++r)
        out[r] = scratch[r].second;
    return out;
}

} // namespace

std::vector<int> nearest_neighbors(FeatureView features, std::size_t i, std::size_t pool) {
    const std::size_t n = features.rows();
    std::vector<double> dist(n);
    for (std::size_t j = 0; j < n; ++j)
        dist[j] = squared_distance(features, i, j);
    std::vector<std::pair<double, int>> scratch;
    return select_pool(dist, i, pool, scratch);
}

DynamicEdgeSet knn_dilated(FeatureView features, std::size_t k, std::size_t dilation,
                           KnnMode mode, std::uint64_t seed, std::size_t layer) {
    if (k == 0 || dilation == 0)
        throw InvalidArgument(kModule, "knn needs k >= 1 and dilation >= 1");
    if (features.dim == 0 || features.data.size() % features.dim != 0)
        throw ShapeError(kModule, "feature buffer is not a whole number of rows");

    DynamicEdgeSet out{.layer = layer, .k = k, .dilation = dilation, .mode = mode, .edges = {}};
    const std::size_t n = features.rows();
    if (n < 2)
        return out;

    const std::size_t pool = std::min(k * dilation, n - 1);
    const std::size_t picks = std::min(k, pool);
    // Small sketches shrink the stride so that every node still gets
    // min(k, n-1) distinct neighbors.
    const std::size_t stride = std::max<std::size_t>(1, std::min(dilation, pool / k));

    std::mt19937_64 rng(seed);
    out.edges.reserve(n * picks);
    // Symmetric distance matrix, each pair computed once.
    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = squared_distance(features, i, j);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    std::vector<std::pair<double, int>> scratch;
    scratch.reserve(n);
    std::vector<int> chosen;
    for (std::size_t i = 0; i < n; ++i) {
        auto cand = select_pool(std::span<const double>(dist).subspan(i * n, n), i, pool, scratch);
        chosen.clear();
        if (mode == KnnMode::eval) {
            for (std::size_t r = 1; r <= picks; ++r)
                chosen.push_back(cand[r * stride - 1]);
        } else {
            // Partial Fisher-Yates over the candidate pool.
            for (std::size_t r = 0; r < picks; ++r) {
                std::uniform_int_distribution<std::size_t> pick(r, cand.size() - 1);
                std::swap(cand[r], cand[pick(rng)]);
                chosen.push_back(cand[r]);
            }
        }
        for (int j : chosen)
            out.edges.push_back({j, static_cast<int>(i)});
    }
    return out;
}

EdgeList layer_edges(const Graph& static_graph, const DynamicEdgeSet& dyn) {
    EdgeList out = static_graph.edges;
    std::vector<Edge> seen = static_graph.edges;
    std::sort(seen.begin(), seen.end());
    std::vector<Edge> extra;
    extra.reserve(dyn.edges.size() * 2);
    for (const auto& e : dyn.edges) {
        if (e.src < 0 || e.dst < 0 || static_cast<std::size_t>(e.src) >= static_graph.node_count ||
            static_cast<std::size_t>(e.dst) >= static_graph.node_count)
            throw InvalidArgument(kModule, "dynamic edge index out of range");
        extra.push_back(e);
        extra.push_back({e.dst, e.src});
    }
    std::sort(extra.begin(), extra.end());
    extra.erase(std::unique(extra.begin(), extra.end()), extra.end());
    for (const auto& e : extra) {
        if (!std::binary_search(seen.begin(), seen.end(), e))
            out.push_back(e);
    }
    return out;
}

} // namespace sketchgnn
