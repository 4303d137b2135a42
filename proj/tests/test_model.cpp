#include "doctest.h"

#include "oracles.hpp"
#include "sketchgnn/autodiff.hpp"
#include "sketchgnn/errors.hpp"
#include "sketchgnn/model.hpp"

#include <cmath>
#include <random>
#include <set>

using namespace sketchgnn;

namespace {

ModelConfig small_config(std::size_t n, std::size_t classes = 3) {
    ModelConfig c;
    c.sample_points = n;
    c.num_classes = classes;
    return c;
}

// Strokes with distinct random coordinates on the canvas.
Sketch random_sketch(std::mt19937_64& rng, std::vector<std::size_t> lengths,
                     double lo = 0, double hi = 256) {
    std::uniform_real_distribution<double> u(lo, hi);
    Sketch s;
    for (std::size_t n : lengths) {
        Stroke st;
        for (std::size_t i = 0; i < n; ++i)
            st.points.push_back({u(rng), u(rng)});
        s.strokes.push_back(st);
    }
    return s;
}

Tensor value_of(Var v) { return v.value(); }

Tensor rows_of(const Tensor& t, std::size_t begin, std::size_t end) {
    Tensor out({end - begin, t.cols()});
    for (std::size_t r = begin; r < end; ++r)
        for (std::size_t c = 0; c < t.cols(); ++c)
            out.at(r - begin, c) = t.at(r, c);
    return out;
}

Tensor add_t(Tensor a, const Tensor& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        a[i] += b[i];
    return a;
}

// One conv unit by explicit loops over the edge list.
Tensor unit_oracle(const Tensor& f, const EdgeList& edges, const ModelParams& p,
                   const std::string& name) {
    Tensor out = oracle::edge_conv(f, edges, p.at(name + ".weight"), p.at(name + ".bias"));
    if (p.contains(name + ".proj.weight"))
        return add_t(out, oracle::matmul_bias(f, p.at(name + ".proj.weight"), p.at(name + ".proj.bias")));
    return add_t(out, f);
}

} // namespace

TEST_CASE("config validation") {
    CHECK_NOTHROW(ModelConfig{}.validate());
    ModelConfig c;
    c.dilations = {1, 4};
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.num_classes = 1;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.sample_points = 7;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("parameter shapes and count") {
    const ModelConfig c = small_config(256, 5);
    const ModelParams p = zero_params(c);
    CHECK(p.at("sconv.0.weight").shape() == Shape{4, 32});
    CHECK(p.at("sconv.0.proj.weight").shape() == Shape{2, 32});
    for (std::size_t l = 1; l < 4; ++l) {
        CHECK(p.at("dconv." + std::to_string(l) + ".weight").shape() == Shape{64, 32});
        CHECK_FALSE(p.contains("dconv." + std::to_string(l) + ".proj.weight"));
    }
    CHECK(p.at("pool.sk.weight").shape() == Shape{32, 128});
    CHECK(p.at("head.0.weight").shape() == Shape{288, 128});
    CHECK(p.at("head.2.weight").shape() == Shape{64, 5});

    // Per branch: unit 0 (4*32+32) + projection (2*32+32), units 1-3 (64*32+32).
    const std::size_t branch = (4 * 32 + 32) + (2 * 32 + 32) + 3 * (64 * 32 + 32);
    const std::size_t pools = 2 * (32 * 128 + 128);
    const std::size_t head = (288 * 128 + 128) + (128 * 64 + 64) + (64 * 5 + 5);
    CHECK(p.parameter_count() == 2 * branch + pools + head);

    const ModelParams init = init_params(c, 1);
    const Tensor& w = init.at("head.0.weight");
    const double limit = std::sqrt(6.0 / (288 + 128));
    for (double v : w.data())
        CHECK(std::abs(v) <= limit);
    for (double v : init.at("head.0.bias").data())
        CHECK(v == 0);
    CHECK(init == init_params(c, 1));
    CHECK_FALSE(init == init_params(c, 2));
}

TEST_CASE("input_coordinates map the canvas to [-1,1]") {
    Sketch s{{Stroke{{{0, 0}, {128, 256}}, {}}}, ""};
    const Tensor t = input_coordinates(s);
    CHECK(t == Tensor({2, 2}, {-1, -1, 0, 1}));
}

TEST_CASE("edge_conv") {
    std::mt19937_64 rng(2);
    Tape tape;
    SUBCASE("isolated node with a self-loop") {
        const Tensor f = oracle::random_tensor({1, 3}, rng);
        const Tensor w = oracle::random_tensor({6, 4}, rng);
        const Tensor b = oracle::random_tensor({4}, rng);
        const EdgeList loop{{0, 0}};
        const Tensor got = value_of(edge_conv(tape.constant(f), loop, tape.constant(w), tape.constant(b)));
        Tensor padded({1, 6});
        for (std::size_t c = 0; c < 3; ++c)
            padded.at(0, c) = f.at(0, c);
        CHECK(got == oracle::relu(oracle::matmul_bias(padded, w, b)));
    }
    SUBCASE("zero features and bias") {
        const EdgeList edges{{0, 0}, {1, 1}, {0, 1}, {1, 0}};
        const Tensor got = value_of(edge_conv(tape.constant(Tensor({2, 3})), edges,
                                              tape.constant(oracle::random_tensor({6, 4}, rng)),
                                              tape.constant(Tensor({4}))));
        CHECK(got == Tensor({2, 4}));
    }
    SUBCASE("three-node chain against the per-edge loop") {
        const Tensor f = oracle::random_tensor({3, 2}, rng);
        const Tensor w = oracle::random_tensor({4, 32}, rng);
        const Tensor b = oracle::random_tensor({32}, rng);
        const Graph g = build_static_graph(Sketch{{Stroke{{{0, 0}, {1, 0}, {2, 0}}, {}}}, ""});
        const Tensor got = value_of(edge_conv(tape.constant(f), g.edges, tape.constant(w), tape.constant(b)));
        const Tensor ref = oracle::edge_conv(f, g.edges, w, b);
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(std::abs(got[i] - ref[i]) <= 1e-12);
    }
}

TEST_CASE("conv_unit") {
    std::mt19937_64 rng(3);
    const ModelConfig c = small_config(8);
    const Graph g = build_static_graph(Sketch{{Stroke{{{0, 0}, {1, 0}, {2, 0}, {3, 1}}, {}}}, ""});
    SUBCASE("zero conv on a later unit is the identity") {
        ModelParams p = zero_params(c);
        Tape tape;
        BoundParams bp(tape, p, false);
        const Tensor f = oracle::random_tensor({4, 32}, rng);
        CHECK(value_of(conv_unit(tape.constant(f), g.edges, bp, "sconv", 1)) == f);
    }
    SUBCASE("zero conv and projection on unit 0") {
        ModelParams p = zero_params(c);
        Tape tape;
        BoundParams bp(tape, p, false);
        CHECK(value_of(conv_unit(tape.constant(oracle::random_tensor({4, 2}, rng)), g.edges, bp, "dconv", 0)) ==
              Tensor({4, 32}));
    }
    SUBCASE("random unit 2 is conv plus input") {
        const ModelParams p = init_params(c, 7);
        Tape tape;
        BoundParams bp(tape, p, false);
        const Tensor f = oracle::random_tensor({4, 32}, rng);
        const Tensor got = value_of(conv_unit(tape.constant(f), g.edges, bp, "sconv", 2));
        const Tensor ref = unit_oracle(f, g.edges, p, "sconv.2");
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(std::abs(got[i] - ref[i]) <= 1e-12);
    }
}

TEST_CASE("static_branch") {
    std::mt19937_64 rng(4);
    SUBCASE("locality: other strokes never reach stroke A") {
        const ModelConfig c = small_config(24);
        const ModelParams p = init_params(c, 11);
        for (int trial = 0; trial < 10; ++trial) {
            Sketch s = random_sketch(rng, {10, 8, 6});
            Sketch moved = s;
            for (std::size_t k = 1; k < 3; ++k)
                for (auto& pt : moved.strokes[k].points)
                    pt = {std::fmod(pt.x * 1.7 + 40, 256), std::fmod(pt.y * 0.3 + 90, 256)};
            const auto run = [&](const Sketch& sk) {
                Tape tape;
                BoundParams bp(tape, p, false);
                return value_of(static_branch(tape.constant(input_coordinates(sk)), build_static_graph(sk),
                                              c, bp));
            };
            CHECK(rows_of(run(s), 0, 10) == rows_of(run(moved), 0, 10));
        }
    }
    SUBCASE("single-point stroke is well defined") {
        ModelConfig c = small_config(8);
        const ModelParams p = init_params(c, 1);
        Sketch s{{Stroke{{{10, 10}}, {}}}, ""};
        Tape tape;
        BoundParams bp(tape, p, false);
        const Tensor out = value_of(static_branch(tape.constant(input_coordinates(s)),
                                                  build_static_graph(s), c, bp));
        CHECK(out.shape() == Shape{1, 32});
        CHECK(out.all_finite());
    }
    SUBCASE("one unit reduces to a single conv_unit") {
        ModelConfig c = small_config(8);
        c.units_per_branch = 1;
        c.dilations = {1};
        const ModelParams p = init_params(c, 2);
        const Sketch s = random_sketch(rng, {5, 3});
        const Graph g = build_static_graph(s);
        const Tensor coords = input_coordinates(s);
        Tape tape;
        BoundParams bp(tape, p, false);
        const Tensor got = value_of(static_branch(tape.constant(coords), g, c, bp));
        const Tensor ref = unit_oracle(coords, g.edges, p, "sconv.0");
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(std::abs(got[i] - ref[i]) <= 1e-12);
    }
}

TEST_CASE("dynamic_branch") {
    std::mt19937_64 rng(5);
    SUBCASE("eval mode is deterministic") {
        const ModelConfig c = small_config(16);
        const ModelParams p = init_params(c, 3);
        const Sketch s = random_sketch(rng, {9, 7});
        const auto run = [&] {
            Tape tape;
            BoundParams bp(tape, p, false);
            auto r = dynamic_branch(tape.constant(input_coordinates(s)), build_static_graph(s), c, bp,
                                    KnnMode::eval, 0);
            return std::pair{r.features.value(), r.edges.back().edges};
        };
        CHECK(run() == run());
    }
    SUBCASE("k clamps on a three-point sketch") {
        const ModelConfig c = small_config(8);
        const ModelParams p = init_params(c, 3);
        const Sketch s = random_sketch(rng, {3});
        Tape tape;
        BoundParams bp(tape, p, false);
        const auto r = dynamic_branch(tape.constant(input_coordinates(s)), build_static_graph(s), c, bp,
                                      KnnMode::eval, 0);
        for (const auto& d : r.edges)
            CHECK(d.edges.size() == 3 * 2);
    }
    SUBCASE("N=16 against per-layer brute-force KNN") {
        const ModelConfig c = small_config(16);
        const ModelParams p = init_params(c, 9);
        for (int trial = 0; trial < 5; ++trial) {
            const Sketch s = random_sketch(rng, {6, 6, 4});
            const Graph g = build_static_graph(s);
            Tape tape;
            BoundParams bp(tape, p, false);
            const Tensor got = value_of(
                dynamic_branch(tape.constant(input_coordinates(s)), g, c, bp, KnnMode::eval, 0).features);

            Tensor f = input_coordinates(s);
            for (std::size_t l = 0; l < 4; ++l) {
                std::vector<std::vector<double>> rows;
                for (std::size_t r = 0; r < f.rows(); ++r)
                    rows.emplace_back(f.row(r), f.row(r) + f.cols());
                std::set<Edge> edges(g.edges.begin(), g.edges.end());
                for (std::size_t i = 0; i < rows.size(); ++i)
                    for (int j : oracle::dilated_neighbors(rows, i, c.k, c.dilations[l])) {
                        edges.insert({j, static_cast<int>(i)});
                        edges.insert({static_cast<int>(i), j});
                    }
                f = unit_oracle(f, EdgeList(edges.begin(), edges.end()), p, "dconv." + std::to_string(l));
            }
            for (std::size_t i = 0; i < got.size(); ++i)
                CHECK(std::abs(got[i] - f[i]) <= 1e-10);
        }
    }
}

TEST_CASE("mix_pool") {
    std::mt19937_64 rng(6);
    const ModelConfig c = small_config(8);
    SUBCASE("single stroke with shared weights") {
        ModelParams p = init_params(c, 4);
        p.at("pool.st.weight") = p.at("pool.sk.weight");
        p.at("pool.st.bias") = p.at("pool.sk.bias");
        Tape tape;
        BoundParams bp(tape, p, false);
        const std::vector<int> one(5, 0);
        const auto r = mix_pool(tape.constant(oracle::random_tensor({5, 32}, rng)), one, bp);
        CHECK(r.stroke.value() == r.sketch.value());
    }
    SUBCASE("two one-point strokes keep their own features") {
        const ModelParams p = init_params(c, 4);
        Tape tape;
        BoundParams bp(tape, p, false);
        const Tensor f = oracle::random_tensor({2, 32}, rng);
        const std::vector<int> strokes{0, 1};
        const auto r = mix_pool(tape.constant(f), strokes, bp);
        CHECK(r.stroke.value() ==
              oracle::relu(oracle::matmul_bias(f, p.at("pool.st.weight"), p.at("pool.st.bias"))));
    }
    SUBCASE("three strokes against the grouped max") {
        const ModelParams p = init_params(c, 4);
        Tape tape;
        BoundParams bp(tape, p, false);
        const Tensor f = oracle::random_tensor({9, 32}, rng);
        const std::vector<int> strokes{0, 0, 1, 1, 1, 2, 2, 2, 2};
        const auto r = mix_pool(tape.constant(f), strokes, bp);
        const Tensor st = oracle::relu(oracle::matmul_bias(f, p.at("pool.st.weight"), p.at("pool.st.bias")));
        const Tensor sk = oracle::relu(oracle::matmul_bias(f, p.at("pool.sk.weight"), p.at("pool.sk.bias")));
        const Tensor want_st = oracle::grouped_max_broadcast(st, strokes);
        const Tensor want_sk = oracle::grouped_max_broadcast(sk, std::vector<int>(9, 0));
        for (std::size_t i = 0; i < want_st.size(); ++i) {
            CHECK(std::abs(r.stroke.value()[i] - want_st[i]) <= 1e-12);
            CHECK(std::abs(r.sketch.value()[i] - want_sk[i]) <= 1e-12);
        }
    }
}

TEST_CASE("forward") {
    std::mt19937_64 rng(7);
    SUBCASE("shape contract and pooling broadcast") {
        const ModelConfig c = small_config(32, 4);
        const ModelParams p = init_params(c, 5);
        const Sketch s = random_sketch(rng, {12, 1, 19});
        Tape tape;
        BoundParams bp(tape, p, false);
        const auto r = forward(tape, bp, s, c);
        CHECK(r.logits.value().shape() == Shape{32, 4});
        CHECK(r.dynamic_edges.size() == 4);
        const auto stroke_of = s.stroke_of();
        const Tensor& st = r.stroke.value();
        const Tensor& sk = r.sketch.value();
        for (std::size_t i = 1; i < 32; ++i) {
            CHECK(rows_of(sk, i, i + 1) == rows_of(sk, 0, 1));
            for (std::size_t j = 0; j < i; ++j)
                if (stroke_of[i] == stroke_of[j])
                    CHECK(rows_of(st, i, i + 1) == rows_of(st, j, j + 1));
        }
    }
    SUBCASE("zero parameters give zero logits and ln C loss") {
        const ModelConfig c = small_config(16, 5);
        const ModelParams p = zero_params(c);
        const Sketch s = random_sketch(rng, {10, 6});
        Tape tape;
        BoundParams bp(tape, p, false);
        const auto r = forward(tape, bp, s, c);
        CHECK(r.logits.value() == Tensor({16, 5}));
        const std::vector<int> targets(16, 2);
        CHECK(cross_entropy(r.logits, targets).value()[0] == doctest::Approx(std::log(5.0)));
    }
    SUBCASE("wrong point count") {
        const ModelConfig c = small_config(16);
        const ModelParams p = zero_params(c);
        Tape tape;
        BoundParams bp(tape, p, false);
        CHECK_THROWS_AS(forward(tape, bp, random_sketch(rng, {10}), c), InvalidArgument);
    }
    SUBCASE("reversing a stroke permutes the logits") {
        const ModelConfig c = small_config(32, 3);
        const ModelParams p = init_params(c, 8);
        for (int trial = 0; trial < 5; ++trial) {
            const Sketch s = random_sketch(rng, {14, 18});
            Sketch rev = s;
            std::reverse(rev.strokes[1].points.begin(), rev.strokes[1].points.end());
            const auto run = [&](const Sketch& sk) {
                Tape tape;
                BoundParams bp(tape, p, false);
                return forward(tape, bp, sk, c).logits.value();
            };
            const Tensor a = run(s), b = run(rev);
            for (std::size_t i = 0; i < 32; ++i) {
                const std::size_t j = i < 14 ? i : 14 + (31 - i);
                for (std::size_t k = 0; k < 3; ++k)
                    CHECK(std::abs(a.at(i, k) - b.at(j, k)) <= 1e-9);
            }
        }
    }
    SUBCASE("bitwise deterministic") {
        const ModelConfig c = small_config(32, 3);
        const ModelParams p = init_params(c, 8);
        const Sketch s = random_sketch(rng, {20, 12});
        CHECK(predict(p, c, s) == predict(p, c, s));
        const auto run = [&] {
            Tape tape;
            BoundParams bp(tape, p, false);
            return forward(tape, bp, s, c).logits.value();
        };
        CHECK(run() == run());
    }
}

TEST_CASE("full model gradient check with frozen edges") {
    std::mt19937_64 rng(8);
    const ModelConfig c = small_config(32, 3);
    const ModelParams p = init_params(c, 12);
    const Sketch s = random_sketch(rng, {20, 12});
    std::vector<int> targets(32);
    for (auto& t : targets)
        t = static_cast<int>(rng() % 3);

    std::vector<DynamicEdgeSet> frozen;
    {
        Tape tape;
        BoundParams bp(tape, p, false);
        frozen = forward(tape, bp, s, c).dynamic_edges;
    }
    const ScalarFunction loss = [&](Tape& tape, std::span<const Var> vars) {
        BoundParams bp(p, std::vector<Var>(vars.begin(), vars.end()));
        ForwardOptions opts;
        opts.frozen_edges = &frozen;
        return cross_entropy(forward(tape, bp, s, c, opts).logits, targets);
    };
    const auto res = gradient_check(loss, p.tensors(), {.step = 1e-5, .max_coords = 400, .seed = 3});
    CHECK(res.coords_checked == 400);
    CHECK(res.max_rel_error < 1e-4);
}
