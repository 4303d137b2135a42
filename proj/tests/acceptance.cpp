// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
// if any fails. Pass criterion numbers as arguments to run a subset.

#include "oracles.hpp"
#include "sketchgnn/autodiff.hpp"
#include "sketchgnn/evaluation.hpp"
#include "sketchgnn/graph.hpp"
#include "sketchgnn/model.hpp"
#include "sketchgnn/perturb.hpp"
#include "sketchgnn/synth.hpp"
#include "sketchgnn/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace sketchgnn;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

Sketch random_sketch(std::mt19937_64& rng, const std::vector<std::size_t>& lengths) {
    std::uniform_real_distribution<double> u(0, 256);
    Sketch s;
    for (std::size_t n : lengths) {
        Stroke st;
        for (std::size_t i = 0; i < n; ++i)
            st.points.push_back({u(rng), u(rng)});
        s.strokes.push_back(st);
    }
    return s;
}

// Sum of the op output weighted by fixed random coefficients, so every output
// element contributes a distinct gradient.
Var weighted_sum(Var out, const Tensor& coeff) {
    return sum(mul(out, out.tape->constant(coeff)));
}

// 1. Gradient fidelity.
Outcome gradients() {
    Stopwatch clock;
    std::mt19937_64 rng(1);
    double worst_op = 0;
    const auto op_check = [&](const std::vector<Tensor>& params, Shape out_shape,
                              const std::function<Var(std::span<const Var>)>& op) {
        const Tensor coeff = oracle::random_tensor(out_shape, rng);
        const ScalarFunction f = [&](Tape&, std::span<const Var> v) { return weighted_sum(op(v), coeff); };
        worst_op = std::max(worst_op, gradient_check(f, params).max_rel_error);
    };
    const Tensor x = oracle::random_tensor({6, 4}, rng), w = oracle::random_tensor({4, 3}, rng),
                 b = oracle::random_tensor({3}, rng);
    op_check({x, w, b}, {6, 3}, [](auto v) { return linear(v[0], v[1], v[2]); });
    op_check({x}, {6, 4}, [](auto v) { return relu(v[0]); });
    const std::vector<int> dst{0, 1, 1, 2, 0, 2};
    op_check({x}, {3, 4}, [&](auto v) { return max_aggregate(v[0], dst, 3); });
    op_check({x, oracle::random_tensor({6, 2}, rng)}, {6, 6}, [](auto v) { return concat({v[0], v[1]}); });
    const std::vector<int> rows{5, 0, 0, 3};
    op_check({x}, {4, 4}, [&](auto v) { return gather_rows(v[0], rows); });
    const EdgeList edges{{0, 1}, {2, 1}, {5, 0}, {3, 3}, {4, 2}};
    const Tensor we = oracle::random_tensor({8, 3}, rng);
    op_check({x, we, b}, {5, 3}, [&](auto v) { return edge_linear(v[0], edges, v[1], v[2]); });
    const std::vector<int> targets{0, 2, 1, 1, 0, 2};
    const ScalarFunction ce = [&](Tape&, std::span<const Var> v) {
        return cross_entropy(v[0], targets);
    };
    const Tensor logits = oracle::random_tensor({6, 3}, rng, 3.0);
    worst_op = std::max(worst_op, gradient_check(ce, std::vector<Tensor>{logits}).max_rel_error);

    // Full model on a 32-point two-stroke sketch, dynamic edges frozen.
    ModelConfig config;
    config.sample_points = 32;
    const Sketch s = preprocess(make_toy_dataset(ToyKind::lollipop, 1, 7)[0], 32);
    const std::vector<int> labels = s.flat_labels();
    const ModelParams params = init_params(config, 7);
    std::vector<DynamicEdgeSet> frozen;
    {
        Tape tape;
        frozen = forward(tape, BoundParams(tape, params, false), s, config).dynamic_edges;
    }
    const ScalarFunction loss = [&](Tape& tape, std::span<const Var> vars) {
        const BoundParams bound(params, std::vector<Var>(vars.begin(), vars.end()));
        ForwardOptions opts;
        opts.frozen_edges = &frozen;
        return cross_entropy(forward(tape, bound, s, config, opts).logits, labels);
    };
    const GradCheckResult full = gradient_check(loss, params.tensors(), {.seed = 7});
    const double t = clock.seconds();
    return {s.strokes.size() == 2 && full.max_rel_error < 1e-4 && worst_op < 1e-6 && t < 30,
            fmt("model %.2e over %.0f coords, ops %.2e, %.1f s", full.max_rel_error,
                static_cast<double>(full.coords_checked), worst_op, t)};
}

// 2. Overfit 20 lollipops with the default optimizer settings.
Outcome overfit() {
    Stopwatch clock;
    ModelConfig model;
    DatasetSplit split;
    for (const auto& s : make_toy_dataset(ToyKind::lollipop, 20, 21))
        split.train.push_back(preprocess(s, model.sample_points));
    TrainConfig config;
    config.epochs = 200;
    config.seed = 2;
    double acc = 0;
    std::size_t epochs = 0;
    const TrainResult r = train(split, model, config, {}, [&](const EpochRecord& rec, const ModelParams& p) {
        epochs = rec.epoch + 1;
        acc = point_accuracy(p, model, split.train);
        return acc >= 0.99;
    });
    (void)r;
    const double t = clock.seconds();
    return {acc >= 0.99 && t < 120,
            fmt("accuracy %.4f after %.0f epochs (lr %.3g, batch %.0f)", acc,
                static_cast<double>(epochs), config.lr, static_cast<double>(config.batch_size)) +
                fmt(", %.1f s", t)};
}

// 3. Train on 100 three-class toys, evaluate on 50 held out.
Outcome generalization() {
    Stopwatch clock;
    ModelConfig model;
    model.num_classes = 3;
    DatasetSplit split;
    for (const auto& s : make_toy_dataset(ToyKind::cross, 100, 31))
        split.train.push_back(preprocess(s, model.sample_points));
    for (const auto& s : make_toy_dataset(ToyKind::cross, 10, 32))
        split.validation.push_back(preprocess(s, model.sample_points));
    TrainConfig config;
    config.epochs = 10;
    config.batch_size = 16;
    config.seed = 3;
    config.category = "cross";
    const TrainResult r = train(split, model, config);
    const EvalReport rep = evaluate(make_toy_dataset(ToyKind::cross, 50, 33), r.checkpoint, "acceptance", {});
    return {rep.p_metric >= 0.95 && rep.c_metric >= 0.95,
            fmt("P %.4f C %.4f on 50 held-out, %.1f s", rep.p_metric, rep.c_metric, clock.seconds())};
}

// 4. Pooled rows are bitwise identical within the sketch and within strokes.
Outcome pooling() {
    std::mt19937_64 rng(4);
    std::size_t bad = 0;
    for (int t = 0; t < 100; ++t) {
        ModelConfig config;
        config.sample_points = 24 + rng() % 40;
        const std::size_t strokes = 1 + rng() % 5;
        std::vector<std::size_t> lengths(strokes, config.sample_points / strokes);
        lengths[0] += config.sample_points % strokes;
        const Sketch s = random_sketch(rng, lengths);
        const ModelParams p = init_params(config, rng());
        Tape tape;
        const BoundParams bound(tape, p, false);
        ForwardOptions opts;
        opts.mode = t % 2 ? KnnMode::train : KnnMode::eval;
        opts.seed = rng();
        const ForwardResult r = forward(tape, bound, s, config, opts);
        const Tensor sk = r.sketch.value(), st = r.stroke.value();
        const std::vector<int> stroke_of = s.stroke_of();
        std::map<int, std::size_t> first;
        for (std::size_t i = 0; i < sk.rows(); ++i) {
            const std::size_t f = first.emplace(stroke_of[i], i).first->second;
            for (std::size_t c = 0; c < sk.cols(); ++c) {
                bad += sk.at(i, c) != sk.at(0, c);
                bad += st.at(i, c) != st.at(f, c);
            }
        }
    }
    return {bad == 0, fmt("%.0f mismatching entries over 100 passes", static_cast<double>(bad))};
}

// 5. Graph invariants.
Outcome graph_invariants() {
    std::mt19937_64 rng(5);
    std::size_t missing = 0, knn_bad = 0, knn_cases = 0, leaks = 0;

    for (int t = 0; t < 20; ++t) {
        ModelConfig config;
        config.sample_points = 32;
        const Sketch s = random_sketch(rng, {12, 9, 11});
        const Graph g = build_static_graph(s);
        Tape tape;
        ForwardOptions opts;
        opts.mode = t % 2 ? KnnMode::train : KnnMode::eval;
        opts.seed = rng();
        const ForwardResult r = forward(tape, BoundParams(tape, init_params(config, rng()), false), s, config, opts);
        for (const auto& dyn : r.dynamic_edges) {
            const EdgeList layer = layer_edges(g, dyn);
            const std::set<Edge> have(layer.begin(), layer.end());
            for (const Edge& e : g.edges)
                missing += have.count(e) == 0;
        }
    }

    for (int t = 0; t < 60; ++t) {
        const std::size_t n = 2 + rng() % 63, dim = 1 + rng() % 8;
        std::vector<std::vector<double>> rows(n, std::vector<double>(dim));
        std::vector<double> flat;
        std::uniform_real_distribution<double> u(-1, 1);
        for (auto& r : rows)
            for (auto& v : r) {
                v = u(rng);
                flat.push_back(v);
            }
        for (std::size_t d : {1, 4, 8, 16}) {
            ++knn_cases;
            const DynamicEdgeSet e = knn_dilated({flat, dim}, 8, d, KnnMode::eval, 0);
            std::vector<std::set<int>> got(n);
            for (const Edge& edge : e.edges)
                got[static_cast<std::size_t>(edge.dst)].insert(edge.src);
            for (std::size_t i = 0; i < n; ++i)
                if (got[i] != oracle::dilated_neighbors(rows, i, 8, d)) {
                    ++knn_bad;
                    break;
                }
        }
    }

    // Moving the second stroke never changes the first stroke's static features.
    for (int t = 0; t < 50; ++t) {
        ModelConfig config;
        const std::size_t a = 4 + rng() % 20, b = 4 + rng() % 20;
        config.sample_points = a + b;
        const ModelParams p = init_params(config, rng());
        const Sketch s = random_sketch(rng, {a, b});
        Sketch moved = s;
        moved.strokes[1] = random_sketch(rng, {b}).strokes[0];
        const auto branch = [&](const Sketch& sk) {
            Tape tape;
            const BoundParams bound(tape, p, false);
            return Tensor(static_branch(tape.constant(input_coordinates(sk)), build_static_graph(sk), config, bound)
                              .value());
        };
        const Tensor x = branch(s), y = branch(moved);
        for (std::size_t i = 0; i < a * x.cols(); ++i)
            leaks += x[i] != y[i];
    }
    return {missing == 0 && knn_bad == 0 && leaks == 0,
            fmt("%.0f static edges missing, %.0f/%.0f KNN fixtures off, %.0f locality leaks",
                static_cast<double>(missing), static_cast<double>(knn_bad), static_cast<double>(knn_cases),
                static_cast<double>(leaks))};
}

// 6. Metrics against an analytic count. Strokes run left to right along their
// own rows, so no pixel is shared between strokes. Pixel x belongs to the
// segment that starts at the last vertex <= x (the final vertex starts none).
Outcome metrics() {
    std::mt19937_64 rng(6);
    std::vector<std::pair<Sketch, Sketch>> fixtures;
    // The boundary stroke: 4 pixels, 3 correct.
    fixtures.push_back({Sketch{{Stroke{{{0, 0}, {1, 0}, {3, 0}}, {0, 0, 0}}}, ""},
                        Sketch{{Stroke{{{0, 0}, {1, 0}, {3, 0}}, {1, 0, 0}}}, ""}});
    while (fixtures.size() < 25) {
        Sketch truth;
        const std::size_t strokes = 1 + rng() % 6;
        for (std::size_t k = 0; k < strokes; ++k) {
            Stroke st;
            int x = static_cast<int>(rng() % 40);
            const std::size_t n = 2 + rng() % 6;
            for (std::size_t i = 0; i < n; ++i) {
                st.points.push_back({static_cast<double>(x), static_cast<double>(7 * k + 3)});
                st.labels.push_back(static_cast<int>(rng() % 3));
                x += 1 + static_cast<int>(rng() % 12);
            }
            truth.strokes.push_back(st);
        }
        Sketch pred = truth;
        for (auto& st : pred.strokes)
            for (auto& l : st.labels)
                if (rng() % 3 == 0)
                    l = static_cast<int>(rng() % 3);
        fixtures.push_back({truth, pred});
    }

    std::size_t bad = 0;
    bool boundary = false;
    for (std::size_t f = 0; f < fixtures.size(); ++f) {
        const auto& [truth, pred] = fixtures[f];
        std::size_t pixels = 0, good = 0, strokes_ok = 0;
        for (std::size_t k = 0; k < truth.strokes.size(); ++k) {
            const auto& pts = truth.strokes[k].points;
            std::size_t owned = 0, right = 0;
            std::size_t seg = 0;
            for (int x = static_cast<int>(pts.front().x); x <= static_cast<int>(pts.back().x); ++x) {
                while (seg + 2 < pts.size() && pts[seg + 1].x <= x)
                    ++seg;
                ++owned;
                right += truth.strokes[k].labels[seg] == pred.strokes[k].labels[seg];
            }
            pixels += owned;
            good += right;
            strokes_ok += 4 * right >= 3 * owned;
        }
        const double want_p = static_cast<double>(good) / static_cast<double>(pixels);
        const double want_c = static_cast<double>(strokes_ok) / static_cast<double>(truth.strokes.size());
        const RasterLabels r = rasterize(truth, pred);
        const double p = p_metric(r), c = c_metric(r, truth, pred);
        bad += p != want_p || c != want_c;
        if (f == 0)
            boundary = p == 0.75 && c == 1.0;
    }
    return {bad == 0 && boundary, fmt("%.0f of 25 rasters disagree, 75%% stroke counted ",
                                      static_cast<double>(bad)) + (boundary ? "correct" : "wrong")};
}

// 7. Constants.
Outcome constants() {
    const ModelConfig m;
    const TrainConfig t;
    const std::size_t ps = break_piece_length(256, 4, 6);
    const bool ok = ps == 10 && t.epochs == 100 && learning_rate(t, 49) == 0.002 &&
                    learning_rate(t, 50) == 0.001 && learning_rate(t, 99) == 0.001 &&
                    m.units_per_branch == 4 && m.k == 8 &&
                    m.dilations == std::vector<std::size_t>{1, 4, 8, 16} && m.sample_points == 256;
    std::ostringstream d;
    d << "p_s " << ps << ", lr(49) " << learning_rate(t, 49) << ", lr(50) " << learning_rate(t, 50)
      << ", L " << m.units_per_branch << ", K " << m.k << ", N " << m.sample_points;
    return {ok, d.str()};
}

// 8. Serialized model size.
Outcome checkpoint_size() {
    Checkpoint ck;
    ck.config.num_classes = 3;
    ck.params = init_params(ck.config, 8);
    ck.category = "cross";
    ck.classes = {"a", "b", "c"};
    const std::size_t bytes = checkpoint_to_json(ck).size();
    return {bytes >= 100'000 && bytes <= 1'000'000,
            fmt("%.0f bytes for %.0f parameters", static_cast<double>(bytes),
                static_cast<double>(ck.params.parameter_count()))};
}

// 9. Noise robustness with and without matching augmentation.
Outcome noise_robustness() {
    Stopwatch clock;
    const PerturbationSpec noise = parse_perturbation("point_noise,sigma=10");
    double gap = 0;
    std::string per_seed;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ModelConfig model;
        model.num_classes = 3;
        DatasetSplit split;
        for (const auto& s : make_toy_dataset(ToyKind::cross, 40, 900 + seed))
            split.train.push_back(preprocess(s, model.sample_points));
        const auto test = make_toy_dataset(ToyKind::cross, 50, 950 + seed);
        EvalOptions opts;
        opts.perturbation = noise;
        opts.seed = seed;
        double p[2];
        for (int aug = 0; aug < 2; ++aug) {
            TrainConfig config;
            config.epochs = 10;
            config.batch_size = 8;
            config.seed = seed;
            config.category = "cross";
            if (aug)
                config.augmentation = {noise};
            p[aug] = evaluate(test, train(split, model, config).checkpoint, "acceptance", opts).p_metric;
        }
        gap += (p[1] - p[0]) / 5;
        per_seed += fmt(" %.4f/%.4f", p[0], p[1]);
    }
    return {gap >= 0.02, fmt("mean P gap %.4f, %.1f s; plain/augmented:", gap, clock.seconds()) + per_seed};
}

// 10. End-to-end determinism.
Outcome determinism() {
    const auto run = [] {
        ModelConfig model;
        model.sample_points = 64;
        DatasetSplit split;
        for (const auto& s : make_toy_dataset(ToyKind::lollipop, 12, 10))
            split.train.push_back(preprocess(s, model.sample_points));
        TrainConfig config;
        config.epochs = 3;
        config.batch_size = 4;
        config.seed = 10;
        config.category = "lollipop";
        config.augmentation = {parse_perturbation("point_noise,sigma=3")};
        const Checkpoint ck = train(split, model, config).checkpoint;
        EvalOptions opts;
        opts.perturbation = parse_perturbation("stroke_offset,eta=0.05");
        opts.seed = 10;
        return std::pair{checkpoint_to_json(ck),
                         report_to_json(evaluate(make_toy_dataset(ToyKind::lollipop, 8, 11), ck, "run", opts))};
    };
    const auto a = run(), b = run();
    return {a == b, std::string("checkpoints ") + (a.first == b.first ? "identical" : "differ") + ", reports " +
                        (a.second == b.second ? "identical" : "differ")};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
        {"gradient fidelity", gradients},      {"overfit oracle", overfit},
        {"generalization", generalization},    {"pooling invariants", pooling},
        {"graph invariants", graph_invariants}, {"metric oracle", metrics},
        {"constants", constants},              {"checkpoint size", checkpoint_size},
        {"noise robustness", noise_robustness}, {"determinism", determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i)
        only.insert(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && only.count(id) == 0)
            continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("criterion %2d %s  %-20s %s\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
