// Command-line front end: train, eval, infer, perturb, synth, render, gradcheck.
//
// Exit status: 0 on success, 1 when the pipeline fails, 2 on usage errors
// (unknown flags, missing input files).

#include "CLI11.hpp"
#include "json.hpp"

#include "sketchgnn/autodiff.hpp"
#include "sketchgnn/errors.hpp"
#include "sketchgnn/evaluation.hpp"
#include "sketchgnn/model.hpp"
#include "sketchgnn/parallel.hpp"
#include "sketchgnn/perturb.hpp"
#include "sketchgnn/render.hpp"
#include "sketchgnn/rng.hpp"
#include "sketchgnn/synth.hpp"
#include "sketchgnn/training.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

using namespace sketchgnn;
namespace fs = std::filesystem;

namespace {

struct Options {
    std::string config;
    std::string data;
    std::string out;
    std::string checkpoint;
    std::string history;
    std::string labels;
    std::string format = "native";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_points;
    std::optional<std::size_t> k;
    std::vector<std::string> perturb;
    std::optional<std::size_t> validation;
    double rdp_epsilon = kDefaultRdpEpsilon;

    // synth
    std::string toy;
    std::size_t count = 20;
    double jitter = 1.0;
    std::string edge_map;
    std::string pgm;
    std::string pgm_labels;
    std::string category;

    // render
    std::size_t index = 0;

    // gradcheck
    std::size_t grad_points = 32;
};

SketchFormat sketch_format(const std::string& name) {
    if (name == "native")
        return SketchFormat::native;
    if (name == "quickdraw")
        return SketchFormat::quickdraw;
    throw InvalidArgument("cli", "unknown sketch format " + name);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw InvalidArgument("cli", "cannot write " + path);
    f << text;
    if (!f)
        throw InvalidArgument("cli", "failed writing " + path);
}

std::string history_path(const Options& o) {
    return o.history.empty() ? o.out + ".history.jsonl" : o.history;
}

int run_train(const Options& o) {
    RunConfig rc = o.config.empty() ? RunConfig{} : load_run_config(o.config);
    if (o.seed)
        rc.train.seed = *o.seed;
    if (o.n_points)
        rc.model.sample_points = *o.n_points;
    if (o.k)
        rc.model.k = *o.k;
    rc.train.threads = env_thread_count(rc.train.threads);
    rc.train.rdp_epsilon = o.rdp_epsilon;

    if (!o.labels.empty()) {
        const LabelMap m = read_label_map_file(o.labels);
        rc.train.classes = m.classes;
        if (rc.train.category.empty())
            rc.train.category = m.category;
        rc.model.num_classes = m.classes.size();
    }

    std::vector<Sketch> raw = read_sketch_file(o.data, sketch_format(o.format));
    if (raw.empty())
        throw DegenerateInput("cli", "no sketches in " + o.data);
    if (rc.train.category.empty())
        rc.train.category = raw.front().category;

    std::vector<Sketch> prepared;
    prepared.reserve(raw.size());
    for (const auto& s : raw) {
        if (!s.labeled())
            throw ValidationError("cli", "training data must be labeled");
        validate(s, static_cast<int>(rc.model.num_classes));
        prepared.push_back(preprocess(s, rc.model.sample_points, o.rdp_epsilon));
    }

    const std::size_t val = o.validation.value_or(prepared.size() >= 10 ? prepared.size() / 10 : 0);
    const DatasetSplit split = split_dataset(prepared, prepared.size() - val, val, 0, rc.train.seed);

    std::ofstream hist(history_path(o));
    if (!hist)
        throw InvalidArgument("cli", "cannot write " + history_path(o));
    const TrainResult r = train(split, rc.model, rc.train, [&](const EpochRecord& e) {
        hist << to_json_line(e) << '\n';
        std::cerr << "epoch " << e.epoch << " train " << e.train_loss << " val " << e.val_loss
                  << " lr " << e.lr << '\n';
    });
    save_checkpoint(o.out, r.checkpoint);
    std::cerr << "best epoch " << r.best_epoch << ", checkpoint written to " << o.out << '\n';
    return 0;
}

int run_eval(const Options& o) {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    const std::vector<Sketch> data = read_sketch_file(o.data, sketch_format(o.format));
    EvalOptions opts;
    opts.seed = o.seed.value_or(0);
    opts.threads = env_thread_count(1);
    opts.rdp_epsilon = o.rdp_epsilon;
    const std::string id = fs::path(o.checkpoint).filename().string();

    if (o.perturb.empty()) {
        const EvalReport r = evaluate(data, ckpt, id, opts);
        write_text(o.out, report_to_json(r));
        std::cout << "P " << r.p_metric << " C " << r.c_metric << '\n';
        return 0;
    }
    std::vector<EvalReport> reports;
    for (const auto& text : o.perturb) {
        opts.perturbation = parse_perturbation(text);
        reports.push_back(evaluate(data, ckpt, id, opts));
        std::cout << text << ": P " << reports.back().p_metric << " C " << reports.back().c_metric
                  << '\n';
    }
    write_text(o.out, reports.size() == 1 ? report_to_json(reports[0]) : sweep_to_json(reports));
    return 0;
}

int run_infer(const Options& o) {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    std::vector<Sketch> data = read_sketch_file(o.data, sketch_format(o.format));
    std::vector<Sketch> out(data.size());
    parallel_for(data.size(), env_thread_count(1),
                 [&](std::size_t i) { out[i] = infer(data[i], ckpt, o.rdp_epsilon); });
    write_sketch_file(o.out, out);
    return 0;
}

int run_perturb(const Options& o) {
    if (o.perturb.size() != 1)
        throw InvalidArgument("cli", "perturb takes exactly one --perturb spec");
    const PerturbationSpec spec = parse_perturbation(o.perturb[0]);
    const std::uint64_t seed = o.seed.value_or(0);
    std::vector<Sketch> data = read_sketch_file(o.data, sketch_format(o.format));
    for (std::size_t i = 0; i < data.size(); ++i)
        data[i] = perturb(data[i], spec, derive_seed(seed, {i}));
    write_sketch_file(o.out, data);
    return 0;
}

int run_synth(const Options& o) {
    const std::uint64_t seed = o.seed.value_or(0);
    std::vector<Sketch> out;
    if (!o.toy.empty()) {
        const ToyKind kind = parse_toy_kind(o.toy);
        out = make_toy_dataset(kind, o.count, seed, o.jitter);
        const LabelMap m = toy_label_map(kind);
        nlohmann::ordered_json j{{"category", m.category}, {"classes", m.classes}};
        write_text(o.out + ".labels.json", j.dump() + "\n");
    } else if (!o.edge_map.empty()) {
        out.push_back(trace_strokes(read_edge_map_file(o.edge_map), seed, o.category));
    } else if (!o.pgm.empty()) {
        out.push_back(trace_strokes(read_pgm_edge_map(o.pgm, o.pgm_labels), seed, o.category));
    } else {
        throw InvalidArgument("cli", "synth needs --toy, --edge-map or --pgm");
    }
    write_sketch_file(o.out, out);
    return 0;
}

int run_render(const Options& o) {
    const std::vector<Sketch> data = read_sketch_file(o.data, sketch_format(o.format));
    if (o.index >= data.size())
        throw InvalidArgument("cli", "--index " + std::to_string(o.index) + " but the file has " +
                                         std::to_string(data.size()) + " sketches");
    write_text(o.out, render_svg(data[o.index]));
    return 0;
}

// Full-model gradient check on a toy sketch with the dynamic edges frozen.
int run_gradcheck(const Options& o) {
    const std::uint64_t seed = o.seed.value_or(0);
    ModelConfig config;
    config.sample_points = o.grad_points;
    if (o.k)
        config.k = *o.k;
    config.validate();
    const Sketch s = preprocess(make_toy_dataset(ToyKind::lollipop, 1, seed)[0], config.sample_points);
    const std::vector<int> targets = s.flat_labels();
    const ModelParams params = init_params(config, seed);

    std::vector<DynamicEdgeSet> frozen;
    {
        Tape tape;
        BoundParams bound(tape, params, false);
        frozen = forward(tape, bound, s, config).dynamic_edges;
    }
    const ScalarFunction loss = [&](Tape& tape, std::span<const Var> vars) {
        BoundParams bound(params, std::vector<Var>(vars.begin(), vars.end()));
        ForwardOptions opts;
        opts.frozen_edges = &frozen;
        return cross_entropy(forward(tape, bound, s, config, opts).logits, targets);
    };
    const GradCheckResult r = gradient_check(loss, params.tensors(), {.seed = seed});
    const bool ok = r.max_rel_error < 1e-4;
    nlohmann::ordered_json j{{"points", config.sample_points},
                             {"seed", seed},
                             {"coords_checked", r.coords_checked},
                             {"max_rel_error", r.max_rel_error},
                             {"pass", ok}};
    std::cout << "max relative error " << r.max_rel_error << " over " << r.coords_checked
              << " coordinates\n";
    if (!o.out.empty())
        write_text(o.out, j.dump(2) + "\n");
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SketchGNN: vector sketch semantic segmentation"};
    app.require_subcommand(1);
    Options o;

    const auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "random seed"); };
    const auto add_format = [&](CLI::App* c) {
        c->add_option("--format", o.format, "input format: native or quickdraw")
            ->check(CLI::IsMember({"native", "quickdraw"}));
    };
    const auto add_data = [&](CLI::App* c, const char* what) {
        c->add_option("--data,--in", o.data, what)->required()->check(CLI::ExistingFile);
    };

    auto* train = app.add_subcommand("train", "train a per-category model");
    train->add_option("--config", o.config, "key=value run configuration")->check(CLI::ExistingFile);
    add_data(train, "labeled sketches (NDJSON)");
    train->add_option("--out", o.out, "checkpoint path")->required();
    train->add_option("--history", o.history, "per-epoch JSON lines (default <out>.history.jsonl)");
    train->add_option("--labels", o.labels, "label map sidecar")->check(CLI::ExistingFile);
    train->add_option("--validation", o.validation, "sketches held out for validation");
    train->add_option("--n-points", o.n_points, "points per resampled sketch");
    train->add_option("--k", o.k, "neighbors per dynamic graph node");
    train->add_option("--rdp-epsilon", o.rdp_epsilon, "simplification tolerance in pixels");
    add_seed(train);
    add_format(train);

    auto* eval = app.add_subcommand("eval", "score a checkpoint on labeled sketches");
    eval->add_option("--checkpoint", o.checkpoint, "checkpoint path")->required()->check(CLI::ExistingFile);
    add_data(eval, "labeled test sketches");
    eval->add_option("--out", o.out, "report path")->required();
    eval->add_option("--perturb", o.perturb, "perturbation spec; repeat for a sweep");
    eval->add_option("--rdp-epsilon", o.rdp_epsilon, "simplification tolerance in pixels");
    add_seed(eval);
    add_format(eval);

    auto* inf = app.add_subcommand("infer", "label sketches with a checkpoint");
    inf->add_option("--checkpoint", o.checkpoint, "checkpoint path")->required()->check(CLI::ExistingFile);
    add_data(inf, "sketches to label");
    inf->add_option("--out", o.out, "labeled NDJSON output")->required();
    inf->add_option("--rdp-epsilon", o.rdp_epsilon, "simplification tolerance in pixels");
    add_format(inf);

    auto* pert = app.add_subcommand("perturb", "apply a perturbation to every sketch");
    add_data(pert, "input sketches");
    pert->add_option("--perturb", o.perturb, "perturbation spec, e.g. point_noise,sigma=4")->required();
    pert->add_option("--out", o.out, "NDJSON output")->required();
    add_seed(pert);
    add_format(pert);

    auto* synth = app.add_subcommand("synth", "generate labeled sketches");
    synth->add_option("--toy", o.toy, "toy dataset: lollipop, two_bars or cross");
    synth->add_option("--count", o.count, "number of toy sketches");
    synth->add_option("--jitter", o.jitter, "toy jitter scale (0 = canonical shape)");
    synth->add_option("--edge-map", o.edge_map, "text edge map to trace")->check(CLI::ExistingFile);
    synth->add_option("--pgm", o.pgm, "binary PGM edge image to trace")->check(CLI::ExistingFile);
    synth->add_option("--pgm-labels", o.pgm_labels, "PGM label image")->check(CLI::ExistingFile);
    synth->add_option("--category", o.category, "category written on traced sketches");
    synth->add_option("--out", o.out, "NDJSON output")->required();
    add_seed(synth);

    auto* render = app.add_subcommand("render", "draw a labeled sketch as SVG");
    add_data(render, "sketch NDJSON");
    render->add_option("--index", o.index, "which sketch of the file");
    render->add_option("--out", o.out, "SVG output")->required();
    add_format(render);

    auto* grad = app.add_subcommand("gradcheck", "finite-difference check of the full model");
    grad->add_option("--n,--n-points", o.grad_points, "points in the test sketch");
    grad->add_option("--k", o.k, "neighbors per dynamic graph node");
    grad->add_option("--out", o.out, "optional JSON result");
    add_seed(grad);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*train)
            return run_train(o);
        if (*eval)
            return run_eval(o);
        if (*inf)
            return run_infer(o);
        if (*pert)
            return run_perturb(o);
        if (*synth)
            return run_synth(o);
        if (*render)
            return run_render(o);
        if (*grad)
            return run_gradcheck(o);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
