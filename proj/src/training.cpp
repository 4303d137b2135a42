#include "sketchgnn/training.hpp"

#include "sketchgnn/adam.hpp"
#include "sketchgnn/errors.hpp"
#include "sketchgnn/parallel.hpp"
#include "sketchgnn/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace sketchgnn {

namespace {

const char* kModule = "training";

std::string trim(std::string s) {
    s.erase(0, s.find_first_not_of(" \t\r"));
    s.erase(s.find_last_not_of(" \t\r") + 1);
    return s;
}

std::size_t to_count(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long n = std::stoll(v, &used);
        if (used == v.size() && n >= 0)
            return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
    throw ParseError(kModule, "config key " + key + " needs a non-negative integer, got " + v);
}

double to_real(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size())
            return d;
    } catch (const std::exception&) {
    }
    throw ParseError(kModule, "config key " + key + " needs a number, got " + v);
}

void check_training_sketch(const Sketch& s, const ModelConfig& model) {
    if (!s.labeled())
        throw ValidationError(kModule, "training sketch is not labeled");
    validate(s, static_cast<int>(model.num_classes));
    if (s.point_count() != model.sample_points)
        throw ValidationError(kModule, "training sketch has " + std::to_string(s.point_count()) +
                                           " points, expected " +
                                           std::to_string(model.sample_points));
}

struct SketchGradient {
    double loss = 0.0;
    std::vector<Tensor> grads;
};

// Loss of one sketch and the gradient of `weight * loss`.
SketchGradient sketch_gradient(const ModelParams& params, const ModelConfig& model,
                               const Sketch& s, double weight, std::uint64_t seed) {
    Tape tape;
    BoundParams bound(tape, params, true);
    auto result = forward(tape, bound, s, model, {.mode = KnnMode::train, .seed = seed});
    const auto targets = s.flat_labels();
    Var loss = cross_entropy(result.logits, targets);
    tape.backward(loss, weight);
    SketchGradient out;
    out.loss = loss.value()[0];
    out.grads.reserve(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
        const Tensor& g = bound.vars()[k].grad();
        out.grads.push_back(g.size() == 0 ? Tensor(params.tensors()[k].shape(), 0.0) : g);
    }
    return out;
}

} // namespace

void TrainConfig::validate() const {
    if (epochs == 0)
        throw InvalidArgument(kModule, "epochs must be >= 1");
    if (batch_size == 0)
        throw InvalidArgument(kModule, "batch_size must be >= 1");
    if (!(lr >= 0.0) || !std::isfinite(lr))
        throw InvalidArgument(kModule, "lr must be a finite value >= 0");
    if (lr_decay_interval == 0)
        throw InvalidArgument(kModule, "lr_decay_interval must be >= 1");
    if (!(augment_prob >= 0.0 && augment_prob <= 1.0))
        throw InvalidArgument(kModule, "augment_prob must lie in [0, 1]");
}

RunConfig parse_run_config(std::string_view text, RunConfig base) {
    RunConfig cfg = std::move(base);
    std::stringstream ss{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    bool dilations_set = false;
    while (std::getline(ss, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(kModule, "config line " + std::to_string(lineno) +
                                               ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto& m = cfg.model;
        auto& t = cfg.train;
        if (key == "epochs") t.epochs = to_count(key, value);
        else if (key == "batch_size") t.batch_size = to_count(key, value);
        else if (key == "lr") t.lr = to_real(key, value);
        else if (key == "lr_decay_interval") t.lr_decay_interval = to_count(key, value);
        else if (key == "lr_decay_factor") t.lr_decay_factor = to_real(key, value);
        else if (key == "seed") t.seed = to_count(key, value);
        else if (key == "augment_prob") t.augment_prob = to_real(key, value);
        else if (key == "rdp_epsilon") t.rdp_epsilon = to_real(key, value);
        else if (key == "threads") t.threads = to_count(key, value);
        else if (key == "category") t.category = value;
        else if (key == "augment") t.augmentation.push_back(parse_perturbation(value));
        else if (key == "n_points") m.sample_points = to_count(key, value);
        else if (key == "k") m.k = to_count(key, value);
        else if (key == "units") m.units_per_branch = to_count(key, value);
        else if (key == "num_classes") m.num_classes = to_count(key, value);
        else if (key == "dilations") {
            m.dilations.clear();
            std::stringstream ds(value);
            std::string item;
            while (std::getline(ds, item, ','))
                m.dilations.push_back(to_count(key, trim(item)));
            dilations_set = true;
        } else {
            throw ParseError(kModule, "config line " + std::to_string(lineno) +
                                               ": unknown key " + key);
        }
    }
    // A shorter or longer stack without explicit dilations repeats the last one.
    if (!dilations_set && cfg.model.dilations.size() != cfg.model.units_per_branch) {
        const std::size_t last = cfg.model.dilations.empty() ? 1 : cfg.model.dilations.back();
        cfg.model.dilations.resize(cfg.model.units_per_branch, last);
    }
    cfg.model.validate();
    cfg.train.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in)
        throw InvalidArgument(kModule, "cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), std::move(base));
}

double learning_rate(const TrainConfig& config, std::size_t epoch) {
    const auto steps = static_cast<double>(epoch / config.lr_decay_interval);
    return config.lr * std::pow(config.lr_decay_factor, steps);
}

DatasetSplit split_dataset(const std::vector<Sketch>& sketches, std::size_t train,
                           std::size_t validation, std::size_t test, std::uint64_t seed) {
    if (train + validation + test > sketches.size())
        throw InvalidArgument(kModule, "split needs " +
                                           std::to_string(train + validation + test) +
                                           " sketches, have " + std::to_string(sketches.size()));
    std::vector<std::size_t> order(sketches.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    DatasetSplit split;
    split.seed = seed;
    std::size_t k = 0;
    for (auto* part : {&split.train, &split.validation, &split.test}) {
        const std::size_t count =
            part == &split.train ? train : part == &split.validation ? validation : test;
        for (std::size_t i = 0; i < count; ++i)
            part->push_back(sketches[order[k++]]);
    }
    return split;
}

std::string to_json_line(const EpochRecord& r) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["train_loss"] = r.train_loss;
    j["val_loss"] = r.val_loss;
    j["lr"] = r.lr;
    return j.dump();
}

std::size_t select_best_epoch(const std::vector<EpochRecord>& history) {
    if (history.empty())
        throw InvalidArgument(kModule, "empty training history");
    std::size_t best = 0;
    for (std::size_t i = 1; i < history.size(); ++i)
        if (history[i].val_loss < history[best].val_loss)
            best = i;
    return best;
}

double dataset_loss(const ModelParams& params, const ModelConfig& config,
                    const std::vector<Sketch>& sketches) {
    double total = 0.0;
    std::size_t points = 0;
    for (const auto& s : sketches) {
        Tape tape;
        BoundParams bound(tape, params, false);
        auto result = forward(tape, bound, s, config);
        const auto targets = s.flat_labels();
        total += cross_entropy(result.logits, targets).value()[0] *
                 static_cast<double>(targets.size());
        points += targets.size();
    }
    return points == 0 ? 0.0 : total / static_cast<double>(points);
}

double point_accuracy(const ModelParams& params, const ModelConfig& config,
                      const std::vector<Sketch>& sketches) {
    std::size_t correct = 0;
    std::size_t points = 0;
    for (const auto& s : sketches) {
        const auto pred = predict(params, config, s);
        const auto truth = s.flat_labels();
        for (std::size_t i = 0; i < pred.size(); ++i)
            correct += pred[i] == truth[i];
        points += pred.size();
    }
    return points == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(points);
}

TrainResult train(const DatasetSplit& split, const ModelConfig& model, const TrainConfig& config,
                  const EpochCallback& on_epoch, const StopCondition& stop_when) {
    model.validate();
    config.validate();
    if (split.train.empty())
        throw InvalidArgument(kModule, "training set is empty");
    for (const auto& s : split.train)
        check_training_sketch(s, model);
    for (const auto& s : split.validation)
        check_training_sketch(s, model);

    ModelParams params = init_params(model, derive_seed(config.seed, {0}));
    AdamState adam;
    adam.lr = config.lr;

    TrainResult result;
    result.checkpoint = {model, params, config.category, config.classes, config.seed, 0};
    std::mt19937_64 shuffle_rng(derive_seed(config.seed, {1}));
    std::vector<std::size_t> order(split.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        adam.lr = learning_rate(config, epoch);
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0.0;
        std::size_t epoch_points = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            const std::size_t batch = stop - start;
            const double weight = 1.0 / static_cast<double>(batch);

            std::vector<SketchGradient> parts(batch);
            parallel_for(batch, config.threads, [&](std::size_t b) {
                const std::size_t idx = order[start + b];
                const auto seed = derive_seed(config.seed, {2, epoch, idx});
                const Sketch* s = &split.train[idx];
                Sketch augmented;
                if (!config.augmentation.empty()) {
                    std::mt19937_64 rng(derive_seed(seed, {0}));
                    std::uniform_real_distribution<double> coin(0.0, 1.0);
                    if (coin(rng) < config.augment_prob) {
                        std::uniform_int_distribution<std::size_t> pick(
                            0, config.augmentation.size() - 1);
                        const auto& spec = config.augmentation[pick(rng)];
                        augmented = preprocess(perturb(*s, spec, derive_seed(seed, {1})),
                                               model.sample_points, config.rdp_epsilon);
                        check_training_sketch(augmented, model);
                        s = &augmented;
                    }
                }
                // Every sketch has sample_points points, so the batch mean over
                // points equals the mean of per-sketch means.
                parts[b] = sketch_gradient(params, model, *s, weight, derive_seed(seed, {2}));
            });

            // Accumulate in batch order so runs do not depend on thread timing.
            std::vector<Tensor> grads = std::move(parts[0].grads);
            epoch_loss += parts[0].loss * static_cast<double>(model.sample_points);
            for (std::size_t b = 1; b < batch; ++b) {
                for (std::size_t k = 0; k < grads.size(); ++k) {
                    auto dst = grads[k].data();
                    auto src = parts[b].grads[k].data();
                    for (std::size_t i = 0; i < dst.size(); ++i)
                        dst[i] += src[i];
                }
                epoch_loss += parts[b].loss * static_cast<double>(model.sample_points);
            }
            epoch_points += batch * model.sample_points;
            adam_step(params.tensors(), grads, adam);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = adam.lr;
        rec.train_loss = epoch_loss / static_cast<double>(epoch_points);
        if (!std::isfinite(rec.train_loss))
            throw NumericsError(kModule, "non-finite training loss at epoch " +
                                             std::to_string(epoch));
        // Without a validation set the training loss stands in for selection.
        rec.val_loss = split.validation.empty() ? rec.train_loss
                                                : dataset_loss(params, model, split.validation);
        result.history.push_back(rec);
        if (result.history.size() == 1 || rec.val_loss < result.history[result.best_epoch].val_loss) {
            result.best_epoch = epoch;
            result.checkpoint.params = params;
            result.checkpoint.epoch = epoch;
        }
        if (on_epoch)
            on_epoch(rec);
        if (stop_when && stop_when(rec, params))
            break;
    }
    return result;
}

} // namespace sketchgnn
