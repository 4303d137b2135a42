#pragma once

#include "sketchgnn/model.hpp"
#include "sketchgnn/perturb.hpp"
#include "sketchgnn/sketch.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace sketchgnn {

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double lr = 0.002;
    std::size_t lr_decay_interval = 50;
    double lr_decay_factor = 0.5;
    std::uint64_t seed = 0;
    /// Each epoch a training sketch is perturbed with probability
    /// `augment_prob` by one spec drawn uniformly from this list.
    std::vector<PerturbationSpec> augmentation;
    double augment_prob = 0.5;
    double rdp_epsilon = kDefaultRdpEpsilon;
    /// Worker threads for per-sketch forward/backward inside a batch.
    std::size_t threads = 1;
    std::string category;
    std::vector<std::string> classes;

    void validate() const;
};

/// Model and training settings read from one flat key=value file.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
};

/// Keys: epochs, batch_size, lr, lr_decay_interval, lr_decay_factor, seed,
/// n_points, k, dilations, units, num_classes, augment (repeatable),
/// augment_prob, rdp_epsilon, threads, category. '#' starts a comment.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
RunConfig load_run_config(const std::string& path, RunConfig base = {});

/// lr0 * factor^floor(epoch / interval)
double learning_rate(const TrainConfig& config, std::size_t epoch);

DatasetSplit split_dataset(const std::vector<Sketch>& sketches, std::size_t train,
                           std::size_t validation, std::size_t test, std::uint64_t seed);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

std::string to_json_line(const EpochRecord& r);

/// Index of the lowest validation loss (earliest on ties).
std::size_t select_best_epoch(const std::vector<EpochRecord>& history);

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;
/// Checked after every epoch with the current (not the best) parameters;
/// returning true ends training early.
using StopCondition = std::function<bool(const EpochRecord&, const ModelParams&)>;

/// Mean cross-entropy over all points of `sketches` in eval mode.
double dataset_loss(const ModelParams& params, const ModelConfig& config,
                    const std::vector<Sketch>& sketches);

/// Fraction of points whose eval-mode argmax equals the label.
double point_accuracy(const ModelParams& params, const ModelConfig& config,
                      const std::vector<Sketch>& sketches);

/// Trains one per-category model. Sketches must be labeled, normalized and
/// resampled to `model.sample_points`. Returns the parameters of the epoch
/// with the lowest validation loss.
TrainResult train(const DatasetSplit& split, const ModelConfig& model, const TrainConfig& config,
                  const EpochCallback& on_epoch = {}, const StopCondition& stop_when = {});

} // namespace sketchgnn
