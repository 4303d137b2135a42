#pragma once

#include "sketchgnn/model.hpp"
#include "sketchgnn/perturb.hpp"
#include "sketchgnn/sketch.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sketchgnn {

inline constexpr int kRasterSize = 256;
inline constexpr int kEmptyPixel = -1;

/// Label rasters on the 256x256 canvas. Undrawn pixels hold kEmptyPixel in
/// all three planes.
struct RasterLabels {
    int width = kRasterSize;
    int height = kRasterSize;
    std::vector<int> gt;
    std::vector<int> pred;
    std::vector<int> owner_stroke;

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(x);
    }
};

/// Integer line from (x0,y0) to (x1,y1) inclusive, in drawing order.
std::vector<std::pair<int, int>> line_pixels(int x0, int y0, int x1, int y1);

/// Draws every stroke segment as a 1-px line; the last segment drawn in
/// (stroke, segment) order owns a pixel. A segment carries the label of its
/// starting point. `truth` and `pred` must share geometry.
RasterLabels rasterize(const Sketch& truth, const Sketch& pred);

double p_metric(const RasterLabels& r);

/// Fraction of strokes with at least 75% of their owned pixels correct. A
/// stroke that owns no pixel is judged on its point labels instead.
double c_metric(const RasterLabels& r, const Sketch& truth, const Sketch& pred);

struct SketchScore {
    double p_metric = 0.0;
    double c_metric = 0.0;

    friend bool operator==(const SketchScore&, const SketchScore&) = default;
};

struct EvalReport {
    std::string category;
    std::string checkpoint;
    std::optional<PerturbationSpec> perturbation;
    std::vector<SketchScore> per_sketch;
    double p_metric = 0.0;
    double c_metric = 0.0;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

std::string report_to_json(const EvalReport& report);
std::string sweep_to_json(const std::vector<EvalReport>& reports);

/// Maps a resampled sketch to one predicted class per point.
using Predictor = std::function<std::vector<int>(const Sketch& resampled)>;

Predictor model_predictor(const Checkpoint& ckpt);

struct EvalOptions {
    std::optional<PerturbationSpec> perturbation;
    std::uint64_t seed = 0;
    std::size_t sample_points = 256;
    double rdp_epsilon = kDefaultRdpEpsilon;
    std::size_t threads = 1;
};

/// Scores one labeled sketch: optional perturbation, normalize, resample,
/// predict, map labels back, rasterize, metrics.
SketchScore evaluate_sketch(const Sketch& s, const Predictor& predictor,
                            const EvalOptions& opts, std::uint64_t sketch_seed);

EvalReport evaluate(const std::vector<Sketch>& sketches, const Predictor& predictor,
                    const EvalOptions& opts);

/// Checkpoint flavour: uses its sample_points and checks the category.
EvalReport evaluate(const std::vector<Sketch>& sketches, const Checkpoint& ckpt,
                    const std::string& checkpoint_id, EvalOptions opts);

/// Runs the full prediction path on one sketch and returns it relabeled.
Sketch infer(const Sketch& s, const Checkpoint& ckpt, double rdp_epsilon = kDefaultRdpEpsilon);

} // namespace sketchgnn
