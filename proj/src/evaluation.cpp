#include "sketchgnn/evaluation.hpp"

#include "sketchgnn/errors.hpp"
#include "sketchgnn/parallel.hpp"
#include "sketchgnn/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace sketchgnn {

namespace {

const char* kModule = "evaluation";

int to_pixel(double v) {
    return std::clamp(static_cast<int>(std::lround(v)), 0, kRasterSize - 1);
}

nlohmann::ordered_json report_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["category"] = report.category;
    j["checkpoint"] = report.checkpoint;
    j["perturbation"] = report.perturbation ? nlohmann::ordered_json(to_string(*report.perturbation))
                                            : nlohmann::ordered_json(nullptr);
    auto per = nlohmann::ordered_json::array();
    for (const auto& s : report.per_sketch)
        per.push_back({{"p_metric", s.p_metric}, {"c_metric", s.c_metric}});
    j["per_sketch"] = std::move(per);
    j["p_metric"] = report.p_metric;
    j["c_metric"] = report.c_metric;
    return j;
}

} // namespace

std::vector<std::pair<int, int>> line_pixels(int x0, int y0, int x1, int y1) {
    std::vector<std::pair<int, int>> out;
    const int dx = std::abs(x1 - x0);
    const int dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1;
    const int sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
        out.emplace_back(x0, y0);
        if (x0 == x1 && y0 == y1)
            break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
    return out;
}

RasterLabels rasterize(const Sketch& truth, const Sketch& pred) {
    if (!truth.labeled() || !pred.labeled())
        throw ValidationError(kModule, "rasterize needs labels on both sketches");
    if (truth.strokes.size() != pred.strokes.size())
        throw ValidationError(kModule, "ground truth and prediction differ in stroke count");
    RasterLabels r;
    const auto pixels = static_cast<std::size_t>(r.width) * static_cast<std::size_t>(r.height);
    r.gt.assign(pixels, kEmptyPixel);
    r.pred.assign(pixels, kEmptyPixel);
    r.owner_stroke.assign(pixels, kEmptyPixel);

    auto paint = [&](int x, int y, int gt, int pr, int stroke) {
        const auto i = r.index(x, y);
        r.gt[i] = gt;
        r.pred[i] = pr;
        r.owner_stroke[i] = stroke;
    };
    for (std::size_t s = 0; s < truth.strokes.size(); ++s) {
        const auto& ts = truth.strokes[s];
        const auto& ps = pred.strokes[s];
        if (ts.size() != ps.size())
            throw ValidationError(kModule, "stroke " + std::to_string(s) +
                                               " differs in point count");
        const int stroke = static_cast<int>(s);
        if (ts.size() == 1) {
            paint(to_pixel(ts.points[0].x), to_pixel(ts.points[0].y), ts.labels[0], ps.labels[0],
                  stroke);
            continue;
        }
        for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
            const auto& a = ts.points[k];
            const auto& b = ts.points[k + 1];
            for (auto [x, y] : line_pixels(to_pixel(a.x), to_pixel(a.y), to_pixel(b.x), to_pixel(b.y)))
                paint(x, y, ts.labels[k], ps.labels[k], stroke);
        }
    }
    return r;
}

double p_metric(const RasterLabels& r) {
    std::size_t drawn = 0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < r.gt.size(); ++i) {
        if (r.gt[i] == kEmptyPixel)
            continue;
        ++drawn;
        correct += r.gt[i] == r.pred[i];
    }
    if (drawn == 0)
        throw DegenerateInput(kModule, "p_metric on a raster with no drawn pixels");
    return static_cast<double>(correct) / static_cast<double>(drawn);
}

double c_metric(const RasterLabels& r, const Sketch& truth, const Sketch& pred) {
    const std::size_t strokes = truth.strokes.size();
    if (strokes == 0)
        throw DegenerateInput(kModule, "c_metric on a sketch with no strokes");
    std::vector<std::size_t> owned(strokes, 0);
    std::vector<std::size_t> correct(strokes, 0);
    for (std::size_t i = 0; i < r.owner_stroke.size(); ++i) {
        const int s = r.owner_stroke[i];
        if (s == kEmptyPixel)
            continue;
        if (static_cast<std::size_t>(s) >= strokes)
            throw ValidationError(kModule, "raster owner index exceeds stroke count");
        ++owned[static_cast<std::size_t>(s)];
        correct[static_cast<std::size_t>(s)] += r.gt[i] == r.pred[i];
    }
    std::size_t passing = 0;
    for (std::size_t s = 0; s < strokes; ++s) {
        if (owned[s] == 0) {
            // Fully overdrawn stroke: judge it on its points.
            const auto& t = truth.strokes[s].labels;
            const auto& p = pred.strokes[s].labels;
            owned[s] = t.size();
            for (std::size_t k = 0; k < t.size(); ++k)
                correct[s] += t[k] == p[k];
        }
        // correct / owned >= 0.75, in integers
        if (owned[s] > 0 && 4 * correct[s] >= 3 * owned[s])
            ++passing;
    }
    return static_cast<double>(passing) / static_cast<double>(strokes);
}

std::string report_to_json(const EvalReport& report) { return report_json(report).dump(); }

std::string sweep_to_json(const std::vector<EvalReport>& reports) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : reports)
        arr.push_back(report_json(r));
    return arr.dump();
}

Predictor model_predictor(const Checkpoint& ckpt) {
    return [&ckpt](const Sketch& resampled) { return predict(ckpt.params, ckpt.config, resampled); };
}

SketchScore evaluate_sketch(const Sketch& s, const Predictor& predictor, const EvalOptions& opts,
                            std::uint64_t sketch_seed) {
    if (!s.labeled())
        throw ValidationError(kModule, "evaluation sketch is not labeled");
    const Sketch perturbed = opts.perturbation ? perturb(s, *opts.perturbation, sketch_seed) : s;
    const Sketch original = normalize_canvas(perturbed);
    const Sketch resampled =
        resample_points(rdp_simplify(original, opts.rdp_epsilon), opts.sample_points);
    const auto labels = predictor(resampled);
    const Sketch predicted = map_labels_back(original, resampled, labels);
    const RasterLabels raster = rasterize(original, predicted);
    return {p_metric(raster), c_metric(raster, original, predicted)};
}

EvalReport evaluate(const std::vector<Sketch>& sketches, const Predictor& predictor,
                    const EvalOptions& opts) {
    EvalReport report;
    report.perturbation = opts.perturbation;
    report.per_sketch.resize(sketches.size());
    parallel_for(sketches.size(), opts.threads, [&](std::size_t i) {
        report.per_sketch[i] = evaluate_sketch(sketches[i], predictor, opts,
                                               derive_seed(opts.seed, {i}));
    });
    for (const auto& s : report.per_sketch) {
        report.p_metric += s.p_metric;
        report.c_metric += s.c_metric;
    }
    if (!sketches.empty()) {
        report.p_metric /= static_cast<double>(sketches.size());
        report.c_metric /= static_cast<double>(sketches.size());
    }
    if (!sketches.empty())
        report.category = sketches.front().category;
    return report;
}

EvalReport evaluate(const std::vector<Sketch>& sketches, const Checkpoint& ckpt,
                    const std::string& checkpoint_id, EvalOptions opts) {
    for (const auto& s : sketches) {
        if (!ckpt.category.empty() && !s.category.empty() && s.category != ckpt.category)
            throw ValidationError(kModule, "sketch category '" + s.category +
                                               "' does not match checkpoint category '" +
                                               ckpt.category + "'");
    }
    opts.sample_points = ckpt.config.sample_points;
    EvalReport report = evaluate(sketches, model_predictor(ckpt), opts);
    report.checkpoint = checkpoint_id;
    if (!ckpt.category.empty())
        report.category = ckpt.category;
    return report;
}

Sketch infer(const Sketch& s, const Checkpoint& ckpt, double rdp_epsilon) {
    const Sketch original = normalize_canvas(s);
    const Sketch resampled =
        resample_points(rdp_simplify(original, rdp_epsilon), ckpt.config.sample_points);
    const auto labels = predict(ckpt.params, ckpt.config, resampled);
    // Labels go back onto the caller's coordinates, not the normalized copy.
    Sketch out = s;
    out.set_flat_labels(map_labels_back(original, resampled, labels).flat_labels());
    return out;
}

} // namespace sketchgnn
