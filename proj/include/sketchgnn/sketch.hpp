#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sketchgnn {

inline constexpr double kCanvasSize = 256.0;
inline constexpr double kDefaultRdpEpsilon = 2.0;

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// An ordered polyline. `labels` is either empty (unlabeled) or holds one
/// class index per point.
struct Stroke {
    std::vector<Point> points;
    std::vector<int> labels;

    bool labeled() const { return !labels.empty(); }
    std::size_t size() const { return points.size(); }
    double arc_length() const;

    friend bool operator==(const Stroke&, const Stroke&) = default;
};

struct Sketch {
    std::vector<Stroke> strokes;
    std::string category;

    std::size_t point_count() const;
    bool labeled() const;

    /// Points and labels flattened in stroke order (the node order of the graph).
    std::vector<Point> flat_points() const;
    std::vector<int> flat_labels() const;
    /// Stroke index of every flattened point.
    std::vector<int> stroke_of() const;

    /// Replaces the labels with one class per flattened point.
    void set_flat_labels(std::span<const int> labels);

    friend bool operator==(const Sketch&, const Sketch&) = default;
};

struct DatasetSplit {
    std::vector<Sketch> train;
    std::vector<Sketch> validation;
    std::vector<Sketch> test;
    std::uint64_t seed = 0;
};

/// Per-category class names; the number of classes C is `classes.size()`.
struct LabelMap {
    std::string category;
    std::vector<std::string> classes;
};

enum class SketchFormat { native, quickdraw };

/// Throws ValidationError if the sketch breaks a structural invariant
/// (no strokes, an empty stroke, label/point count mismatch, or a label outside
/// [0, num_classes) when num_classes > 0).
void validate(const Sketch& s, int num_classes = 0);

Sketch parse_sketch(std::string_view text, SketchFormat format = SketchFormat::native);
std::string to_ndjson(const Sketch& s);

std::vector<Sketch> read_sketches(std::istream& in, SketchFormat format = SketchFormat::native);
std::vector<Sketch> read_sketch_file(const std::string& path,
                                     SketchFormat format = SketchFormat::native);
void write_sketches(std::ostream& out, std::span<const Sketch> sketches);
void write_sketch_file(const std::string& path, std::span<const Sketch> sketches);

LabelMap parse_label_map(std::string_view text);
LabelMap read_label_map_file(const std::string& path);

// Preprocessing chain.

/// Uniformly scales and translates so the bounding box fits [0,256]^2, touching
/// it along the longer axis and centered along the shorter one. A sketch whose
/// points all coincide is translated to the canvas center without scaling.
Sketch normalize_canvas(const Sketch& s);

Stroke rdp_simplify(const Stroke& stroke, double epsilon);
Sketch rdp_simplify(const Sketch& s, double epsilon = kDefaultRdpEpsilon);

/// Number of points each stroke receives when resampling to `n` points.
std::vector<std::size_t> resample_allocation(const Sketch& s, std::size_t n);
Sketch resample_points(const Sketch& s, std::size_t n);

/// Gives every original point the predicted label of its nearest resampled
/// point (ties go to the lower resampled index).
Sketch map_labels_back(const Sketch& original, const Sketch& resampled,
                       std::span<const int> predicted);

/// normalize -> simplify -> resample
Sketch preprocess(const Sketch& s, std::size_t n, double epsilon = kDefaultRdpEpsilon);

} // namespace sketchgnn
