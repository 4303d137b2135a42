#pragma once

#include "sketchgnn/sketch.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace sketchgnn {

enum class PerturbKind { rotate, point_noise, break_strokes, stroke_offset, scribble };

/// How scribbled strokes are labeled: a dedicated extra class, or a class
/// drawn uniformly from the labels already present in the sketch.
enum class ScribbleLabel { new_class, existing };

struct PerturbationSpec {
    PerturbKind kind = PerturbKind::point_noise;
    double theta_deg = 0.0;  // rotate: angle uniform in [-theta, theta]
    double sigma = 0.0;      // point_noise: per-coordinate N(0, sigma^2), pixels
    int psi = 1;             // break_strokes: pieces of at most 10N / (2^psi * n_s) points
    double eta = 0.0;        // stroke_offset: per-stroke U(-eta*256, eta*256)
    int scribble_count = 1;
    ScribbleLabel scribble_label = ScribbleLabel::new_class;
    int scribble_class = -1; // label used with ScribbleLabel::new_class

    friend bool operator==(const PerturbationSpec&, const PerturbationSpec&) = default;
};

/// Parses "kind=point_noise,sigma=4" style specs (also accepts a bare kind as
/// the first item, e.g. "rotate,theta=30").
PerturbationSpec parse_perturbation(std::string_view text);
std::string to_string(const PerturbationSpec& spec);
std::string to_string(PerturbKind kind);

/// Maximum piece length used by break_strokes, floored and at least 1.
std::size_t break_piece_length(std::size_t points, std::size_t strokes, int psi);

Sketch perturb(const Sketch& s, const PerturbationSpec& spec, std::uint64_t seed);

/// Random-walk stroke of 8-24 points with 4-12 px steps, reflected at the
/// canvas border.
Stroke scribble_stroke(std::uint64_t seed);

} // namespace sketchgnn
