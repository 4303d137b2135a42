#pragma once

#include "sketchgnn/sketch.hpp"

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace sketchgnn {

inline constexpr std::array<const char*, 12> kPalette = {
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4",
    "#f032e6", "#9a6324", "#469990", "#800000", "#808000", "#000075"};

/// Color of a class index; unlabeled strokes are drawn black.
const char* class_color(int label);

/// One <polyline> per stroke, colored by the stroke's most frequent label
/// (lowest class on ties). Coordinates are written with 4 decimals.
std::string render_svg(const Sketch& s);

/// Reads back the point lists of every <polyline> in document order.
std::vector<std::vector<Point>> parse_svg_polylines(std::string_view svg);

} // namespace sketchgnn
