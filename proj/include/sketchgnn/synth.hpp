#pragma once

#include "sketchgnn/sketch.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sketchgnn {

/// Binary edge raster with a class label on every on-pixel. Off pixels hold -1.
struct EdgeMap {
    int width = 0;
    int height = 0;
    std::vector<int> labels;

    bool on(int x, int y) const {
        return x >= 0 && y >= 0 && x < width && y < height && labels[index(x, y)] >= 0;
    }
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(x);
    }
    std::size_t on_count() const;
};

/// Text grid: "W H" then H rows of W characters, '.' off and '0'-'9' an
/// on-pixel with that label.
EdgeMap parse_edge_map(std::string_view text);
EdgeMap read_edge_map_file(const std::string& path);

/// Binary PGM (P2 or P5) edge image: nonzero pixels are on. The optional label
/// image gives the class of each on-pixel as its gray value; without one every
/// on-pixel gets class 0.
EdgeMap read_pgm_edge_map(const std::string& edges_path, const std::string& labels_path = {});

/// Greedy stroke tracing: seed a stroke at a random unprocessed pixel, then
/// keep stepping to the unprocessed 8-neighbor whose direction makes the
/// smallest angle with the current stroke direction (initially horizontal).
/// Growth continues backwards from the seed once the forward walk stops, and
/// every stroke is oriented to start at its lower pixel index.
Sketch trace_strokes(const EdgeMap& map, std::uint64_t seed, const std::string& category = {});

enum class ToyKind { lollipop, two_bars, cross };

ToyKind parse_toy_kind(std::string_view name);
std::string to_string(ToyKind kind);
LabelMap toy_label_map(ToyKind kind);

/// Parametric labeled sketches. `jitter` scales the random translation,
/// scale and rotation; 0 gives the canonical shape every time.
std::vector<Sketch> make_toy_dataset(ToyKind kind, std::size_t count, std::uint64_t seed,
                                     double jitter = 1.0);

} // namespace sketchgnn
