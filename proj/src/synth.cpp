#include "sketchgnn/synth.hpp"

#include "sketchgnn/errors.hpp"
#include "sketchgnn/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace sketchgnn {

namespace {

const char* kModule = "synth";

struct Pixel {
    int x = 0;
    int y = 0;
};

constexpr std::array<Pixel, 8> kNeighbors = {
    {{-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}}};

// Included angle between two step vectors, in [0, pi].
double included_angle(double ax, double ay, double bx, double by) {
    const double dot = ax * bx + ay * by;
    const double cross = ax * by - ay * bx;
    return std::abs(std::atan2(cross, dot));
}

// Rotation from `dir` to `step` measured clockwise on screen (y down), in [0, 2pi).
double clockwise_angle(double dx, double dy, double sx, double sy) {
    double a = std::atan2(dx * sy - dy * sx, dx * sx + dy * sy);
    if (a < 0)
        a += 2 * std::numbers::pi;
    return a;
}

class Tracer {
public:
    explicit Tracer(const EdgeMap& map) : map_(map), done_(map.labels.size(), false) {}

    bool processed(int x, int y) const { return done_[map_.index(x, y)]; }
    void mark(int x, int y) { done_[map_.index(x, y)] = true; }

    // Walks from `start` (already marked) and returns the visited pixels,
    // excluding the start.
    std::vector<Pixel> grow(Pixel start, double dir_x, double dir_y) {
        std::vector<Pixel> path;
        Pixel cur = start;
        for (;;) {
            bool found = false;
            Pixel best{};
            double best_angle = 0.0;
            double best_cw = 0.0;
            std::size_t best_index = 0;
            for (const auto& n : kNeighbors) {
                const int x = cur.x + n.x;
                const int y = cur.y + n.y;
                if (!map_.on(x, y) || processed(x, y))
                    continue;
                const double angle = included_angle(dir_x, dir_y, n.x, n.y);
                const double cw = clockwise_angle(dir_x, dir_y, n.x, n.y);
                const std::size_t idx = map_.index(x, y);
                constexpr double tol = 1e-12;
                const bool better =
                    !found || angle < best_angle - tol ||
                    (std::abs(angle - best_angle) <= tol &&
                     (cw < best_cw - tol || (std::abs(cw - best_cw) <= tol && idx < best_index)));
                if (better) {
                    found = true;
                    best = {x, y};
                    best_angle = angle;
                    best_cw = cw;
                    best_index = idx;
                }
            }
            if (!found)
                return path;
            dir_x = best.x - cur.x;
            dir_y = best.y - cur.y;
            mark(best.x, best.y);
            path.push_back(best);
            cur = best;
        }
    }

private:
    const EdgeMap& map_;
    std::vector<bool> done_;
};

bool adjacent(const Pixel& a, const Pixel& b) {
    return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)) == 1;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InvalidArgument(kModule, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Gray {
    int width = 0;
    int height = 0;
    std::vector<int> values;
};

Gray parse_pgm(const std::string& bytes, const std::string& path) {
    std::size_t pos = 0;
    auto token = [&]() {
        for (;;) {
            while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos])))
                ++pos;
            if (pos < bytes.size() && bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n')
                    ++pos;
                continue;
            }
            break;
        }
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])))
            ++pos;
        if (start == pos)
            throw ParseError(kModule, path + ": truncated PGM header");
        return bytes.substr(start, pos - start);
    };
    const std::string magic = token();
    if (magic != "P2" && magic != "P5")
        throw ParseError(kModule, path + ": not a PGM file");
    Gray g;
    g.width = std::stoi(token());
    g.height = std::stoi(token());
    const int maxval = std::stoi(token());
    if (g.width <= 0 || g.height <= 0 || maxval <= 0 || maxval > 255)
        throw ParseError(kModule, path + ": unsupported PGM dimensions or depth");
    const auto count = static_cast<std::size_t>(g.width) * static_cast<std::size_t>(g.height);
    g.values.reserve(count);
    if (magic == "P2") {
        for (std::size_t i = 0; i < count; ++i)
            g.values.push_back(std::stoi(token()));
    } else {
        ++pos; // single whitespace after maxval
        if (bytes.size() < pos + count)
            throw ParseError(kModule, path + ": truncated PGM raster");
        for (std::size_t i = 0; i < count; ++i)
            g.values.push_back(static_cast<unsigned char>(bytes[pos + i]));
    }
    return g;
}

Stroke polyline(const std::vector<Point>& pts, int label) {
    Stroke s;
    s.points = pts;
    s.labels.assign(pts.size(), label);
    return s;
}

std::vector<Point> segment(Point a, Point b, int n) {
    std::vector<Point> out;
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / (n - 1);
        out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
    }
    return out;
}

std::vector<Point> circle(Point c, double r, int n) {
    // Closed: the last point repeats the first.
    std::vector<Point> out;
    for (int i = 0; i < n; ++i) {
        const double a = 2 * std::numbers::pi * i / (n - 1) - std::numbers::pi / 2;
        out.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
    }
    out.back() = out.front();
    return out;
}

Sketch canonical(ToyKind kind) {
    Sketch s;
    s.category = to_string(kind);
    switch (kind) {
    case ToyKind::lollipop:
        s.strokes.push_back(polyline({{128, 240}, {128, 130}}, 0));
        s.strokes.push_back(polyline(circle({128, 80}, 50, 16), 1));
        break;
    case ToyKind::two_bars:
        s.strokes.push_back(polyline(segment({48, 96}, {208, 96}, 8), 0));
        s.strokes.push_back(polyline(segment({48, 160}, {208, 160}, 8), 1));
        break;
    case ToyKind::cross:
        // Even point counts keep the bars from sharing a vertex where they
        // cross, and the ring stays clear of the bar ends.
        s.strokes.push_back(polyline(segment({68, 128}, {188, 128}, 8), 0));
        s.strokes.push_back(polyline(segment({128, 68}, {128, 188}, 8), 1));
        s.strokes.push_back(polyline(circle({128, 128}, 88, 17), 2));
        break;
    }
    return s;
}

} // namespace

std::size_t EdgeMap::on_count() const {
    return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(),
                                                  [](int l) { return l >= 0; }));
}

EdgeMap parse_edge_map(std::string_view text) {
    std::stringstream ss{std::string(text)};
    EdgeMap m;
    std::string header;
    if (!std::getline(ss, header))
        throw ParseError(kModule, "edge map is empty");
    std::stringstream hs(header);
    if (!(hs >> m.width >> m.height) || m.width <= 0 || m.height <= 0)
        throw ParseError(kModule, "edge map header must be \"W H\"");
    m.labels.assign(static_cast<std::size_t>(m.width) * static_cast<std::size_t>(m.height), -1);
    std::string row;
    for (int y = 0; y < m.height; ++y) {
        if (!std::getline(ss, row))
            throw ParseError(kModule, "edge map has " + std::to_string(y) + " of " +
                                          std::to_string(m.height) + " rows");
        if (!row.empty() && row.back() == '\r')
            row.pop_back();
        if (static_cast<int>(row.size()) != m.width)
            throw ParseError(kModule, "edge map row " + std::to_string(y) + " has " +
                                          std::to_string(row.size()) + " characters, expected " +
                                          std::to_string(m.width));
        for (int x = 0; x < m.width; ++x) {
            const char c = row[static_cast<std::size_t>(x)];
            if (c == '.')
                continue;
            if (c < '0' || c > '9')
                throw ParseError(kModule, std::string("edge map character '") + c +
                                              "' is neither '.' nor a digit");
            m.labels[m.index(x, y)] = c - '0';
        }
    }
    return m;
}

EdgeMap read_edge_map_file(const std::string& path) { return parse_edge_map(read_text(path)); }

EdgeMap read_pgm_edge_map(const std::string& edges_path, const std::string& labels_path) {
    const Gray edges = parse_pgm(read_text(edges_path), edges_path);
    Gray labels;
    if (!labels_path.empty()) {
        labels = parse_pgm(read_text(labels_path), labels_path);
        if (labels.width != edges.width || labels.height != edges.height)
            throw ValidationError(kModule, "label image size differs from edge image");
    }
    EdgeMap m;
    m.width = edges.width;
    m.height = edges.height;
    m.labels.assign(edges.values.size(), -1);
    for (std::size_t i = 0; i < edges.values.size(); ++i) {
        if (edges.values[i] != 0)
            m.labels[i] = labels_path.empty() ? 0 : labels.values[i];
    }
    return m;
}

Sketch trace_strokes(const EdgeMap& map, std::uint64_t seed, const std::string& category) {
    std::vector<Pixel> pending;
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x)
            if (map.on(x, y))
                pending.push_back({x, y});
    if (pending.empty())
        throw DegenerateInput(kModule, "edge map has no on-pixels");

    Tracer tracer(map);
    std::mt19937_64 rng(seed);
    std::vector<std::vector<Pixel>> strokes;
    while (!pending.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, pending.size() - 1);
        const std::size_t slot = pick(rng);
        const Pixel start = pending[slot];
        pending[slot] = pending.back();
        pending.pop_back();
        if (tracer.processed(start.x, start.y))
            continue;
        tracer.mark(start.x, start.y);

        auto forward = tracer.grow(start, 1.0, 0.0);
        std::vector<Pixel> backward;
        if (!forward.empty())
            backward = tracer.grow(start, start.x - forward.front().x, start.y - forward.front().y);

        std::vector<Pixel> stroke(backward.rbegin(), backward.rend());
        stroke.push_back(start);
        stroke.insert(stroke.end(), forward.begin(), forward.end());
        if (map.index(stroke.front().x, stroke.front().y) >
            map.index(stroke.back().x, stroke.back().y))
            std::reverse(stroke.begin(), stroke.end());
        strokes.push_back(std::move(stroke));
    }

    // Single-pixel strokes join a longer stroke whose endpoint touches them;
    // isolated pixels are dropped, others stay as one-point strokes.
    std::vector<std::vector<Pixel>> merged;
    std::vector<Pixel> singles;
    for (auto& s : strokes) {
        if (s.size() >= 2)
            merged.push_back(std::move(s));
        else
            singles.push_back(s.front());
    }
    for (const auto& p : singles) {
        bool joined = false;
        for (auto& s : merged) {
            if (adjacent(s.back(), p)) {
                s.push_back(p);
                joined = true;
            } else if (adjacent(s.front(), p)) {
                s.insert(s.begin(), p);
                joined = true;
            }
            if (joined)
                break;
        }
        if (joined)
            continue;
        const bool isolated = std::none_of(kNeighbors.begin(), kNeighbors.end(), [&](const Pixel& n) {
            return map.on(p.x + n.x, p.y + n.y);
        });
        if (!isolated)
            merged.push_back({p});
    }

    Sketch out;
    out.category = category;
    for (const auto& s : merged) {
        Stroke st;
        for (const auto& p : s) {
            st.points.push_back({static_cast<double>(p.x), static_cast<double>(p.y)});
            st.labels.push_back(map.labels[map.index(p.x, p.y)]);
        }
        out.strokes.push_back(std::move(st));
    }
    if (out.strokes.empty())
        throw DegenerateInput(kModule, "edge map holds only isolated pixels");
    return out;
}

ToyKind parse_toy_kind(std::string_view name) {
    if (name == "lollipop")
        return ToyKind::lollipop;
    if (name == "two_bars")
        return ToyKind::two_bars;
    if (name == "cross")
        return ToyKind::cross;
    throw InvalidArgument(kModule, "unknown toy dataset kind " + std::string(name));
}

std::string to_string(ToyKind kind) {
    switch (kind) {
    case ToyKind::lollipop: return "lollipop";
    case ToyKind::two_bars: return "two_bars";
    case ToyKind::cross: return "cross";
    }
    return "unknown";
}

LabelMap toy_label_map(ToyKind kind) {
    switch (kind) {
    case ToyKind::lollipop: return {"lollipop", {"stick", "head"}};
    case ToyKind::two_bars: return {"two_bars", {"top", "bottom"}};
    case ToyKind::cross: return {"cross", {"horizontal", "vertical", "ring"}};
    }
    return {};
}

std::vector<Sketch> make_toy_dataset(ToyKind kind, std::size_t count, std::uint64_t seed,
                                     double jitter) {
    if (count == 0)
        throw InvalidArgument(kModule, "toy dataset count must be >= 1");
    std::vector<Sketch> out;
    out.reserve(count);
    const Sketch base = canonical(kind);
    for (std::size_t i = 0; i < count; ++i) {
        std::mt19937_64 rng(derive_seed(seed, {i}));
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        const double angle = jitter * unit(rng) * 15.0 * std::numbers::pi / 180.0;
        const double scale = 1.0 + jitter * 0.2 * unit(rng);
        const double tx = jitter * 20.0 * unit(rng);
        const double ty = jitter * 20.0 * unit(rng);
        const double wobble = jitter * 1.5;
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        Sketch sk = base;
        for (auto& st : sk.strokes) {
            for (auto& p : st.points) {
                const double dx = (p.x - 128) * scale;
                const double dy = (p.y - 128) * scale;
                p = {128 + c * dx - s * dy + tx + wobble * unit(rng),
                     128 + s * dx + c * dy + ty + wobble * unit(rng)};
            }
        }
        out.push_back(std::move(sk));
    }
    return out;
}

} // namespace sketchgnn
