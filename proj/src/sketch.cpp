#include "sketchgnn/sketch.hpp"

#include "sketchgnn/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace sketchgnn {

using nlohmann::json;

namespace {

const char* kModule = "sketch_io";

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

double squared_distance(const Point& a, const Point& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

// Distance from p to the segment [a, b].
double segment_distance(const Point& p, const Point& a, const Point& b) {
    const double vx = b.x - a.x;
    const double vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    if (len2 == 0.0)
        return distance(p, a);
    double t = ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, Point{a.x + t * vx, a.y + t * vy});
}

double number(const json& v) {
    if (!v.is_number())
        throw ParseError(kModule, "expected a number, got " + v.dump());
    return v.get<double>();
}

std::vector<int> parse_label_list(const json& v) {
    if (!v.is_array())
        throw ParseError(kModule, "labels entry must be an array");
    std::vector<int> out;
    out.reserve(v.size());
    for (const auto& l : v) {
        if (!l.is_number_integer())
            throw ParseError(kModule, "label must be an integer, got " + l.dump());
        out.push_back(l.get<int>());
    }
    return out;
}

void attach_labels(Sketch& s, const json& doc) {
    auto it = doc.find("labels");
    if (it == doc.end() || it->is_null())
        return;
    if (!it->is_array())
        throw ParseError(kModule, "\"labels\" must be an array of arrays");
    if (it->size() != s.strokes.size())
        throw ValidationError(kModule, "labels has " + std::to_string(it->size()) +
                                           " entries for " + std::to_string(s.strokes.size()) +
                                           " strokes");
    for (std::size_t r = 0; r < s.strokes.size(); ++r)
        s.strokes[r].labels = parse_label_list((*it)[r]);
}

Sketch parse_native(const json& doc) {
    Sketch s;
    if (auto it = doc.find("category"); it != doc.end() && it->is_string())
        s.category = it->get<std::string>();
    auto it = doc.find("strokes");
    if (it == doc.end() || !it->is_array())
        throw ParseError(kModule, "missing \"strokes\" array");
    for (const auto& stroke : *it) {
        if (!stroke.is_array())
            throw ParseError(kModule, "stroke must be an array of [x,y] pairs");
        Stroke st;
        for (const auto& p : stroke) {
            if (!p.is_array() || p.size() != 2)
                throw ParseError(kModule, "point must be [x,y], got " + p.dump());
            st.points.push_back({number(p[0]), number(p[1])});
        }
        s.strokes.push_back(std::move(st));
    }
    attach_labels(s, doc);
    return s;
}

Sketch parse_quickdraw(const json& doc) {
    Sketch s;
    for (const char* key : {"category", "word"}) {
        if (auto it = doc.find(key); it != doc.end() && it->is_string()) {
            s.category = it->get<std::string>();
            break;
        }
    }
    auto it = doc.find("drawing");
    if (it == doc.end() || !it->is_array())
        throw ParseError(kModule, "missing \"drawing\" array");
    for (const auto& stroke : *it) {
        // [xs, ys] with an optional third timing list, which is ignored.
        if (!stroke.is_array() || stroke.size() < 2 || !stroke[0].is_array() ||
            !stroke[1].is_array())
            throw ParseError(kModule, "drawing stroke must be [[xs...],[ys...]]");
        const auto& xs = stroke[0];
        const auto& ys = stroke[1];
        if (xs.size() != ys.size())
            throw ValidationError(kModule, "drawing stroke has " + std::to_string(xs.size()) +
                                               " xs but " + std::to_string(ys.size()) + " ys");
        Stroke st;
        for (std::size_t i = 0; i < xs.size(); ++i)
            st.points.push_back({number(xs[i]), number(ys[i])});
        s.strokes.push_back(std::move(st));
    }
    attach_labels(s, doc);
    return s;
}

} // namespace

double Stroke::arc_length() const {
    double total = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        total += distance(points[i - 1], points[i]);
    return total;
}

std::size_t Sketch::point_count() const {
    std::size_t n = 0;
    for (const auto& st : strokes)
        n += st.size();
    return n;
}

bool Sketch::labeled() const {
    return !strokes.empty() &&
           std::all_of(strokes.begin(), strokes.end(), [](const Stroke& s) { return s.labeled(); });
}

std::vector<Point> Sketch::flat_points() const {
    std::vector<Point> out;
    out.reserve(point_count());
    for (const auto& st : strokes)
        out.insert(out.end(), st.points.begin(), st.points.end());
    return out;
}

std::vector<int> Sketch::flat_labels() const {
    std::vector<int> out;
    out.reserve(point_count());
    for (const auto& st : strokes)
        out.insert(out.end(), st.labels.begin(), st.labels.end());
    return out;
}

std::vector<int> Sketch::stroke_of() const {
    std::vector<int> out;
    out.reserve(point_count());
    for (std::size_t r = 0; r < strokes.size(); ++r)
        out.insert(out.end(), strokes[r].size(), static_cast<int>(r));
    return out;
}

void Sketch::set_flat_labels(std::span<const int> labels) {
    if (labels.size() != point_count())
        throw InvalidArgument(kModule, "got " + std::to_string(labels.size()) +
                                           " labels for " + std::to_string(point_count()) +
                                           " points");
    std::size_t k = 0;
    for (auto& st : strokes) {
        st.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(k),
                         labels.begin() + static_cast<std::ptrdiff_t>(k + st.size()));
        k += st.size();
    }
}

void validate(const Sketch& s, int num_classes) {
    if (s.strokes.empty())
        throw ValidationError(kModule, "sketch has no strokes");
    for (std::size_t r = 0; r < s.strokes.size(); ++r) {
        const auto& st = s.strokes[r];
        if (st.points.empty())
            throw ValidationError(kModule, "stroke " + std::to_string(r) + " is empty");
        if (st.labeled() && st.labels.size() != st.points.size())
            throw ValidationError(kModule, "stroke " + std::to_string(r) + " has " +
                                               std::to_string(st.labels.size()) + " labels for " +
                                               std::to_string(st.points.size()) + " points");
        for (int l : st.labels) {
            if (l < 0 || (num_classes > 0 && l >= num_classes))
                throw ValidationError(kModule, "label " + std::to_string(l) + " outside [0, " +
                                                   std::to_string(num_classes) + ")");
        }
        for (const auto& p : st.points) {
            if (!std::isfinite(p.x) || !std::isfinite(p.y))
                throw ValidationError(kModule, "non-finite coordinate in stroke " +
                                                   std::to_string(r));
        }
    }
}

Sketch parse_sketch(std::string_view text, SketchFormat format) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(kModule, std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object())
        throw ParseError(kModule, "sketch record must be a JSON object");
    Sketch s = format == SketchFormat::native ? parse_native(doc) : parse_quickdraw(doc);
    validate(s);
    return s;
}

std::string to_ndjson(const Sketch& s) {
    json strokes = json::array();
    json labels = json::array();
    for (const auto& st : s.strokes) {
        json pts = json::array();
        for (const auto& p : st.points)
            pts.push_back(json::array({p.x, p.y}));
        strokes.push_back(std::move(pts));
        labels.push_back(st.labels);
    }
    json doc = {{"category", s.category}, {"strokes", std::move(strokes)}};
    if (s.labeled())
        doc["labels"] = std::move(labels);
    return doc.dump();
}

std::vector<Sketch> read_sketches(std::istream& in, SketchFormat format) {
    std::vector<Sketch> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            out.push_back(parse_sketch(line, format));
        } catch (const Error& e) {
            // Keep the original error type but say which line failed.
            if (dynamic_cast<const ValidationError*>(&e))
                throw ValidationError(kModule, "line " + std::to_string(lineno) + ": " + e.what());
            throw ParseError(kModule, "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<Sketch> read_sketch_file(const std::string& path, SketchFormat format) {
    std::ifstream in(path);
    if (!in)
        throw InvalidArgument(kModule, "cannot open " + path);
    return read_sketches(in, format);
}

void write_sketches(std::ostream& out, std::span<const Sketch> sketches) {
    for (const auto& s : sketches)
        out << to_ndjson(s) << '\n';
}

void write_sketch_file(const std::string& path, std::span<const Sketch> sketches) {
    std::ofstream out(path);
    if (!out)
        throw InvalidArgument(kModule, "cannot write " + path);
    write_sketches(out, sketches);
}

LabelMap parse_label_map(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(kModule, std::string("malformed label map: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("classes") || !doc["classes"].is_array())
        throw ParseError(kModule, "label map needs a \"classes\" array");
    LabelMap m;
    m.category = doc.value("category", std::string{});
    for (const auto& c : doc["classes"]) {
        if (!c.is_string())
            throw ParseError(kModule, "class names must be strings");
        m.classes.push_back(c.get<std::string>());
    }
    if (m.classes.size() < 2)
        throw ValidationError(kModule, "label map needs at least two classes");
    return m;
}

LabelMap read_label_map_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InvalidArgument(kModule, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_label_map(ss.str());
}

Sketch normalize_canvas(const Sketch& s) {
    if (s.point_count() == 0)
        throw InvalidArgument(kModule, "cannot normalize an empty sketch");
    double min_x = std::numeric_limits<double>::infinity();
    double min_y = min_x;
    double max_x = -min_x;
    double max_y = -min_x;
    for (const auto& st : s.strokes) {
        for (const auto& p : st.points) {
            min_x = std::min(min_x, p.x);
            min_y = std::min(min_y, p.y);
            max_x = std::max(max_x, p.x);
            max_y = std::max(max_y, p.y);
        }
    }
    const double w = max_x - min_x;
    const double h = max_y - min_y;
    const double extent = std::max(w, h);

    Sketch out = s;
    if (extent == 0.0) {
        for (auto& st : out.strokes)
            for (auto& p : st.points)
                p = {kCanvasSize / 2, kCanvasSize / 2};
        return out;
    }
    const double scale = kCanvasSize / extent;
    const double off_x = (kCanvasSize - w * scale) / 2;
    const double off_y = (kCanvasSize - h * scale) / 2;
    for (auto& st : out.strokes) {
        for (auto& p : st.points) {
            // Clamp away the last-ulp overshoot so the canvas bound holds exactly.
            p.x = std::clamp((p.x - min_x) * scale + off_x, 0.0, kCanvasSize);
            p.y = std::clamp((p.y - min_y) * scale + off_y, 0.0, kCanvasSize);
        }
    }
    return out;
}

Stroke rdp_simplify(const Stroke& stroke, double epsilon) {
    if (epsilon < 0.0)
        throw InvalidArgument(kModule, "rdp epsilon must be >= 0");
    const auto& pts = stroke.points;
    if (pts.size() < 3)
        return stroke;

    std::vector<bool> keep(pts.size(), false);
    keep.front() = keep.back() = true;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, pts.size() - 1}};
    while (!stack.empty()) {
        auto [first, last] = stack.back();
        stack.pop_back();
        double max_dist = -1.0;
        std::size_t index = first;
        for (std::size_t i = first + 1; i < last; ++i) {
            const double d = segment_distance(pts[i], pts[first], pts[last]);
            if (d > max_dist) {
                max_dist = d;
                index = i;
            }
        }
        if (index != first && max_dist > epsilon) {
            keep[index] = true;
            stack.emplace_back(first, index);
            stack.emplace_back(index, last);
        }
    }

    Stroke out;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!keep[i])
            continue;
        out.points.push_back(pts[i]);
        if (stroke.labeled())
            out.labels.push_back(stroke.labels[i]);
    }
    return out;
}

Sketch rdp_simplify(const Sketch& s, double epsilon) {
    Sketch out = s;
    for (auto& st : out.strokes)
        st = rdp_simplify(st, epsilon);
    return out;
}

std::vector<std::size_t> resample_allocation(const Sketch& s, std::size_t n) {
    const std::size_t count = s.strokes.size();
    std::vector<std::size_t> minimum(count);
    std::vector<double> length(count);
    std::size_t feasible = 0;
    for (std::size_t r = 0; r < count; ++r) {
        minimum[r] = s.strokes[r].size() == 1 ? 1 : 2;
        length[r] = s.strokes[r].size() == 1 ? 0.0 : s.strokes[r].arc_length();
        feasible += minimum[r];
    }
    if (count == 0 || n < feasible)
        throw InvalidArgument(kModule, "cannot resample " + std::to_string(count) +
                                           " strokes to " + std::to_string(n) +
                                           " points (minimum " + std::to_string(feasible) + ")");

    double total = std::accumulate(length.begin(), length.end(), 0.0);
    if (total == 0.0) {
        // Zero-length sketch: weight multi-point strokes equally; if every
        // stroke is a single point, weight all strokes equally.
        bool any_multi = false;
        for (std::size_t r = 0; r < count; ++r)
            any_multi |= s.strokes[r].size() > 1;
        for (std::size_t r = 0; r < count; ++r)
            length[r] = (!any_multi || s.strokes[r].size() > 1) ? 1.0 : 0.0;
        total = std::accumulate(length.begin(), length.end(), 0.0);
    }

    // Largest remainder on the proportional quotas.
    std::vector<std::size_t> alloc(count);
    std::vector<double> remainder(count);
    std::size_t assigned = 0;
    for (std::size_t r = 0; r < count; ++r) {
        const double quota = static_cast<double>(n) * length[r] / total;
        alloc[r] = static_cast<std::size_t>(std::floor(quota));
        remainder[r] = quota - static_cast<double>(alloc[r]);
        assigned += alloc[r];
    }
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < n; i = (i + 1) % count, ++assigned)
        ++alloc[order[i]];

    // Raise strokes below their minimum, taking from the largest allocation.
    for (std::size_t r = 0; r < count; ++r) {
        while (alloc[r] < minimum[r]) {
            std::size_t donor = count;
            for (std::size_t q = 0; q < count; ++q) {
                if (alloc[q] > minimum[q] && (donor == count || alloc[q] > alloc[donor]))
                    donor = q;
            }
            --alloc[donor];
            ++alloc[r];
        }
    }
    return alloc;
}

Sketch resample_points(const Sketch& s, std::size_t n) {
    const auto alloc = resample_allocation(s, n);
    Sketch out;
    out.category = s.category;
    for (std::size_t r = 0; r < s.strokes.size(); ++r) {
        const auto& src = s.strokes[r];
        const std::size_t m = alloc[r];
        Stroke dst;
        dst.points.reserve(m);

        if (src.size() == 1) {
            dst.points.assign(m, src.points.front());
        } else {
            std::vector<double> cumulative(src.size(), 0.0);
            for (std::size_t i = 1; i < src.size(); ++i)
                cumulative[i] = cumulative[i - 1] + distance(src.points[i - 1], src.points[i]);
            const double total = cumulative.back();
            std::size_t seg = 0;
            for (std::size_t k = 0; k < m; ++k) {
                if (k == 0) {
                    dst.points.push_back(src.points.front());
                    continue;
                }
                if (k == m - 1) {
                    dst.points.push_back(src.points.back());
                    continue;
                }
                const double target = total * static_cast<double>(k) / static_cast<double>(m - 1);
                while (seg + 2 < src.size() && cumulative[seg + 1] < target)
                    ++seg;
                const double span = cumulative[seg + 1] - cumulative[seg];
                const double t = span > 0.0 ? (target - cumulative[seg]) / span : 0.0;
                const Point& a = src.points[seg];
                const Point& b = src.points[seg + 1];
                dst.points.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
            }
        }

        if (src.labeled()) {
            dst.labels.reserve(m);
            for (const auto& p : dst.points) {
                std::size_t best = 0;
                double best_d = std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < src.size(); ++i) {
                    const double d = squared_distance(p, src.points[i]);
                    if (d < best_d) {
                        best_d = d;
                        best = i;
                    }
                }
                dst.labels.push_back(src.labels[best]);
            }
        }
        out.strokes.push_back(std::move(dst));
    }
    return out;
}

Sketch map_labels_back(const Sketch& original, const Sketch& resampled,
                       std::span<const int> predicted) {
    if (predicted.size() != resampled.point_count())
        throw InvalidArgument(kModule, "got " + std::to_string(predicted.size()) +
                                           " predictions for " +
                                           std::to_string(resampled.point_count()) +
                                           " resampled points");
    const auto anchors = resampled.flat_points();
    if (anchors.empty())
        throw InvalidArgument(kModule, "resampled sketch has no points");
    Sketch out = original;
    for (auto& st : out.strokes) {
        st.labels.resize(st.points.size());
        for (std::size_t i = 0; i < st.points.size(); ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < anchors.size(); ++a) {
                const double d = squared_distance(st.points[i], anchors[a]);
                if (d < best_d) {
                    best_d = d;
                    best = a;
                }
            }
            st.labels[i] = predicted[best];
        }
    }
    return out;
}

Sketch preprocess(const Sketch& s, std::size_t n, double epsilon) {
    return resample_points(rdp_simplify(normalize_canvas(s), epsilon), n);
}

} // namespace sketchgnn
