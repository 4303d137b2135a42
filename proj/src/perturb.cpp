#include "sketchgnn/perturb.hpp"

#include "sketchgnn/errors.hpp"
#include "sketchgnn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace sketchgnn {

namespace {

const char* kModule = "training";

double reflect(double v) {
    // Fold into [0, 256].
    const double period = 2 * kCanvasSize;
    v = std::fmod(v, period);
    if (v < 0)
        v += period;
    return v > kCanvasSize ? period - v : v;
}

double to_double(std::string_view key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size())
            return d;
    } catch (const std::exception&) {
    }
    throw ParseError(kModule, "perturbation parameter " + std::string(key) +
                                       " is not a number: " + v);
}

} // namespace

std::string to_string(PerturbKind kind) {
    switch (kind) {
    case PerturbKind::rotate: return "rotate";
    case PerturbKind::point_noise: return "point_noise";
    case PerturbKind::break_strokes: return "break_strokes";
    case PerturbKind::stroke_offset: return "stroke_offset";
    case PerturbKind::scribble: return "scribble";
    }
    return "unknown";
}

PerturbationSpec parse_perturbation(std::string_view text) {
    PerturbationSpec spec;
    bool have_kind = false;
    std::stringstream ss{std::string(text)};
    std::string item;
    bool first = true;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (item.empty())
            continue;
        const auto eq = item.find('=');
        std::string key = eq == std::string::npos ? "kind" : item.substr(0, eq);
        std::string value = eq == std::string::npos ? item : item.substr(eq + 1);
        if (eq == std::string::npos && !first)
            throw ParseError(kModule, "expected key=value in perturbation spec: " + item);
        first = false;
        if (key == "kind") {
            have_kind = true;
            if (value == "rotate")
                spec.kind = PerturbKind::rotate;
            else if (value == "point_noise" || value == "noise")
                spec.kind = PerturbKind::point_noise;
            else if (value == "break_strokes" || value == "break")
                spec.kind = PerturbKind::break_strokes;
            else if (value == "stroke_offset" || value == "offset")
                spec.kind = PerturbKind::stroke_offset;
            else if (value == "scribble")
                spec.kind = PerturbKind::scribble;
            else
                throw ParseError(kModule, "unknown perturbation kind " + value);
        } else if (key == "theta") {
            spec.theta_deg = to_double(key, value);
        } else if (key == "sigma") {
            spec.sigma = to_double(key, value);
        } else if (key == "psi") {
            spec.psi = static_cast<int>(to_double(key, value));
        } else if (key == "eta") {
            spec.eta = to_double(key, value);
        } else if (key == "count") {
            spec.scribble_count = static_cast<int>(to_double(key, value));
        } else if (key == "label") {
            if (value == "new")
                spec.scribble_label = ScribbleLabel::new_class;
            else if (value == "existing")
                spec.scribble_label = ScribbleLabel::existing;
            else
                throw ParseError(kModule, "scribble label must be new or existing");
        } else if (key == "class") {
            spec.scribble_class = static_cast<int>(to_double(key, value));
        } else {
            throw ParseError(kModule, "unknown perturbation parameter " + key);
        }
    }
    if (!have_kind)
        throw ParseError(kModule, "perturbation spec needs a kind");
    if (spec.sigma < 0 || spec.eta < 0 || spec.theta_deg < 0 || spec.psi < 0 ||
        spec.scribble_count < 0)
        throw InvalidArgument(kModule, "perturbation magnitudes must be non-negative");
    if (spec.kind == PerturbKind::break_strokes && spec.psi < 1)
        throw InvalidArgument(kModule, "break_strokes needs psi >= 1");
    return spec;
}

std::string to_string(const PerturbationSpec& spec) {
    std::ostringstream out;
    out << "kind=" << to_string(spec.kind);
    switch (spec.kind) {
    case PerturbKind::rotate: out << ",theta=" << spec.theta_deg; break;
    case PerturbKind::point_noise: out << ",sigma=" << spec.sigma; break;
    case PerturbKind::break_strokes: out << ",psi=" << spec.psi; break;
    case PerturbKind::stroke_offset: out << ",eta=" << spec.eta; break;
    case PerturbKind::scribble:
        out << ",count=" << spec.scribble_count << ",label="
            << (spec.scribble_label == ScribbleLabel::new_class ? "new" : "existing");
        if (spec.scribble_label == ScribbleLabel::new_class)
            out << ",class=" << spec.scribble_class;
        break;
    }
    return out.str();
}

std::size_t break_piece_length(std::size_t points, std::size_t strokes, int psi) {
    if (strokes == 0)
        throw InvalidArgument(kModule, "break_strokes on a sketch without strokes");
    if (psi < 1)
        throw InvalidArgument(kModule, "break_strokes needs psi >= 1");
    const double ps = 10.0 * static_cast<double>(points) /
                      (std::ldexp(1.0, psi) * static_cast<double>(strokes));
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(ps)));
}

Stroke scribble_stroke(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> length(8, 24);
    std::uniform_real_distribution<double> pos(0.0, kCanvasSize);
    std::uniform_real_distribution<double> heading0(0.0, 2 * std::numbers::pi);
    std::uniform_real_distribution<double> turn(-0.5, 0.5);
    std::uniform_real_distribution<double> step(4.0, 12.0);

    Stroke st;
    const int n = length(rng);
    double x = pos(rng);
    double y = pos(rng);
    double heading = heading0(rng);
    st.points.push_back({x, y});
    for (int i = 1; i < n; ++i) {
        heading += turn(rng);
        const double len = step(rng);
        double nx = x + len * std::cos(heading);
        double ny = y + len * std::sin(heading);
        if (nx < 0 || nx > kCanvasSize)
            heading = std::numbers::pi - heading;
        if (ny < 0 || ny > kCanvasSize)
            heading = -heading;
        x = reflect(nx);
        y = reflect(ny);
        st.points.push_back({x, y});
    }
    return st;
}

Sketch perturb(const Sketch& s, const PerturbationSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Sketch out = s;
    switch (spec.kind) {
    case PerturbKind::rotate: {
        std::uniform_real_distribution<double> dist(-spec.theta_deg, spec.theta_deg);
        const double angle = spec.theta_deg > 0 ? dist(rng) * std::numbers::pi / 180.0 : 0.0;
        const double c = std::cos(angle);
        const double sn = std::sin(angle);
        const double center = kCanvasSize / 2;
        for (auto& st : out.strokes) {
            for (auto& p : st.points) {
                const double dx = p.x - center;
                const double dy = p.y - center;
                p = {center + c * dx - sn * dy, center + sn * dx + c * dy};
            }
        }
        return normalize_canvas(out);
    }
    case PerturbKind::point_noise: {
        std::normal_distribution<double> noise(0.0, 1.0);
        for (auto& st : out.strokes) {
            for (auto& p : st.points) {
                const double ox = spec.sigma * noise(rng);
                const double oy = spec.sigma * noise(rng);
                p.x += ox;
                p.y += oy;
            }
        }
        return out;
    }
    case PerturbKind::break_strokes: {
        const std::size_t piece = break_piece_length(s.point_count(), s.strokes.size(), spec.psi);
        out.strokes.clear();
        for (const auto& st : s.strokes) {
            for (std::size_t b = 0; b < st.size(); b += piece) {
                const std::size_t e = std::min(st.size(), b + piece);
                Stroke part;
                part.points.assign(st.points.begin() + static_cast<std::ptrdiff_t>(b),
                                   st.points.begin() + static_cast<std::ptrdiff_t>(e));
                if (st.labeled())
                    part.labels.assign(st.labels.begin() + static_cast<std::ptrdiff_t>(b),
                                       st.labels.begin() + static_cast<std::ptrdiff_t>(e));
                out.strokes.push_back(std::move(part));
            }
        }
        return out;
    }
    case PerturbKind::stroke_offset: {
        const double range = spec.eta * kCanvasSize;
        std::uniform_real_distribution<double> dist(-range, range);
        for (auto& st : out.strokes) {
            const double ox = range > 0 ? dist(rng) : 0.0;
            const double oy = range > 0 ? dist(rng) : 0.0;
            for (auto& p : st.points) {
                p.x += ox;
                p.y += oy;
            }
        }
        return out;
    }
    case PerturbKind::scribble: {
        const bool labeled = s.labeled();
        std::vector<int> present;
        if (labeled) {
            std::set<int> seen;
            for (const auto& st : s.strokes)
                seen.insert(st.labels.begin(), st.labels.end());
            present.assign(seen.begin(), seen.end());
        }
        if (labeled && spec.scribble_label == ScribbleLabel::new_class && spec.scribble_class < 0)
            throw InvalidArgument(kModule, "scribble with label=new needs class=<index>");
        for (int i = 0; i < spec.scribble_count; ++i) {
            Stroke st = scribble_stroke(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
            if (labeled) {
                int label = spec.scribble_class;
                if (spec.scribble_label == ScribbleLabel::existing) {
                    std::uniform_int_distribution<std::size_t> pick(0, present.size() - 1);
                    label = present[pick(rng)];
                }
                st.labels.assign(st.size(), label);
            }
            out.strokes.push_back(std::move(st));
        }
        return out;
    }
    }
    return out;
}

} // namespace sketchgnn
