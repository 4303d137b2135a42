#include "sketchgnn/render.hpp"

#include "sketchgnn/errors.hpp"

#include <cstdio>
#include <map>
#include <sstream>

namespace sketchgnn {

const char* class_color(int label) {
    if (label < 0)
        return "#000000";
    return kPalette[static_cast<std::size_t>(label) % kPalette.size()];
}

std::string render_svg(const Sketch& s) {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"256\" height=\"256\" "
           "viewBox=\"0 0 256 256\">\n";
    char buf[64];
    for (std::size_t r = 0; r < s.strokes.size(); ++r) {
        const auto& st = s.strokes[r];
        int label = -1;
        if (st.labeled()) {
            std::map<int, int> votes;
            for (int l : st.labels)
                ++votes[l];
            int best = 0;
            for (auto [l, n] : votes) {
                if (n > best) {
                    best = n;
                    label = l;
                }
            }
        }
        out << "  <polyline data-stroke=\"" << r << "\" data-label=\"" << label
            << "\" fill=\"none\" stroke=\"" << class_color(label)
            << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < st.points.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%s%.4f,%.4f", i ? " " : "", st.points[i].x,
                          st.points[i].y);
            out << buf;
        }
        out << "\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::vector<std::vector<Point>> parse_svg_polylines(std::string_view svg) {
    std::vector<std::vector<Point>> out;
    std::size_t pos = 0;
    const std::string_view tag = "<polyline";
    const std::string_view attr = "points=\"";
    while ((pos = svg.find(tag, pos)) != std::string_view::npos) {
        const std::size_t end = svg.find('>', pos);
        const std::size_t a = svg.find(attr, pos);
        if (end == std::string_view::npos || a == std::string_view::npos || a > end)
            throw ParseError("cli", "polyline without points attribute");
        const std::size_t start = a + attr.size();
        const std::size_t close = svg.find('"', start);
        std::string list(svg.substr(start, close - start));
        for (char& c : list)
            if (c == ',')
                c = ' ';
        std::istringstream in(list);
        std::vector<Point> pts;
        Point p;
        while (in >> p.x >> p.y)
            pts.push_back(p);
        out.push_back(std::move(pts));
        pos = close;
    }
    return out;
}

} // namespace sketchgnn
