#include "iled/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "iled/errors.hpp"

namespace iled::plot {

namespace {

constexpr int kW = 760, kH = 440, kPad = 56;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void absorb(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (!(hi > lo)) {
            lo -= 1;
            hi += 1;
        }
        const double m = 0.05 * (hi - lo);
        lo -= m;
        hi += m;
    }
};

std::string esc(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<')
            o += "&lt;";
        else if (c == '>')
            o += "&gt;";
        else if (c == '&')
            o += "&amp;";
        else
            o += c;
    }
    return o;
}

}  // namespace

void line_chart(const std::string& path, const std::vector<Series>& series, const std::string& title,
                const std::string& xlabel, const std::string& ylabel) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write " + path);

    Range rx, ry;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            rx.absorb(s.x[i]);
            ry.absorb(s.y[i]);
        }
    rx.pad();
    ry.pad();

    auto X = [&](double v) { return kPad + (v - rx.lo) / (rx.hi - rx.lo) * (kW - 2 * kPad); };
    auto Y = [&](double v) { return kH - kPad - (v - ry.lo) / (ry.hi - ry.lo) * (kH - 2 * kPad); };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(title)
       << "</text>\n";
    os << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad << "\" y2=\"" << kH - kPad
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad << "\" y2=\"" << kH - kPad
       << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = rx.lo + (rx.hi - rx.lo) * i / 4.0;
        const double fy = ry.lo + (ry.hi - ry.lo) * i / 4.0;
        os << "<text x=\"" << X(fx) << "\" y=\"" << kH - kPad + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
           << fx << "</text>\n";
        os << "<text x=\"" << kPad - 6 << "\" y=\"" << Y(fy) + 3 << "\" text-anchor=\"end\" font-size=\"10\">" << fy
           << "</text>\n";
    }
    os << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
       << esc(xlabel) << "</text>\n";
    os << "<text x=\"14\" y=\"" << kH / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
       << kH / 2 << ")\">" << esc(ylabel) << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kColors[si % 6];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.4\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            if (std::isfinite(s.y[i])) os << X(s.x[i]) << "," << Y(s.y[i]) << " ";
        os << "\"/>\n";
        os << "<text x=\"" << kW - kPad - 4 << "\" y=\"" << kPad + 16 * static_cast<int>(si)
           << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << color << "\">" << esc(s.label) << "</text>\n";
    }
    os << "</svg>\n";
}

void heatmap(const std::string& path, const std::vector<double>& values, int nx, int ny, const std::string& title) {
    if (static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) != values.size())
        throw ShapeError("heatmap: nx*ny does not match value count");
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write " + path);

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : values)
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!(hi > lo)) hi = lo + 1;

    const int cell = std::max(1, 512 / std::max(nx, ny));
    const int w = nx * cell, h = ny * cell;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h + 28 << "\">\n";
    os << "<text x=\"" << w / 2 << "\" y=\"16\" text-anchor=\"middle\" font-size=\"13\">" << esc(title)
       << "</text>\n";
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            const double v = (values[static_cast<std::size_t>(y) * nx + x] - lo) / (hi - lo);
            const int r = static_cast<int>(255 * std::min(1.0, 2.0 * v));
            const int b = static_cast<int>(255 * std::min(1.0, 2.0 * (1.0 - v)));
            const int g = static_cast<int>(80 * (1.0 - std::abs(2.0 * v - 1.0)));
            os << "<rect x=\"" << x * cell << "\" y=\"" << 28 + (ny - 1 - y) * cell << "\" width=\"" << cell
               << "\" height=\"" << cell << "\" fill=\"rgb(" << r << "," << g << "," << b << ")\"/>\n";
        }
    os << "</svg>\n";
}

}  // namespace iled::plot
