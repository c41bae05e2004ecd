#pragma once

#include <string>
#include <vector>

namespace iled::plot {

struct Series {
    std::string label;
    std::vector<double> x, y;
};

// Minimal self-contained SVG writers for the analysis reports. Axes are
// linear with auto ranges; nothing external is linked.
void line_chart(const std::string& path, const std::vector<Series>& series, const std::string& title,
                const std::string& xlabel, const std::string& ylabel);

void heatmap(const std::string& path, const std::vector<double>& values, int nx, int ny, const std::string& title);

}  // namespace iled::plot
