#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace phgmm {

// One polyline; NaN y values break the line (useful for sparse columns).
struct PlotSeries {
    std::string name;
    std::vector<double> x, y;
};

// Line chart with axes, tick labels and a legend.
void plot_lines(const std::string& path, const std::string& title,
                const std::string& x_label, const std::string& y_label,
                const std::vector<PlotSeries>& series, int w = 960, int h = 600);

// 2D scatter colored by integer label (legend shows one entry per label).
void plot_scatter(const std::string& path, const std::string& title,
                  const std::vector<std::array<double, 2>>& points,
                  const std::vector<int>& labels, int w = 720, int h = 720);

// Class-index mask as an RGB png through the palette; ignore pixels are gray.
void write_mask_png(const std::string& path, const std::vector<int>& mask, int h,
                    int w, const std::vector<std::array<uint8_t, 3>>& palette);

}  // namespace phgmm
