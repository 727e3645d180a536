#include "phgmm/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "phgmm/common.hpp"
#include "phgmm/image_io.hpp"

namespace phgmm {

namespace {

// 5x7 bitmap font, one row byte per scanline, bit 4 is the left column.
// Lowercase input renders with the uppercase glyphs.
struct Glyph {
    char c;
    uint8_t rows[7];
};

constexpr Glyph kFont[] = {
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
    {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
    {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'2', {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}},
    {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
    {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
    {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
    {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
    {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
    {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
    {'A', {0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
    {'B', {0x1e, 0x11, 0x11, 0x1e, 0x11, 0x11, 0x1e}},
    {'C', {0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e}},
    {'D', {0x1c, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1c}},
    {'E', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f}},
    {'F', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x10}},
    {'G', {0x0e, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0f}},
    {'H', {0x11, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
    {'I', {0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0c}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1f}},
    {'M', {0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
    {'P', {0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10}},
    {'Q', {0x0e, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0d}},
    {'R', {0x1e, 0x11, 0x11, 0x1e, 0x14, 0x12, 0x11}},
    {'S', {0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e}},
    {'T', {0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0a, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0a}},
    {'X', {0x11, 0x11, 0x0a, 0x04, 0x0a, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0a, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1f}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c}},
    {',', {0x00, 0x00, 0x00, 0x00, 0x0c, 0x04, 0x08}},
    {'-', {0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1f, 0x04, 0x04, 0x00}},
    {':', {0x00, 0x0c, 0x0c, 0x00, 0x0c, 0x0c, 0x00}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'%', {0x19, 0x1a, 0x02, 0x04, 0x08, 0x0b, 0x13}},
    {'=', {0x00, 0x00, 0x1f, 0x00, 0x1f, 0x00, 0x00}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1f}},
    {'/', {0x01, 0x02, 0x02, 0x04, 0x08, 0x08, 0x10}},
};

const uint8_t* find_glyph(char c) {
    if (c >= 'a' && c <= 'z') c = char(c - 'a' + 'A');
    for (const auto& g : kFont)
        if (g.c == c) return g.rows;
    return kFont[0].rows;  // unknown characters render blank
}

using Rgb = std::array<uint8_t, 3>;

constexpr Rgb kBlack{20, 20, 20};
constexpr Rgb kGrid{225, 225, 228};
constexpr Rgb kSeriesColors[] = {
    {200, 60, 60},  {70, 110, 220}, {70, 170, 90},  {230, 160, 40},
    {160, 70, 200}, {40, 170, 180}, {120, 120, 120}, {20, 20, 20},
};
constexpr int kNumSeriesColors = int(sizeof(kSeriesColors) / sizeof(Rgb));

struct Raster {
    int h, w;
    std::vector<uint8_t> px;

    Raster(int h_, int w_) : h(h_), w(w_), px(size_t(h_) * w_ * 3, 255) {}

    void set(int x, int y, Rgb c) {
        if (x < 0 || y < 0 || x >= w || y >= h) return;
        uint8_t* p = &px[(size_t(y) * w + size_t(x)) * 3];
        p[0] = c[0];
        p[1] = c[1];
        p[2] = c[2];
    }

    void fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) set(x, y, c);
    }

    void line(int x0, int y0, int x1, int y1, Rgb c) {
        const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        while (true) {
            set(x0, y0, c);
            if (x0 == x1 && y0 == y1) break;
            const int e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x0 += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y0 += sy;
            }
        }
    }

    void text(int x, int y, const std::string& s, Rgb c, int scale = 1) {
        for (char ch : s) {
            const uint8_t* rows = find_glyph(ch);
            for (int r = 0; r < 7; ++r)
                for (int col = 0; col < 5; ++col)
                    if (rows[r] & (1 << (4 - col)))
                        fill_rect(x + col * scale, y + r * scale,
                                  x + col * scale + scale - 1,
                                  y + r * scale + scale - 1, c);
            x += 6 * scale;
        }
    }

    static int text_width(const std::string& s, int scale = 1) {
        return int(s.size()) * 6 * scale - scale;
    }

    void save(const std::string& path) const { write_png_rgb(path, px, h, w); }
};

std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

struct Range {
    double lo = 0, hi = 1;

    void widen(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }

    // Fixes degenerate spans and adds headroom.
    void finalize(double pad) {
        if (hi < lo) {
            lo = 0;
            hi = 1;
        }
        if (hi == lo) {
            const double d = std::max(1.0, std::abs(hi) * 0.1);
            lo -= d;
            hi += d;
        } else {
            const double d = (hi - lo) * pad;
            lo -= d;
            hi += d;
        }
    }
};

struct Frame {
    int left, right, top, bottom;  // margins
    Range xr, yr;
    int w, h;

    int px(double x) const {
        return left + int(std::lround((x - xr.lo) / (xr.hi - xr.lo) *
                                      double(w - left - right)));
    }
    int py(double y) const {
        return h - bottom - int(std::lround((y - yr.lo) / (yr.hi - yr.lo) *
                                            double(h - top - bottom)));
    }
};

void draw_frame(Raster& r, const Frame& f, const std::string& title,
                const std::string& x_label, const std::string& y_label) {
    const int ticks = 5;
    for (int t = 0; t <= ticks; ++t) {
        const double fx = f.xr.lo + (f.xr.hi - f.xr.lo) * t / ticks;
        const double fy = f.yr.lo + (f.yr.hi - f.yr.lo) * t / ticks;
        const int x = f.px(fx), y = f.py(fy);
        r.line(x, f.top, x, f.h - f.bottom, kGrid);
        r.line(f.left, y, f.w - f.right, y, kGrid);
        const std::string xs = fmt_tick(fx), ys = fmt_tick(fy);
        r.text(x - Raster::text_width(xs) / 2, f.h - f.bottom + 6, xs, kBlack);
        r.text(f.left - Raster::text_width(ys) - 6, y - 3, ys, kBlack);
    }
    r.line(f.left, f.top, f.left, f.h - f.bottom, kBlack);
    r.line(f.left, f.h - f.bottom, f.w - f.right, f.h - f.bottom, kBlack);
    r.text((f.w - Raster::text_width(title, 2)) / 2, 6, title, kBlack, 2);
    r.text((f.w - Raster::text_width(x_label)) / 2, f.h - 14, x_label, kBlack);
    r.text(6, f.top - 14, y_label, kBlack);
}

}  // namespace

void plot_lines(const std::string& path, const std::string& title,
                const std::string& x_label, const std::string& y_label,
                const std::vector<PlotSeries>& series, int w, int h) {
    Raster r(h, w);
    Frame f{72, 20, 34, 42, {}, {}, w, h};
    f.xr.lo = f.yr.lo = std::numeric_limits<double>::infinity();
    f.xr.hi = f.yr.hi = -std::numeric_limits<double>::infinity();
    for (const auto& s : series)
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
            if (std::isfinite(s.y[i])) {
                f.xr.widen(s.x[i]);
                f.yr.widen(s.y[i]);
            }
    f.xr.finalize(0.02);
    f.yr.finalize(0.06);
    draw_frame(r, f, title, x_label, y_label);

    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const Rgb c = kSeriesColors[si % kNumSeriesColors];
        bool have_prev = false;
        int px0 = 0, py0 = 0;
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.y[i])) {
                have_prev = false;
                continue;
            }
            const int px1 = f.px(s.x[i]), py1 = f.py(s.y[i]);
            if (have_prev) r.line(px0, py0, px1, py1, c);
            r.fill_rect(px1 - 1, py1 - 1, px1 + 1, py1 + 1, c);
            px0 = px1;
            py0 = py1;
            have_prev = true;
        }
        const int ly = f.top + 6 + int(si) * 12;
        r.fill_rect(w - f.right - 150, ly, w - f.right - 142, ly + 8, c);
        r.text(w - f.right - 136, ly + 1, s.name, kBlack);
    }
    r.save(path);
}

void plot_scatter(const std::string& path, const std::string& title,
                  const std::vector<std::array<double, 2>>& points,
                  const std::vector<int>& labels, int w, int h) {
    if (points.size() != labels.size())
        throw shape_error("scatter plot: one label per point required");
    Raster r(h, w);
    Frame f{72, 20, 34, 42, {}, {}, w, h};
    f.xr.lo = f.yr.lo = std::numeric_limits<double>::infinity();
    f.xr.hi = f.yr.hi = -std::numeric_limits<double>::infinity();
    for (const auto& p : points) {
        f.xr.widen(p[0]);
        f.yr.widen(p[1]);
    }
    f.xr.finalize(0.05);
    f.yr.finalize(0.05);
    draw_frame(r, f, title, "dim 1", "dim 2");

    std::map<int, Rgb> legend;
    for (size_t i = 0; i < points.size(); ++i) {
        const Rgb c = kSeriesColors[size_t(labels[i] % kNumSeriesColors +
                                           (labels[i] < 0 ? kNumSeriesColors : 0))];
        legend.emplace(labels[i], c);
        const int x = f.px(points[i][0]), y = f.py(points[i][1]);
        r.fill_rect(x - 1, y - 1, x + 1, y + 1, c);
    }
    int row = 0;
    for (const auto& [label, c] : legend) {
        const int ly = f.top + 6 + row * 12;
        r.fill_rect(w - f.right - 90, ly, w - f.right - 82, ly + 8, c);
        r.text(w - f.right - 76, ly + 1, "k=" + std::to_string(label), kBlack);
        ++row;
    }
    r.save(path);
}

void write_mask_png(const std::string& path, const std::vector<int>& mask, int h,
                    int w, const std::vector<std::array<uint8_t, 3>>& palette) {
    if (mask.size() != size_t(h) * size_t(w))
        throw shape_error("mask png: mask size does not match dimensions");
    std::vector<uint8_t> rgb(mask.size() * 3);
    for (size_t i = 0; i < mask.size(); ++i) {
        Rgb c{128, 128, 128};
        if (mask[i] != kIgnoreIndex) {
            if (mask[i] < 0 || size_t(mask[i]) >= palette.size())
                throw shape_error("mask png: class " + std::to_string(mask[i]) +
                                  " outside the palette");
            c = palette[size_t(mask[i])];
        }
        rgb[i * 3] = c[0];
        rgb[i * 3 + 1] = c[1];
        rgb[i * 3 + 2] = c[2];
    }
    write_png_rgb(path, rgb, h, w);
}

}  // namespace phgmm
