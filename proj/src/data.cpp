#include "phgmm/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "phgmm/image_io.hpp"
#include "phgmm/rng.hpp"

namespace phgmm {

namespace fs = std::filesystem;
using nlohmann::json;

TensorF64 image_f64(const Sample& s) {
    TensorF64 out(s.image.shape());
    for (size_t i = 0; i < out.size(); ++i) out[i] = double(s.image[i]);
    return out;
}

void SceneSpec::validate() const {
    if (canvas_h < 32 || canvas_w < 32 || canvas_h % 32 || canvas_w % 32)
        throw config_error("scene canvas must be a positive multiple of 32, got " +
                           std::to_string(canvas_h) + "x" + std::to_string(canvas_w));
    if (classes < 2 || classes > 6)
        throw config_error("scene generator supports 2 to 6 classes, got " +
                           std::to_string(classes));
    if (noise_amp < 0) throw config_error("texture noise amplitude must be >= 0");
    if (!(rect_frac_lo > 0) || rect_frac_hi > 1 || rect_frac_lo > rect_frac_hi)
        throw config_error("rectangle size fractions must satisfy 0 < lo <= hi <= 1");
    for (const auto& r : counts)
        if (r.lo < 0 || r.lo > r.hi)
            throw config_error("shape count range must satisfy 0 <= lo <= hi");
}

const std::vector<std::string>& family_class_names() {
    static const std::vector<std::string> names = {
        "background", "rectangle", "bar", "disk", "square", "triangle"};
    return names;
}

const std::vector<std::array<uint8_t, 3>>& family_palette() {
    static const std::vector<std::array<uint8_t, 3>> pal = {
        {{40, 40, 48}},   {{200, 60, 60}},  {{70, 180, 90}},
        {{70, 110, 220}}, {{230, 200, 60}}, {{190, 80, 200}}};
    return pal;
}

namespace {

struct Canvas {
    int h, w;
    std::vector<float> rgb;  // [3,h,w]
    std::vector<int> mask;

    Canvas(int h_, int w_) : h(h_), w(w_), rgb(size_t(3) * h_ * w_, 0.0f),
                             mask(size_t(h_) * w_, 0) {}

    void put(int y, int x, const float color[3], int cls) {
        if (y < 0 || y >= h || x < 0 || x >= w) return;
        const size_t p = size_t(y) * w + x;
        for (int c = 0; c < 3; ++c) rgb[size_t(c) * h * w + p] = color[c];
        mask[p] = cls;
    }
};

void shape_color(Rng& rng, int cls, float out[3]) {
    const auto& base = family_palette()[size_t(cls)];
    for (int c = 0; c < 3; ++c) {
        const double v = base[size_t(c)] / 255.0 + rng.uniform(-0.08, 0.08);
        out[c] = float(std::clamp(v, 0.0, 1.0));
    }
}

void draw_rect(Canvas& cv, Rng& rng, const SceneSpec& spec, int cls) {
    float col[3];
    shape_color(rng, cls, col);
    const int sw = std::max(1, int(std::lround(cv.w * rng.uniform(spec.rect_frac_lo, spec.rect_frac_hi))));
    const int sh = std::max(1, int(std::lround(cv.h * rng.uniform(spec.rect_frac_lo, spec.rect_frac_hi))));
    const int x0 = rng.uniform_int(0, cv.w - std::min(sw, cv.w));
    const int y0 = rng.uniform_int(0, cv.h - std::min(sh, cv.h));
    for (int y = y0; y < std::min(cv.h, y0 + sh); ++y)
        for (int x = x0; x < std::min(cv.w, x0 + sw); ++x) cv.put(y, x, col, cls);
}

void draw_bar(Canvas& cv, Rng& rng, int cls) {
    float col[3];
    shape_color(rng, cls, col);
    const int bw = rng.uniform_int(2, 4);
    const int x0 = rng.uniform_int(0, cv.w - bw);
    for (int y = 0; y < cv.h; ++y)
        for (int x = x0; x < x0 + bw; ++x) cv.put(y, x, col, cls);
}

void draw_disk(Canvas& cv, Rng& rng, int cls) {
    float col[3];
    shape_color(rng, cls, col);
    const int m = std::min(cv.h, cv.w);
    const int r = rng.uniform_int(std::max(3, m / 8), std::max(4, m / 5));
    const int cx = rng.uniform_int(r, cv.w - 1 - r);
    const int cy = rng.uniform_int(r, cv.h - 1 - r);
    for (int y = cy - r; y <= cy + r; ++y)
        for (int x = cx - r; x <= cx + r; ++x)
            if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r)
                cv.put(y, x, col, cls);
}

void draw_square(Canvas& cv, Rng& rng, int cls) {
    float col[3];
    shape_color(rng, cls, col);
    const int m = std::min(cv.h, cv.w);
    const int side = rng.uniform_int(std::max(2, m / 16), std::max(3, m / 8));
    const int x0 = rng.uniform_int(0, cv.w - side);
    const int y0 = rng.uniform_int(0, cv.h - side);
    for (int y = y0; y < y0 + side; ++y)
        for (int x = x0; x < x0 + side; ++x) cv.put(y, x, col, cls);
}

// Isoceles triangles with bounded aspect ratio at a random orientation:
// sliver-free, so the family keeps a usable interior at desk canvas sizes
// while still contributing the only non-axis-aligned boundaries.
void draw_triangle(Canvas& cv, Rng& rng, int cls) {
    float col[3];
    shape_color(rng, cls, col);
    const int m = std::min(cv.h, cv.w);
    const double base = rng.uniform(m / 5.0, m / 3.0);
    const double height = base * rng.uniform(0.8, 1.25);
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);

    // Local frame: apex above the centroid, base corners below.
    const double lx[3] = {0.0, -base / 2.0, base / 2.0};
    const double ly[3] = {-2.0 * height / 3.0, height / 3.0, height / 3.0};
    const double ct = std::cos(theta), st = std::sin(theta);
    double r_max = 0.0;
    for (int i = 0; i < 3; ++i)
        r_max = std::max(r_max, std::hypot(lx[i], ly[i]));

    const double cx_lo = std::min(r_max, cv.w - 1.0 - r_max);
    const double cy_lo = std::min(r_max, cv.h - 1.0 - r_max);
    const double cx = rng.uniform(cx_lo, std::max(cx_lo, cv.w - 1.0 - r_max));
    const double cy = rng.uniform(cy_lo, std::max(cy_lo, cv.h - 1.0 - r_max));

    double vx[3], vy[3];
    for (int i = 0; i < 3; ++i) {
        vx[i] = cx + ct * lx[i] - st * ly[i];
        vy[i] = cy + st * lx[i] + ct * ly[i];
    }

    auto edge = [&](int a, int b, double x, double y) {
        return (vx[b] - vx[a]) * (y - vy[a]) - (vy[b] - vy[a]) * (x - vx[a]);
    };
    const int y0 = std::max(0, int(std::floor(cy - r_max)));
    const int y1 = std::min(cv.h - 1, int(std::ceil(cy + r_max)));
    const int x0 = std::max(0, int(std::floor(cx - r_max)));
    const int x1 = std::min(cv.w - 1, int(std::ceil(cx + r_max)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double e0 = edge(0, 1, x, y);
            const double e1 = edge(1, 2, x, y);
            const double e2 = edge(2, 0, x, y);
            const bool pos = e0 >= 0 && e1 >= 0 && e2 >= 0;
            const bool neg = e0 <= 0 && e1 <= 0 && e2 <= 0;
            if (pos || neg) cv.put(y, x, col, cls);
        }
}

std::string sample_id(const std::string& split, int i) {
    std::ostringstream os;
    os << split << '_' << std::setw(5) << std::setfill('0') << i;
    return os.str();
}

// Validation streams must never collide with training streams.
constexpr uint64_t kValIndexBase = 1000000;

}  // namespace

Sample generate_scene(const SceneSpec& spec, int index) {
    spec.validate();
    if (index < 0) throw config_error("scene index must be >= 0");
    Rng rng(Rng::derive(spec.seed, uint64_t(index)));

    Canvas cv(spec.canvas_h, spec.canvas_w);
    float bg[3];
    shape_color(rng, 0, bg);
    for (int y = 0; y < cv.h; ++y)
        for (int x = 0; x < cv.w; ++x) cv.put(y, x, bg, 0);

    for (int cls = 1; cls < spec.classes; ++cls) {
        const auto& range = spec.counts[size_t(cls - 1)];
        const int n = rng.uniform_int(range.lo, range.hi);
        for (int i = 0; i < n; ++i) {
            switch (cls) {
                case 1: draw_rect(cv, rng, spec, cls); break;
                case 2: draw_bar(cv, rng, cls); break;
                case 3: draw_disk(cv, rng, cls); break;
                case 4: draw_square(cv, rng, cls); break;
                default: draw_triangle(cv, rng, cls); break;
            }
        }
    }

    Sample s;
    s.id = sample_id("adhoc", index);
    s.h = cv.h;
    s.w = cv.w;
    s.mask = std::move(cv.mask);
    s.image = Tensor({3, cv.h, cv.w});
    for (size_t i = 0; i < cv.rgb.size(); ++i) {
        const double v = std::clamp(double(cv.rgb[i]) + rng.uniform(-spec.noise_amp, spec.noise_amp), 0.0, 1.0);
        // quantize to 8 bits so disk round-trips reproduce the tensor exactly
        s.image[i] = float(std::lround(v * 255.0)) / 255.0f;
    }
    return s;
}

DatasetManifest generate_dataset(const SceneSpec& spec, int n_train, int n_val,
                                 const std::string& root) {
    spec.validate();
    if (n_train < 0 || n_val < 0)
        throw config_error("split sizes must be >= 0");

    DatasetManifest m;
    m.root = root;
    m.class_names.assign(family_class_names().begin(),
                         family_class_names().begin() + spec.classes);
    m.palette.assign(family_palette().begin(),
                     family_palette().begin() + spec.classes);

    const std::pair<std::string, int> plan[2] = {{"train", n_train}, {"val", n_val}};
    for (const auto& [split, n] : plan) {
        std::error_code ec;
        fs::create_directories(fs::path(root) / split / "img", ec);
        fs::create_directories(fs::path(root) / split / "mask", ec);
        if (ec) throw io_error("cannot create dataset directories under " + root +
                               ": " + ec.message());
        auto& ids = m.splits[split];
        for (int i = 0; i < n; ++i) {
            const int index = split == "val" ? int(kValIndexBase) + i : i;
            Sample s = generate_scene(spec, index);
            const std::string id = sample_id(split, i);
            std::vector<uint8_t> rgb(s.image.size());
            const size_t hw = size_t(s.h) * s.w;
            for (size_t p = 0; p < hw; ++p)
                for (int c = 0; c < 3; ++c)
                    rgb[p * 3 + size_t(c)] =
                        uint8_t(std::lround(double(s.image[size_t(c) * hw + p]) * 255.0));
            std::vector<uint8_t> mask(s.mask.size());
            for (size_t j = 0; j < mask.size(); ++j) mask[j] = uint8_t(s.mask[j]);
            write_png_rgb((fs::path(root) / split / "img" / (id + ".png")).string(),
                          rgb, s.h, s.w);
            write_png_gray((fs::path(root) / split / "mask" / (id + ".png")).string(),
                           mask, s.h, s.w);
            ids.push_back(id);
        }
    }

    json j;
    j["classes"] = m.class_names;
    for (const auto& p : m.palette)
        j["palette"].push_back(std::vector<int>{p[0], p[1], p[2]});
    if (m.palette.empty()) j["palette"] = json::array();
    for (const auto& [split, ids] : m.splits) j["splits"][split] = ids;
    std::ofstream out(fs::path(root) / "manifest.json");
    if (!out) throw io_error("cannot write manifest under " + root);
    out << j.dump(2) << '\n';
    return m;
}

DatasetManifest load_manifest(const std::string& root) {
    const auto path = (fs::path(root) / "manifest.json").string();
    std::ifstream in(path);
    if (!in) throw io_error("cannot open manifest: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw io_error("corrupt manifest " + path + ": " + e.what());
    }

    DatasetManifest m;
    m.root = root;
    try {
        m.class_names = j.at("classes").get<std::vector<std::string>>();
        for (const auto& p : j.at("palette")) {
            const auto v = p.get<std::vector<int>>();
            if (v.size() != 3) throw io_error("corrupt manifest " + path + ": palette entry");
            m.palette.push_back({uint8_t(v[0]), uint8_t(v[1]), uint8_t(v[2])});
        }
        for (const auto& [split, ids] : j.at("splits").items())
            m.splits[split] = ids.get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw io_error("corrupt manifest " + path + ": " + e.what());
    }
    if (m.classes() < 2)
        throw io_error("corrupt manifest " + path + ": fewer than 2 classes");
    if (m.palette.size() != m.class_names.size())
        throw io_error("corrupt manifest " + path + ": palette/class count mismatch");
    return m;
}

Sample load_sample(const DatasetManifest& m, const std::string& id) {
    std::string split;
    for (const auto& [name, ids] : m.splits)
        if (std::find(ids.begin(), ids.end(), id) != ids.end()) split = name;
    if (split.empty()) throw io_error("unknown sample id: " + id);

    const auto img_path = (fs::path(m.root) / split / "img" / (id + ".png")).string();
    const auto mask_path = (fs::path(m.root) / split / "mask" / (id + ".png")).string();
    const PngImage img = read_png(img_path);
    const PngImage msk = read_png(mask_path);
    if (img.channels != 3) throw io_error("corrupt dataset, image not RGB: " + img_path);
    if (msk.channels != 1) throw io_error("corrupt dataset, mask not grayscale: " + mask_path);
    if (img.h != msk.h || img.w != msk.w)
        throw io_error("corrupt dataset, image/mask size mismatch for id " + id);

    Sample s;
    s.id = id;
    s.h = img.h;
    s.w = img.w;
    s.image = Tensor({3, img.h, img.w});
    const size_t hw = size_t(img.h) * img.w;
    for (size_t p = 0; p < hw; ++p)
        for (int c = 0; c < 3; ++c)
            s.image[size_t(c) * hw + p] = float(img.pixels[p * 3 + size_t(c)]) / 255.0f;
    s.mask.resize(hw);
    for (size_t p = 0; p < hw; ++p) {
        const int v = msk.pixels[p];
        if (v != kIgnoreIndex && v >= m.classes())
            throw io_error("corrupt dataset, mask value " + std::to_string(v) +
                           " exceeds class count in " + mask_path);
        s.mask[p] = v;
    }
    return s;
}

Sample augment(const Sample& s, uint64_t seed) {
    Rng rng(seed);
    const bool flip = rng.bernoulli(0.5);
    const bool do_bright = rng.bernoulli(0.5);
    const double bright = do_bright ? rng.uniform(-0.2, 0.2) : 0.0;
    const bool do_contrast = rng.bernoulli(0.5);
    const double contrast = do_contrast ? rng.uniform(0.8, 1.2) : 1.0;

    Sample out;
    out.id = s.id;
    out.h = s.h;
    out.w = s.w;
    out.image = Tensor({3, s.h, s.w});
    out.mask.resize(s.mask.size());

    const size_t hw = size_t(s.h) * s.w;
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
            const size_t src = size_t(y) * s.w + size_t(flip ? s.w - 1 - x : x);
            const size_t dst = size_t(y) * s.w + size_t(x);
            out.mask[dst] = s.mask[src];
            for (int c = 0; c < 3; ++c) {
                double v = double(s.image[size_t(c) * hw + src]);
                v += bright;
                v = (v - 0.5) * contrast + 0.5;  // contrast pivots on mid-gray
                out.image[size_t(c) * hw + dst] = float(std::clamp(v, 0.0, 1.0));
            }
        }
    return out;
}

}  // namespace phgmm
