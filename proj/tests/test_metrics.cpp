#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "phgmm/metrics.hpp"
#include "phgmm/rng.hpp"

using namespace phgmm;

namespace {

std::vector<int> random_mask(Rng& rng, int h, int w, int classes, double p_ignore) {
    std::vector<int> m(size_t(h) * w);
    for (auto& v : m)
        v = rng.bernoulli(p_ignore) ? kIgnoreIndex : int(rng.next_below(uint64_t(classes)));
    return m;
}

// all-pairs scan over an explicitly enumerated boundary set
std::vector<uint8_t> band_oracle(const std::vector<int>& gt, int h, int w, int width) {
    std::vector<std::pair<int, int>> boundary;
    const int dy[4] = {0, 0, 1, -1}, dx[4] = {1, -1, 0, 0};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (gt[size_t(y) * w + x] == kIgnoreIndex) continue;
            for (int k = 0; k < 4; ++k) {
                const int ny = y + dy[k], nx = x + dx[k];
                if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                const int other = gt[size_t(ny) * w + nx];
                if (other != kIgnoreIndex && other != gt[size_t(y) * w + x]) {
                    boundary.emplace_back(y, x);
                    k = 4;
                }
            }
        }
    std::vector<uint8_t> band(size_t(h) * w, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (const auto& [by, bx] : boundary) {
                const double d2 = double(y - by) * (y - by) + double(x - bx) * (x - bx);
                if (d2 < double(width) * width) {
                    band[size_t(y) * w + x] = 1;
                    break;
                }
            }
    return band;
}

LatentCloud make_cloud(std::vector<std::vector<double>> pts, std::vector<int> labels) {
    LatentCloud c;
    c.points = std::move(pts);
    c.labels = std::move(labels);
    return c;
}

LatentCloud random_cloud(Rng& rng, int n, int dz, int k) {
    LatentCloud c;
    for (int i = 0; i < n; ++i) {
        const int label = int(rng.next_below(uint64_t(k)));
        std::vector<double> p(static_cast<size_t>(dz));
        for (auto& v : p) v = 3.0 * label + rng.normal();
        c.points.push_back(std::move(p));
        c.labels.push_back(label);
    }
    return c;
}

// guarantees every cluster has >= 2 members
LatentCloud random_valid_cloud(Rng& rng, int n, int dz, int k) {
    while (true) {
        auto c = random_cloud(rng, n, dz, k);
        std::vector<int> count(size_t(k), 0);
        for (int l : c.labels) ++count[size_t(l)];
        if (std::all_of(count.begin(), count.end(), [](int v) { return v >= 2; }))
            return c;
    }
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

double silhouette_oracle(const LatentCloud& c) {
    const int n = c.n();
    double total = 0;
    for (int i = 0; i < n; ++i) {
        std::set<int> others(c.labels.begin(), c.labels.end());
        others.erase(c.labels[size_t(i)]);
        double a_sum = 0;
        int a_n = 0;
        for (int j = 0; j < n; ++j)
            if (j != i && c.labels[size_t(j)] == c.labels[size_t(i)]) {
                a_sum += dist(c.points[size_t(i)], c.points[size_t(j)]);
                ++a_n;
            }
        const double a = a_sum / a_n;
        double b = std::numeric_limits<double>::infinity();
        for (int l : others) {
            double s = 0;
            int m = 0;
            for (int j = 0; j < n; ++j)
                if (c.labels[size_t(j)] == l) {
                    s += dist(c.points[size_t(i)], c.points[size_t(j)]);
                    ++m;
                }
            b = std::min(b, s / m);
        }
        const double mx = std::max(a, b);
        total += mx > 0 ? (b - a) / mx : 0.0;
    }
    return total / n;
}

}  // namespace

TEST_CASE("confusion matrix: hand cases and accounting invariant") {
    const std::vector<int> gt = {0, 1, 0, 1};
    const std::vector<int> pred = {0, 1, 1, 1};
    const auto cm = confusion(pred, gt, 2);
    CHECK(cm.at(0, 0) == 1);
    CHECK(cm.at(0, 1) == 1);
    CHECK(cm.at(1, 0) == 0);
    CHECK(cm.at(1, 1) == 2);
    CHECK(cm.ignored == 0);

    const auto diag = confusion(gt, gt, 2);
    CHECK(diag.at(0, 0) == 2);
    CHECK(diag.at(1, 1) == 2);
    CHECK(diag.at(0, 1) == 0);

    const std::vector<int> all_ig(9, kIgnoreIndex);
    const auto ig = confusion(std::vector<int>(9, 0), all_ig, 2);
    CHECK(ig.ignored == 9);
    CHECK(std::all_of(ig.counts.begin(), ig.counts.end(),
                      [](int64_t v) { return v == 0; }));

    Rng rng(1);
    const auto g = random_mask(rng, 8, 8, 3, 0.2);
    const auto p = random_mask(rng, 8, 8, 3, 0.0);
    const auto r = confusion(p, g, 3);
    int64_t total = r.ignored;
    for (int64_t v : r.counts) total += v;
    CHECK(total == 64);

    CHECK_THROWS_AS(confusion({5}, {0}, 2), shape_error);
}

TEST_CASE("scores: hand values, skip rule, brute-force equality") {
    const std::vector<int> gt = {0, 1, 0, 1};
    const std::vector<int> pred = {0, 1, 1, 1};
    const auto s = scores(confusion(pred, gt, 2));
    CHECK(*s.iou[0] == doctest::Approx(0.5));
    CHECK(*s.iou[1] == doctest::Approx(2.0 / 3.0));
    CHECK(s.mean_iou == doctest::Approx(7.0 / 12.0));
    CHECK(s.mean_iou_pct == doctest::Approx(100.0 * 7 / 12));

    const auto sd = scores(confusion(gt, gt, 2));
    CHECK(sd.mean_iou_pct == doctest::Approx(100.0));
    CHECK(*sd.precision[0] == 1.0);
    CHECK(*sd.recall[1] == 1.0);

    // class 2 appears nowhere: skipped from all means
    const auto s3 = scores(confusion(pred, gt, 3));
    CHECK(!s3.iou[2].has_value());
    CHECK(s3.mean_iou == doctest::Approx(7.0 / 12.0));

    Rng rng(7);
    for (int trial = 0; trial < 60; ++trial) {
        const int h = 2 + int(rng.next_below(15)), w = 2 + int(rng.next_below(15));
        const int C = 2 + int(rng.next_below(3));
        const auto g = random_mask(rng, h, w, C, 0.1);
        const auto p = random_mask(rng, h, w, C, 0.0);
        const auto got = scores(confusion(p, g, C));
        for (int c = 0; c < C; ++c) {
            int64_t tp = 0, fp = 0, fn = 0;
            for (size_t i = 0; i < g.size(); ++i) {
                if (g[i] == kIgnoreIndex) continue;
                if (p[i] == c && g[i] == c) ++tp;
                if (p[i] == c && g[i] != c) ++fp;
                if (p[i] != c && g[i] == c) ++fn;
            }
            if (tp + fp + fn > 0)
                CHECK(*got.iou[size_t(c)] == double(tp) / double(tp + fp + fn));
            else
                CHECK(!got.iou[size_t(c)].has_value());
            if (tp + fp > 0) CHECK(*got.precision[size_t(c)] == double(tp) / double(tp + fp));
            if (tp + fn > 0) CHECK(*got.recall[size_t(c)] == double(tp) / double(tp + fn));
        }
    }
}

TEST_CASE("trimap band: hand case, monotonicity, all-pairs oracle") {
    std::vector<int> uniform(16, 2);
    const auto none = trimap_band(uniform, 4, 4, 3);
    CHECK(std::all_of(none.begin(), none.end(), [](uint8_t v) { return v == 0; }));

    // left half class 0, right half class 1; boundary = middle two columns
    std::vector<int> split(16);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) split[size_t(y) * 4 + x] = x < 2 ? 0 : 1;
    const auto b1 = trimap_band(split, 4, 4, 1);
    int count = 0;
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            const bool in_band = b1[size_t(y) * 4 + x] != 0;
            CHECK(in_band == (x == 1 || x == 2));
            count += in_band;
        }
    CHECK(count == 8);

    Rng rng(13);
    for (int trial = 0; trial < 40; ++trial) {
        const int h = 2 + int(rng.next_below(15)), w = 2 + int(rng.next_below(15));
        const auto g = random_mask(rng, h, w, 3, trial % 3 ? 0.0 : 0.15);
        const int width = 1 + int(rng.next_below(6));
        CHECK(trimap_band(g, h, w, width) == band_oracle(g, h, w, width));

        const auto narrow = trimap_band(g, h, w, width);
        const auto wide = trimap_band(g, h, w, width + 3);
        for (size_t i = 0; i < narrow.size(); ++i)
            if (narrow[i]) CHECK(wide[i] == 1);
    }
}

TEST_CASE("trimap error: perfect prediction, hand value, empty band") {
    std::vector<int> split(16);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) split[size_t(y) * 4 + x] = x < 2 ? 0 : 1;

    for (int wdt : {1, 2, 5}) {
        const auto r = trimap_error(split, split, 4, 4, wdt);
        CHECK(r.error == 0.0);
        CHECK(!r.empty_band);
    }

    const std::vector<int> zeros(16, 0);
    const auto r = trimap_error(zeros, split, 4, 4, 1);
    CHECK(r.error == doctest::Approx(0.5));

    std::vector<int> uniform(16, 1);
    const auto e = trimap_error(zeros, uniform, 4, 4, 1);
    CHECK(e.empty_band);
    CHECK(e.error == 0.0);
}

TEST_CASE("squared distance transform matches brute force") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        const int h = 1 + int(rng.next_below(16)), w = 1 + int(rng.next_below(16));
        std::vector<uint8_t> set(size_t(h) * w, 0);
        for (auto& v : set) v = rng.bernoulli(0.15) ? 1 : 0;
        if (std::none_of(set.begin(), set.end(), [](uint8_t v) { return v; }))
            set[rng.next_below(set.size())] = 1;
        const auto d2 = squared_distance_transform(set, h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double best = 1e30;
                for (int by = 0; by < h; ++by)
                    for (int bx = 0; bx < w; ++bx)
                        if (set[size_t(by) * w + bx])
                            best = std::min(best, double(y - by) * (y - by) +
                                                      double(x - bx) * (x - bx));
                CHECK(d2[size_t(y) * w + x] == best);
            }
    }
}

TEST_CASE("silhouette: spec instance, interleaved clusters, oracle") {
    const auto well = make_cloud({{0, 0}, {0, 1}, {10, 0}, {10, 1}}, {0, 0, 1, 1});
    const double a = 1.0, b = (10.0 + std::sqrt(101.0)) / 2.0;
    CHECK(silhouette(well) == doctest::Approx((b - a) / b));
    CHECK(silhouette(well) == doctest::Approx(0.900).epsilon(1e-3));

    // two identical interleaved clusters score at or below zero
    const auto mixed = make_cloud(
        {{0, 0}, {1, 0}, {2, 0}, {0, 0.01}, {1, 0.01}, {2, 0.01}},
        {0, 0, 0, 1, 1, 1});
    CHECK(silhouette(mixed) <= 0.0);

    CHECK_THROWS_AS(silhouette(make_cloud({{0, 0}, {1, 1}, {2, 2}}, {0, 0, 1})),
                    numeric_error);
    CHECK_THROWS_AS(silhouette(make_cloud({{0, 0}, {1, 1}}, {0, 0})), numeric_error);

    Rng rng(19);
    for (int trial = 0; trial < 25; ++trial) {
        const auto c = random_valid_cloud(rng, 8 + int(rng.next_below(23)), 3,
                                          2 + int(rng.next_below(2)));
        const double got = silhouette(c);
        CHECK(got == doctest::Approx(silhouette_oracle(c)).epsilon(1e-9));
        CHECK(got >= -1.0);
        CHECK(got <= 1.0);
    }
}

TEST_CASE("calinski-harabasz: hand value, degenerate cases, oracle") {
    const auto well = make_cloud({{0, 0}, {0, 1}, {10, 0}, {10, 1}}, {0, 0, 1, 1});
    CHECK(calinski_harabasz(well) == doctest::Approx(200.0));

    // centroids both at the origin: SS_M = 0
    const auto sym = make_cloud({{1, 0}, {-1, 0}, {0, 1}, {0, -1}}, {0, 0, 1, 1});
    CHECK(calinski_harabasz(sym) == doctest::Approx(0.0));

    // every point sits on its centroid: SS_W = 0
    const auto tight = make_cloud({{0, 0}, {0, 0}, {5, 5}, {5, 5}}, {0, 0, 1, 1});
    CHECK(std::isinf(calinski_harabasz(tight)));

    auto shifted = well;
    for (auto& p : shifted.points)
        for (auto& v : p) v += 42.0;
    CHECK(calinski_harabasz(shifted) == doctest::Approx(calinski_harabasz(well)));

    CHECK_THROWS_AS(calinski_harabasz(make_cloud({{0, 0}, {1, 1}}, {0, 0})),
                    numeric_error);

    Rng rng(23);
    for (int trial = 0; trial < 25; ++trial) {
        const auto c = random_valid_cloud(rng, 10 + int(rng.next_below(21)), 3, 3);
        // independent accumulation
        std::vector<double> global(3, 0.0);
        for (const auto& p : c.points)
            for (int d = 0; d < 3; ++d) global[size_t(d)] += p[size_t(d)];
        for (auto& v : global) v /= c.n();
        double ssm = 0, ssw = 0;
        std::set<int> labels(c.labels.begin(), c.labels.end());
        for (int l : labels) {
            std::vector<double> cen(3, 0.0);
            int m = 0;
            for (int i = 0; i < c.n(); ++i)
                if (c.labels[size_t(i)] == l) {
                    for (int d = 0; d < 3; ++d) cen[size_t(d)] += c.points[size_t(i)][size_t(d)];
                    ++m;
                }
            for (auto& v : cen) v /= m;
            ssm += m * dist(cen, global) * dist(cen, global);
            for (int i = 0; i < c.n(); ++i)
                if (c.labels[size_t(i)] == l)
                    ssw += dist(c.points[size_t(i)], cen) * dist(c.points[size_t(i)], cen);
        }
        const double expect =
            (ssm / ssw) * double(c.n() - int(labels.size())) / double(int(labels.size()) - 1);
        CHECK(calinski_harabasz(c) == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("davies-bouldin: hand value, degenerate cases, oracle") {
    const auto well = make_cloud({{0, 0}, {0, 1}, {10, 0}, {10, 1}}, {0, 0, 1, 1});
    CHECK(davies_bouldin(well) == doctest::Approx(0.1));

    const auto tight = make_cloud({{0, 0}, {0, 0}, {5, 5}, {5, 5}}, {0, 0, 1, 1});
    CHECK(davies_bouldin(tight) == doctest::Approx(0.0));

    const auto coincident =
        make_cloud({{1, 0}, {-1, 0}, {0, 1}, {0, -1}}, {0, 0, 1, 1});
    CHECK_THROWS_AS(davies_bouldin(coincident), numeric_error);

    Rng rng(29);
    for (int trial = 0; trial < 25; ++trial) {
        const auto c = random_valid_cloud(rng, 10 + int(rng.next_below(21)), 3, 3);
        std::set<int> labels(c.labels.begin(), c.labels.end());
        std::vector<std::vector<double>> cents;
        std::vector<double> spread;
        for (int l : labels) {
            std::vector<double> cen(3, 0.0);
            int m = 0;
            for (int i = 0; i < c.n(); ++i)
                if (c.labels[size_t(i)] == l) {
                    for (int d = 0; d < 3; ++d) cen[size_t(d)] += c.points[size_t(i)][size_t(d)];
                    ++m;
                }
            for (auto& v : cen) v /= m;
            double s = 0;
            for (int i = 0; i < c.n(); ++i)
                if (c.labels[size_t(i)] == l) s += dist(c.points[size_t(i)], cen);
            cents.push_back(cen);
            spread.push_back(s / m);
        }
        double expect = 0;
        for (size_t i = 0; i < cents.size(); ++i) {
            double worst = 0;
            for (size_t j = 0; j < cents.size(); ++j)
                if (j != i)
                    worst = std::max(worst,
                                     (spread[i] + spread[j]) / dist(cents[i], cents[j]));
            expect += worst;
        }
        expect /= double(cents.size());
        CHECK(davies_bouldin(c) == doctest::Approx(expect).epsilon(1e-9));
        CHECK(davies_bouldin(c) >= 0.0);
    }
}

TEST_CASE("2d projection: rotation property, rank-1, duplicates, zeros") {
    Rng rng(31);

    // already-2d cloud: projection preserves pairwise distances
    LatentCloud flat;
    for (int i = 0; i < 12; ++i) {
        flat.points.push_back({2 * rng.normal(), rng.normal()});
        flat.labels.push_back(0);
    }
    const auto pf = project_2d(flat);
    for (int i = 0; i < 12; ++i)
        for (int j = i + 1; j < 12; ++j) {
            const double orig = dist(flat.points[size_t(i)], flat.points[size_t(j)]);
            const double proj = std::hypot(pf[size_t(i)][0] - pf[size_t(j)][0],
                                           pf[size_t(i)][1] - pf[size_t(j)][1]);
            CHECK(proj == doctest::Approx(orig).epsilon(1e-9));
        }

    // rank-1 cloud in 4d: second coordinate vanishes
    LatentCloud line;
    for (int i = 0; i < 9; ++i) {
        const double t = i - 4.0;
        line.points.push_back({t, 2 * t, -t, 0.5 * t});
        line.labels.push_back(0);
    }
    const auto pl = project_2d(line);
    for (const auto& p : pl) CHECK(std::abs(p[1]) < 1e-9);

    // duplicated rows stay duplicated
    LatentCloud dup;
    dup.points = {{1, 2, 3}, {4, 5, 6}, {1, 2, 3}, {7, 8, 9}};
    dup.labels = {0, 0, 0, 0};
    const auto pd = project_2d(dup);
    CHECK(pd[0][0] == doctest::Approx(pd[2][0]).epsilon(1e-12));
    CHECK(pd[0][1] == doctest::Approx(pd[2][1]).epsilon(1e-12));

    // zero-variance cloud maps to zeros
    LatentCloud zero;
    zero.points = {{3, 3}, {3, 3}, {3, 3}};
    zero.labels = {0, 0, 0};
    for (const auto& p : project_2d(zero)) {
        CHECK(p[0] == 0.0);
        CHECK(p[1] == 0.0);
    }

    // determinism
    const auto again = project_2d(line);
    for (size_t i = 0; i < pl.size(); ++i) {
        CHECK(pl[i][0] == again[i][0]);
        CHECK(pl[i][1] == again[i][1]);
    }
}
