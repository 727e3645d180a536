#include "phgmm/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

namespace phgmm {

void ConfusionMatrix::add(const ConfusionMatrix& other) {
    if (other.classes != classes) throw shape_error("confusion add: class count mismatch");
    for (size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    ignored += other.ignored;
}

ConfusionMatrix confusion(const std::vector<int>& pred, const std::vector<int>& gt,
                          int classes, int ignore) {
    if (pred.size() != gt.size()) throw shape_error("confusion: size mismatch");
    ConfusionMatrix cm(classes);
    for (size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] == ignore) {
            ++cm.ignored;
            continue;
        }
        if (gt[i] < 0 || gt[i] >= classes || pred[i] < 0 || pred[i] >= classes)
            throw shape_error("confusion: class out of range");
        ++cm.at(gt[i], pred[i]);
    }
    return cm;
}

ClassScores scores(const ConfusionMatrix& cm) {
    const int C = cm.classes;
    ClassScores s;
    s.iou.resize(size_t(C));
    s.precision.resize(size_t(C));
    s.recall.resize(size_t(C));
    double iou_sum = 0, prec_sum = 0, rec_sum = 0;
    int iou_n = 0, prec_n = 0, rec_n = 0;
    for (int i = 0; i < C; ++i) {
        const int64_t tp = cm.at(i, i);
        int64_t fp = 0, fn = 0;
        for (int j = 0; j < C; ++j) {
            if (j == i) continue;
            fp += cm.at(j, i);
            fn += cm.at(i, j);
        }
        if (tp + fp + fn > 0) {
            s.iou[size_t(i)] = double(tp) / double(tp + fp + fn);
            iou_sum += *s.iou[size_t(i)];
            ++iou_n;
        }
        if (tp + fp > 0) {
            s.precision[size_t(i)] = double(tp) / double(tp + fp);
            prec_sum += *s.precision[size_t(i)];
            ++prec_n;
        }
        if (tp + fn > 0) {
            s.recall[size_t(i)] = double(tp) / double(tp + fn);
            rec_sum += *s.recall[size_t(i)];
            ++rec_n;
        }
    }
    s.mean_iou = iou_n ? iou_sum / iou_n : 0.0;
    s.mean_iou_pct = 100.0 * s.mean_iou;
    s.mean_precision = prec_n ? prec_sum / prec_n : 0.0;
    s.mean_recall = rec_n ? rec_sum / rec_n : 0.0;
    return s;
}

namespace {

constexpr double kFar = 1e18;

// Lower-envelope distance transform of a sampled function, one row.
void dt_1d(const double* f, int n, double* out, int* v, double* z) {
    int k = 0;
    v[0] = 0;
    z[0] = -kFar;
    z[1] = kFar;
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            const int p = v[k];
            s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
            if (s > z[k]) break;
            --k;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kFar;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double d = q - v[k];
        out[q] = d * d + f[v[k]];
    }
}

}  // namespace

std::vector<double> squared_distance_transform(const std::vector<uint8_t>& set,
                                               int h, int w) {
    if (set.size() != size_t(h) * w) throw shape_error("distance transform: size mismatch");
    std::vector<double> d(set.size());
    for (size_t i = 0; i < set.size(); ++i) d[i] = set[i] ? 0.0 : kFar;

    const int n = std::max(h, w);
    std::vector<double> f(static_cast<size_t>(n)), out(static_cast<size_t>(n)), z(size_t(n) + 1);
    std::vector<int> v(static_cast<size_t>(n));

    for (int x = 0; x < w; ++x) {  // columns first
        for (int y = 0; y < h; ++y) f[size_t(y)] = d[size_t(y) * w + x];
        dt_1d(f.data(), h, out.data(), v.data(), z.data());
        for (int y = 0; y < h; ++y) d[size_t(y) * w + x] = out[size_t(y)];
    }
    for (int y = 0; y < h; ++y) {  // then rows
        for (int x = 0; x < w; ++x) f[size_t(x)] = d[size_t(y) * w + x];
        dt_1d(f.data(), w, out.data(), v.data(), z.data());
        for (int x = 0; x < w; ++x) d[size_t(y) * w + x] = out[size_t(x)];
    }
    return d;
}

std::vector<uint8_t> trimap_band(const std::vector<int>& gt, int h, int w,
                                 int width, int ignore) {
    if (gt.size() != size_t(h) * w) throw shape_error("trimap band: size mismatch");
    if (width < 1) throw config_error("trimap width must be >= 1");

    std::vector<uint8_t> boundary(gt.size(), 0);
    auto differs = [&](int a, int b) {
        return gt[size_t(a)] != ignore && gt[size_t(b)] != ignore &&
               gt[size_t(a)] != gt[size_t(b)];
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int p = y * w + x;
            if (gt[size_t(p)] == ignore) continue;
            if ((x + 1 < w && differs(p, p + 1)) || (x > 0 && differs(p, p - 1)) ||
                (y + 1 < h && differs(p, p + w)) || (y > 0 && differs(p, p - w)))
                boundary[size_t(p)] = 1;
        }

    const bool any = std::any_of(boundary.begin(), boundary.end(),
                                 [](uint8_t b) { return b != 0; });
    std::vector<uint8_t> band(gt.size(), 0);
    if (!any) return band;
    const auto d2 = squared_distance_transform(boundary, h, w);
    const double lim = double(width) * width;
    for (size_t i = 0; i < band.size(); ++i) band[i] = d2[i] < lim ? 1 : 0;
    return band;
}

TrimapResult trimap_error(const std::vector<int>& pred, const std::vector<int>& gt,
                          int h, int w, int width, int ignore) {
    if (pred.size() != gt.size()) throw shape_error("trimap error: size mismatch");
    const auto band = trimap_band(gt, h, w, width, ignore);
    int64_t total = 0, wrong = 0;
    for (size_t i = 0; i < band.size(); ++i) {
        if (!band[i] || gt[i] == ignore) continue;
        ++total;
        if (pred[i] != gt[i]) ++wrong;
    }
    TrimapResult r;
    r.empty_band = (total == 0);
    r.error = total ? double(wrong) / double(total) : 0.0;
    return r;
}

namespace {

double dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

// label -> indices of member points
std::map<int, std::vector<int>> group(const LatentCloud& cloud) {
    if (cloud.points.size() != cloud.labels.size())
        throw shape_error("latent cloud: point/label count mismatch");
    std::map<int, std::vector<int>> g;
    for (size_t i = 0; i < cloud.labels.size(); ++i)
        g[cloud.labels[i]].push_back(int(i));
    return g;
}

std::vector<double> centroid(const LatentCloud& cloud, const std::vector<int>& idx) {
    std::vector<double> c(cloud.points[0].size(), 0.0);
    for (int i : idx)
        for (size_t d = 0; d < c.size(); ++d) c[d] += cloud.points[size_t(i)][d];
    for (auto& v : c) v /= double(idx.size());
    return c;
}

}  // namespace

double silhouette(const LatentCloud& cloud) {
    const auto groups = group(cloud);
    if (groups.size() < 2)
        throw numeric_error("silhouette undefined: need at least 2 clusters");
    for (const auto& [label, idx] : groups)
        if (idx.size() < 2)
            throw numeric_error("silhouette undefined: cluster " +
                                std::to_string(label) + " is a singleton");

    double total = 0;
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        const int own = cloud.labels[i];
        double a = 0;
        double b = std::numeric_limits<double>::infinity();
        for (const auto& [label, idx] : groups) {
            double sum = 0;
            for (int j : idx) sum += dist(cloud.points[i], cloud.points[size_t(j)]);
            if (label == own)
                a = sum / double(idx.size() - 1);  // exclude the zero self-distance
            else
                b = std::min(b, sum / double(idx.size()));
        }
        const double m = std::max(a, b);
        total += (m > 0) ? (b - a) / m : 0.0;
    }
    return total / double(cloud.points.size());
}

double calinski_harabasz(const LatentCloud& cloud) {
    const auto groups = group(cloud);
    const int k = int(groups.size());
    const int n = cloud.n();
    if (k < 2 || k >= n)
        throw numeric_error("CHI undefined: need 1 < clusters < points");

    std::vector<int> all(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) all[size_t(i)] = i;
    const auto global = centroid(cloud, all);

    double ss_m = 0, ss_w = 0;
    for (const auto& [label, idx] : groups) {
        const auto c = centroid(cloud, idx);
        const double dc = dist(c, global);
        ss_m += double(idx.size()) * dc * dc;
        for (int i : idx) {
            const double di = dist(cloud.points[size_t(i)], c);
            ss_w += di * di;
        }
    }
    if (ss_w == 0) return std::numeric_limits<double>::infinity();
    return (ss_m / ss_w) * double(n - k) / double(k - 1);
}

double davies_bouldin(const LatentCloud& cloud) {
    const auto groups = group(cloud);
    const int k = int(groups.size());
    if (k < 2) throw numeric_error("DBI undefined: need at least 2 clusters");

    std::vector<std::vector<double>> cents;
    std::vector<double> spread;
    for (const auto& [label, idx] : groups) {
        const auto c = centroid(cloud, idx);
        double s = 0;
        for (int i : idx) s += dist(cloud.points[size_t(i)], c);
        cents.push_back(c);
        spread.push_back(s / double(idx.size()));
    }

    double total = 0;
    for (int i = 0; i < k; ++i) {
        double worst = 0;
        for (int j = 0; j < k; ++j) {
            if (j == i) continue;
            const double d = dist(cents[size_t(i)], cents[size_t(j)]);
            if (d == 0)
                throw numeric_error("DBI undefined: coincident cluster centroids");
            worst = std::max(worst, (spread[size_t(i)] + spread[size_t(j)]) / d);
        }
        total += worst;
    }
    return total / k;
}

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix (column eigenvectors).
void jacobi_eigen(std::vector<double>& a, int n, std::vector<double>& vecs) {
    vecs.assign(size_t(n) * n, 0.0);
    for (int i = 0; i < n; ++i) vecs[size_t(i) * n + i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a[size_t(p) * n + q] * a[size_t(p) * n + q];
        if (off < 1e-24) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                const double apq = a[size_t(p) * n + q];
                if (std::abs(apq) < 1e-300) continue;
                const double app = a[size_t(p) * n + p], aqq = a[size_t(q) * n + q];
                const double theta = (aqq - app) / (2 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1.0 / std::sqrt(t * t + 1), s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = a[size_t(i) * n + p], aiq = a[size_t(i) * n + q];
                    a[size_t(i) * n + p] = c * aip - s * aiq;
                    a[size_t(i) * n + q] = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = a[size_t(p) * n + i], aqi = a[size_t(q) * n + i];
                    a[size_t(p) * n + i] = c * api - s * aqi;
                    a[size_t(q) * n + i] = s * api + c * aqi;
                }
                for (int i = 0; i < n; ++i) {
                    const double vip = vecs[size_t(i) * n + p], viq = vecs[size_t(i) * n + q];
                    vecs[size_t(i) * n + p] = c * vip - s * viq;
                    vecs[size_t(i) * n + q] = s * vip + c * viq;
                }
            }
    }
}

}  // namespace

std::vector<std::array<double, 2>> project_2d(const LatentCloud& cloud) {
    const int n = cloud.n();
    if (n < 2) throw numeric_error("2d projection undefined: need at least 2 points");
    const int d = int(cloud.points[0].size());

    std::vector<double> mean(size_t(d), 0.0);
    for (const auto& p : cloud.points)
        for (int j = 0; j < d; ++j) mean[size_t(j)] += p[size_t(j)];
    for (auto& v : mean) v /= n;

    std::vector<double> cov(size_t(d) * d, 0.0);
    double total_var = 0;
    for (const auto& p : cloud.points)
        for (int i = 0; i < d; ++i) {
            const double xi = p[size_t(i)] - mean[size_t(i)];
            for (int j = 0; j < d; ++j)
                cov[size_t(i) * d + j] += xi * (p[size_t(j)] - mean[size_t(j)]);
        }
    for (auto& v : cov) v /= double(n - 1);
    for (int i = 0; i < d; ++i) total_var += cov[size_t(i) * d + i];

    std::vector<std::array<double, 2>> out(size_t(n), {0.0, 0.0});
    if (total_var <= 1e-30) return out;  // zero-variance cloud

    std::vector<double> vecs;
    jacobi_eigen(cov, d, vecs);  // cov now holds eigenvalues on the diagonal

    std::vector<int> order(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) order[size_t(i)] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return cov[size_t(a) * d + a] > cov[size_t(b) * d + b];
    });

    for (int comp = 0; comp < std::min(2, d); ++comp) {
        const int col = order[size_t(comp)];
        std::vector<double> axis(static_cast<size_t>(d));
        for (int i = 0; i < d; ++i) axis[size_t(i)] = vecs[size_t(i) * d + col];
        int arg = 0;
        for (int i = 1; i < d; ++i)
            if (std::abs(axis[size_t(i)]) > std::abs(axis[size_t(arg)])) arg = i;
        if (axis[size_t(arg)] < 0)
            for (auto& v : axis) v = -v;
        for (int r = 0; r < n; ++r) {
            double s = 0;
            for (int i = 0; i < d; ++i)
                s += (cloud.points[size_t(r)][size_t(i)] - mean[size_t(i)]) * axis[size_t(i)];
            out[size_t(r)][size_t(comp)] = s;
        }
    }
    return out;
}

}  // namespace phgmm
