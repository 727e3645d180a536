#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phgmm/common.hpp"

namespace phgmm {

struct ConfusionMatrix {
    int classes = 0;
    std::vector<int64_t> counts;  // classes*classes, rows = ground truth
    int64_t ignored = 0;

    explicit ConfusionMatrix(int c = 0)
        : classes(c), counts(size_t(c) * size_t(c), 0) {}

    int64_t& at(int gt, int pred) { return counts[size_t(gt) * classes + pred]; }
    int64_t at(int gt, int pred) const { return counts[size_t(gt) * classes + pred]; }

    void add(const ConfusionMatrix& other);
};

struct ClassScores {
    std::vector<std::optional<double>> iou, precision, recall;
    double mean_iou = 0;        // fraction over defined classes
    double mean_iou_pct = 0;    // the same, as a percentage
    double mean_precision = 0;
    double mean_recall = 0;
};

struct TrimapResult {
    double error = 0;
    bool empty_band = false;
};

struct LatentCloud {
    std::vector<std::vector<double>> points;
    std::vector<int> labels;
    std::string tag;

    int n() const { return int(points.size()); }
};

ConfusionMatrix confusion(const std::vector<int>& pred, const std::vector<int>& gt,
                          int classes, int ignore = kIgnoreIndex);

ClassScores scores(const ConfusionMatrix& cm);

// Pixels strictly closer (euclidean) than width to the class-boundary set;
// boundaries use 4-connectivity between differing non-ignore classes.
std::vector<uint8_t> trimap_band(const std::vector<int>& gt, int h, int w,
                                 int width, int ignore = kIgnoreIndex);

TrimapResult trimap_error(const std::vector<int>& pred, const std::vector<int>& gt,
                          int h, int w, int width, int ignore = kIgnoreIndex);

// Exact squared euclidean distance to the nearest set pixel (two-pass
// lower-envelope transform); unreachable cells stay huge.
std::vector<double> squared_distance_transform(const std::vector<uint8_t>& set,
                                               int h, int w);

double silhouette(const LatentCloud& cloud);
double calinski_harabasz(const LatentCloud& cloud);
double davies_bouldin(const LatentCloud& cloud);

// Top-2 PCA projection; deterministic, sign fixed by the largest loading.
std::vector<std::array<double, 2>> project_2d(const LatentCloud& cloud);

}  // namespace phgmm
