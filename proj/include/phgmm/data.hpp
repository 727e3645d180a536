#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "phgmm/tensor.hpp"

namespace phgmm {

struct Sample {
    std::string id;
    int h = 0;
    int w = 0;
    Tensor image;           // [3,h,w], values are v/255 for 8-bit v
    std::vector<int> mask;  // h*w, class index or kIgnoreIndex
};

TensorF64 image_f64(const Sample& s);

// Closed inclusive count range for one shape family.
struct CountRange {
    int lo = 0;
    int hi = 0;
};

// Synthetic-scene recipe. Class 0 is background; classes 1..C-1 draw from
// the shape families in order: large rectangles, thin vertical bars, disks,
// small squares, triangles. Later families (and later shapes within one)
// occlude earlier ones.
struct SceneSpec {
    int canvas_h = 64;
    int canvas_w = 64;
    int classes = 6;
    uint64_t seed = 0;
    double noise_amp = 0.05;
    // rectangle side as a fraction of the canvas
    double rect_frac_lo = 0.25;
    double rect_frac_hi = 0.5;
    std::array<CountRange, 5> counts = {
        CountRange{1, 3},  // rectangles
        CountRange{1, 4},  // bars
        CountRange{1, 3},  // disks
        CountRange{2, 5},  // squares
        CountRange{1, 3},  // triangles
    };

    void validate() const;
};

struct DatasetManifest {
    std::string root;
    std::vector<std::string> class_names;
    std::vector<std::array<uint8_t, 3>> palette;
    std::map<std::string, std::vector<std::string>> splits;

    int classes() const { return int(class_names.size()); }
};

// Fixed names and render palette for the six supported classes.
const std::vector<std::string>& family_class_names();
const std::vector<std::array<uint8_t, 3>>& family_palette();

Sample generate_scene(const SceneSpec& spec, int index);

DatasetManifest generate_dataset(const SceneSpec& spec, int n_train, int n_val,
                                 const std::string& root);

DatasetManifest load_manifest(const std::string& root);

// id is looked up across splits; image and mask are validated on load.
Sample load_sample(const DatasetManifest& m, const std::string& id);

// Flip / brightness / contrast, each applied with probability 0.5.
Sample augment(const Sample& s, uint64_t seed);

}  // namespace phgmm
