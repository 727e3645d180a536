#pragma once

#include <string>
#include <vector>

namespace phgmm {

// Network hyperparameters. Channel widths are depth_scale*{4,8,16,32}; the
// reference widths {256,512,1024,2048} correspond to depth_scale 64, the
// desk-scale default divides them by 32.
struct ModelConfig {
    int classes = 6;
    int k = 6;  // mixture components; convention here: defaults to classes
    int dz = 256;
    int dg = 256;
    int d_embed = 64;   // per-component embedding width
    int m_embed = 64;   // global embedding width
    int fused_depth = 512;
    int depth_scale = 2;
    int stem_kernel = 7;
    std::vector<int> units{2, 2, 2, 2};
    std::vector<int> dilations{1, 1, 1, 1};
    int decoder_units = 2;
    bool use_global = true;

    std::vector<int> widths() const {
        return {depth_scale * 4, depth_scale * 8, depth_scale * 16, depth_scale * 32};
    }
    void validate() const;
};

struct LossWeights {
    double lambda_g = 1.1;
    double lambda_z = 0.4;
    double lambda_s = 0.4;
};

struct TrainConfig {
    int epochs = 100;
    int batch_size = 1;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    unsigned long long seed = 1;
    LossWeights weights;
    ModelConfig model;
    int eval_interval = 10;        // epochs between val evaluations
    int checkpoint_interval = 50;  // epochs between periodic checkpoints
    bool augment = true;
    std::vector<long> latent_snapshots{100, 1000, 10000, 100000};

    void validate() const;
};

}  // namespace phgmm
