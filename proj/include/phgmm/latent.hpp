#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "phgmm/backbone.hpp"
#include "phgmm/config.hpp"
#include "phgmm/nn.hpp"
#include "phgmm/rng.hpp"

namespace phgmm {

// Log-stds are clamped to this range everywhere a head emits them, keeping
// every KL term finite.
inline constexpr double kLogStdClamp = 7.0;

// Plain-value mixture parameters (weights are softmax(logits)).
struct MixtureParams {
    int k = 0;
    int dz = 0;
    std::vector<double> means;     // k*dz
    std::vector<double> log_stds;  // k*dz
    std::vector<double> logits;    // k

    std::vector<double> weights() const {
        double mx = logits[0];
        for (double v : logits) mx = std::max(mx, v);
        std::vector<double> w(logits.size());
        double s = 0;
        for (size_t i = 0; i < w.size(); ++i) {
            w[i] = std::exp(logits[i] - mx);
            s += w[i];
        }
        for (auto& v : w) v /= s;
        return w;
    }
};

struct GaussianParams {
    std::vector<double> mean;
    std::vector<double> log_std;
};

// Graph-node handles for the same quantities.
struct MixtureNodes {
    std::vector<int> means;     // k nodes of [dz]
    std::vector<int> log_stds;  // k nodes of [dz], already clamped
    int logits = -1;            // [k]
};

struct GaussianNodes {
    int mean = -1;
    int log_std = -1;  // clamped
};

// Draws n points from the mixture: component by weight, then a diagonal
// Gaussian draw. Pure function of (mp, seed).
inline std::vector<std::vector<double>> sample_mixture(const MixtureParams& mp,
                                                       int n, uint64_t seed) {
    Rng rng(seed);
    const auto w = mp.weights();
    std::vector<std::vector<double>> out;
    out.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform();
        int k = 0;
        while (k + 1 < mp.k && u >= w[size_t(k)]) {
            u -= w[size_t(k)];
            ++k;
        }
        std::vector<double> z(size_t(mp.dz));
        for (int d = 0; d < mp.dz; ++d) {
            const size_t idx = size_t(k) * mp.dz + d;
            z[size_t(d)] = mp.means[idx] + std::exp(mp.log_stds[idx]) * rng.normal();
        }
        out.push_back(std::move(z));
    }
    return out;
}

// Shared trunk of both heads: each pyramid level goes through a 3x3
// convolution to depth C with sigmoid, then global average pooling; the four
// pooled vectors concatenate to [4C].
template <typename T>
struct PooledTrunkT {
    std::vector<std::unique_ptr<Conv2dT<T>>> convs;

    PooledTrunkT(const std::string& name, const ModelConfig& cfg, Rng& rng) {
        const auto widths = cfg.widths();
        for (int i = 0; i < 4; ++i)
            convs.push_back(std::make_unique<Conv2dT<T>>(
                name + ".lvl" + std::to_string(i + 1), widths[size_t(i)], cfg.classes,
                3, 1, rng));
    }

    int forward(GraphT<T>& g, const PyramidNodes& p) {
        const int lv[4] = {p.f1, p.f2, p.f3, p.f4};
        std::vector<int> pooled;
        for (int i = 0; i < 4; ++i)
            pooled.push_back(
                g.global_avg_pool(g.sigmoid(convs[size_t(i)]->forward(g, lv[i]))));
        return g.concat(pooled);
    }

    void collect(ParamList<T>& out) {
        for (auto& c : convs) c->collect(out);
    }
};

// Local mixture head: K affine heads emit (mean, log_std) pairs; a separate
// affine head emits the K component logits.
template <typename T>
class LocalHeadT {
public:
    LocalHeadT(const std::string& name, const ModelConfig& cfg, Rng& rng)
        : trunk_(name + ".trunk", cfg, rng), dz_(cfg.dz) {
        const int in = 4 * cfg.classes;
        for (int k = 0; k < cfg.k; ++k) {
            comp_.push_back(std::make_unique<LinearT<T>>(
                name + ".comp" + std::to_string(k), in, 2 * cfg.dz, rng));
            // log-std halves start at zero so every component begins at unit
            // scale; the mean halves keep their random init to break the
            // component symmetry.
            auto& w = comp_.back()->w.value;
            for (int r = cfg.dz; r < 2 * cfg.dz; ++r)
                for (int c = 0; c < in; ++c) w[size_t(r) * in + c] = T(0);
        }
        logits_ = std::make_unique<LinearT<T>>(name + ".logits", in, cfg.k, rng);
    }

    MixtureNodes forward(GraphT<T>& g, const PyramidNodes& p) {
        const int t = trunk_.forward(g, p);
        MixtureNodes mn;
        for (auto& head : comp_) {
            const int both = head->forward(g, t);
            mn.means.push_back(g.slice(both, 0, dz_));
            mn.log_stds.push_back(
                g.clamp(g.slice(both, dz_, dz_), T(-kLogStdClamp), T(kLogStdClamp)));
        }
        mn.logits = logits_->forward(g, t);
        return mn;
    }

    void collect(ParamList<T>& out) {
        trunk_.collect(out);
        for (auto& c : comp_) c->collect(out);
        logits_->collect(out);
    }

private:
    PooledTrunkT<T> trunk_;
    std::vector<std::unique_ptr<LinearT<T>>> comp_;
    std::unique_ptr<LinearT<T>> logits_;
    int dz_;
};

// Global Gaussian head: trunk, then two stacked affine layers producing the
// (mean, log_std) pair of width Dg.
template <typename T>
class GlobalHeadT {
public:
    GlobalHeadT(const std::string& name, const ModelConfig& cfg, Rng& rng)
        : trunk_(name + ".trunk", cfg, rng),
          fc1_(name + ".fc1", 4 * cfg.classes, cfg.dg, rng),
          fc2_(name + ".fc2", cfg.dg, 2 * cfg.dg, rng),
          dg_(cfg.dg) {}

    GaussianNodes forward(GraphT<T>& g, const PyramidNodes& p) {
        const int h = fc2_.forward(g, fc1_.forward(g, trunk_.forward(g, p)));
        GaussianNodes gn;
        gn.mean = g.slice(h, 0, dg_);
        gn.log_std =
            g.clamp(g.slice(h, dg_, dg_), T(-kLogStdClamp), T(kLogStdClamp));
        return gn;
    }

    void collect(ParamList<T>& out) {
        trunk_.collect(out);
        fc1_.collect(out);
        fc2_.collect(out);
    }

private:
    PooledTrunkT<T> trunk_;
    LinearT<T> fc1_;
    LinearT<T> fc2_;
    int dg_;
};

// Decoder-side embedding of the local mixture: each pi^k-weighted mean passes
// its own affine+ReLU to width D, is replicated over h/32 x w/32, the K maps
// concatenate, and a 3x3 convolution fuses them to fused_depth.
template <typename T>
class LocalEmbeddingT {
public:
    LocalEmbeddingT(const std::string& name, const ModelConfig& cfg, Rng& rng)
        : fuse_(name + ".fuse", cfg.k * cfg.d_embed, cfg.fused_depth, 3, 1, rng) {
        for (int k = 0; k < cfg.k; ++k)
            fcs_.push_back(std::make_unique<LinearT<T>>(
                name + ".fc" + std::to_string(k), cfg.dz, cfg.d_embed, rng));
    }

    int forward(GraphT<T>& g, const MixtureNodes& mn, int h32, int w32) {
        const int pi = g.softmax_vec(mn.logits);
        std::vector<int> maps;
        for (size_t k = 0; k < fcs_.size(); ++k) {
            const int wk = g.slice(pi, int(k), 1);
            const int weighted = g.mul_scalar_node(mn.means[k], wk);
            const int e = g.relu(fcs_[k]->forward(g, weighted));
            maps.push_back(g.broadcast_spatial(e, h32, w32));
        }
        return fuse_.forward(g, g.concat_channels(maps));
    }

    void collect(ParamList<T>& out) {
        for (auto& f : fcs_) f->collect(out);
        fuse_.collect(out);
    }

private:
    std::vector<std::unique_ptr<LinearT<T>>> fcs_;
    Conv2dT<T> fuse_;
};

// Global embedding: mu_g through one affine to width M, replicated at
// h/32 x w/32, bilinearly upsampled x8 to h/4 x w/4.
template <typename T>
class GlobalEmbeddingT {
public:
    GlobalEmbeddingT(const std::string& name, const ModelConfig& cfg, Rng& rng)
        : fc_(name + ".fc", cfg.dg, cfg.m_embed, rng) {}

    int forward(GraphT<T>& g, const GaussianNodes& gn, int h32, int w32) {
        const int e = fc_.forward(g, gn.mean);
        return g.bilinear_upsample(g.broadcast_spatial(e, h32, w32), 8);
    }

    void collect(ParamList<T>& out) { fc_.collect(out); }

private:
    LinearT<T> fc_;
};

}  // namespace phgmm
