#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "phgmm/backbone.hpp"
#include "phgmm/config.hpp"
#include "phgmm/latent.hpp"
#include "phgmm/nn.hpp"

namespace phgmm {

template <typename T>
MixtureParams read_mixture(GraphT<T>& g, const MixtureNodes& mn) {
    MixtureParams mp;
    mp.k = int(mn.means.size());
    mp.dz = g.val(mn.means[0]).dim(0);
    for (int k = 0; k < mp.k; ++k)
        for (int d = 0; d < mp.dz; ++d) {
            mp.means.push_back(double(g.val(mn.means[size_t(k)])[size_t(d)]));
            mp.log_stds.push_back(double(g.val(mn.log_stds[size_t(k)])[size_t(d)]));
        }
    for (int k = 0; k < mp.k; ++k)
        mp.logits.push_back(double(g.val(mn.logits)[size_t(k)]));
    return mp;
}

template <typename T>
GaussianParams read_gaussian(GraphT<T>& g, const GaussianNodes& gn) {
    GaussianParams gp;
    for (size_t d = 0; d < g.val(gn.mean).size(); ++d) {
        gp.mean.push_back(double(g.val(gn.mean)[d]));
        gp.log_std.push_back(double(g.val(gn.log_std)[d]));
    }
    return gp;
}

// Decoding tower: the fused local embedding is projected to depth 3C, then
// four residual groups run at h/32..h/4. Before each group the matching
// encoder level (deepest first) joins through a 3x3 conv + sigmoid and is
// added; bilinear x2 upsampling sits between groups.
template <typename T>
class DecoderT {
public:
    DecoderT(const std::string& name, const ModelConfig& cfg, Rng& rng)
        : proj_in_(name + ".proj_in", cfg.fused_depth, 3 * cfg.classes, 3, 1, rng) {
        const auto widths = cfg.widths();
        const int d = 3 * cfg.classes;
        for (int i = 0; i < 4; ++i) {
            // skip i consumes pyramid level f4..f1
            skips_.push_back(std::make_unique<Conv2dT<T>>(
                name + ".skip" + std::to_string(4 - i), widths[size_t(3 - i)], d, 3,
                1, rng));
            std::vector<std::unique_ptr<ResidualUnitT<T>>> group;
            for (int u = 0; u < cfg.decoder_units; ++u)
                group.push_back(std::make_unique<ResidualUnitT<T>>(
                    name + ".group" + std::to_string(i + 1) + ".unit" + std::to_string(u),
                    d, d, 1, rng));
            groups_.push_back(std::move(group));
        }
    }

    std::array<int, 4> forward(GraphT<T>& g, int emb, const PyramidNodes& p) {
        const int enc[4] = {p.f4, p.f3, p.f2, p.f1};
        std::array<int, 4> out{};
        int x = proj_in_.forward(g, emb);
        for (int i = 0; i < 4; ++i) {
            if (i > 0) x = g.bilinear_upsample(x, 2);
            x = g.add(x, g.sigmoid(skips_[size_t(i)]->forward(g, enc[i])));
            for (auto& unit : groups_[size_t(i)]) x = unit->forward(g, x);
            out[size_t(i)] = x;
        }
        return out;
    }

    void collect(ParamList<T>& out) {
        proj_in_.collect(out);
        for (auto& s : skips_) s->collect(out);
        for (auto& grp : groups_)
            for (auto& u : grp) u->collect(out);
    }

private:
    Conv2dT<T> proj_in_;
    std::vector<std::unique_ptr<Conv2dT<T>>> skips_;
    std::vector<std::vector<std::unique_ptr<ResidualUnitT<T>>>> groups_;
};

// Merger: every decoded level passes 3x3 conv + ReLU to depth C and is
// bilinearly upsampled to h/4; the level maps (and the global embedding when
// present) concatenate, an 8x8 convolution maps to C logits, and a final x4
// bilinear upsample restores full resolution. Softmax is left to the caller.
template <typename T>
class MergerT {
public:
    MergerT(const std::string& name, const ModelConfig& cfg, Rng& rng)
        : final_(name + ".final",
                 4 * cfg.classes + (cfg.use_global ? cfg.m_embed : 0), cfg.classes,
                 8, 1, rng) {
        for (int i = 0; i < 4; ++i)
            levels_.push_back(std::make_unique<Conv2dT<T>>(
                name + ".lvl" + std::to_string(i + 1), 3 * cfg.classes, cfg.classes,
                3, 1, rng));
    }

    int forward(GraphT<T>& g, const std::array<int, 4>& decoded, int global_emb) {
        std::vector<int> maps;
        for (int i = 0; i < 4; ++i) {
            const int m = g.relu(levels_[size_t(i)]->forward(g, decoded[size_t(i)]));
            maps.push_back(g.bilinear_upsample(m, 8 >> i));
        }
        if (global_emb >= 0) maps.push_back(global_emb);
        const int merged = final_.forward(g, g.concat_channels(maps));
        return g.bilinear_upsample(merged, 4);
    }

    void collect(ParamList<T>& out) {
        for (auto& l : levels_) l->collect(out);
        final_.collect(out);
    }

private:
    std::vector<std::unique_ptr<Conv2dT<T>>> levels_;
    Conv2dT<T> final_;
};

// Builds the [3+C, h, w] PostNet input: image channels followed by the
// one-hot mask (ignore pixels encode as all-zero rows).
template <typename T>
TensorT<T> posterior_input(const TensorT<T>& image, const std::vector<int>& mask,
                           int classes) {
    const int H = image.dim(1), W = image.dim(2);
    if (mask.size() != size_t(H) * W) throw shape_error("posterior_input: mask size");
    TensorT<T> xy({3 + classes, H, W});
    std::copy(image.data(), image.data() + image.size(), xy.data());
    const size_t hw = size_t(H) * W;
    for (size_t i = 0; i < hw; ++i) {
        const int c = mask[i];
        if (c == kIgnoreIndex) continue;
        if (c < 0 || c >= classes) throw shape_error("posterior_input: class out of range");
        xy[(size_t(3) + c) * hw + i] = T(1);
    }
    return xy;
}

// The full segmentation model plus its training-only posterior network.
// Parameter groups: theta = encoder and both latent heads, phi = embeddings,
// decoder and merger, gamma = the posterior stack.
template <typename T>
class ModelT {
public:
    struct Forward {
        PyramidNodes pyramid{};
        MixtureNodes q_local;
        GaussianNodes q_global;
        int logits = -1;  // [C,h,w], pre-softmax
    };

    ModelT(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
        cfg.validate();
        Rng rng(Rng::derive(seed, 0x1a7e57));
        backbone_ = std::make_unique<BackboneT<T>>("enc", cfg, 3, rng);
        local_head_ = std::make_unique<LocalHeadT<T>>("local", cfg, rng);
        global_head_ = std::make_unique<GlobalHeadT<T>>("global", cfg, rng);
        local_emb_ = std::make_unique<LocalEmbeddingT<T>>("lemb", cfg, rng);
        global_emb_ = std::make_unique<GlobalEmbeddingT<T>>("gemb", cfg, rng);
        decoder_ = std::make_unique<DecoderT<T>>("dec", cfg, rng);
        merger_ = std::make_unique<MergerT<T>>("merge", cfg, rng);
        post_backbone_ = std::make_unique<BackboneT<T>>("post.enc", cfg, 3 + cfg.classes, rng);
        post_head_ = std::make_unique<LocalHeadT<T>>("post.local", cfg, rng);

        backbone_->collect(theta_);
        local_head_->collect(theta_);
        global_head_->collect(theta_);
        local_emb_->collect(phi_);
        global_emb_->collect(phi_);
        decoder_->collect(phi_);
        merger_->collect(phi_);
        post_backbone_->collect(gamma_);
        post_head_->collect(gamma_);
    }

    const ModelConfig& config() const { return cfg_; }

    Forward forward(GraphT<T>& g, int image) {
        const int h32 = g.val(image).dim(1) / 32, w32 = g.val(image).dim(2) / 32;
        Forward f;
        f.pyramid = backbone_->forward(g, image);
        f.q_local = local_head_->forward(g, f.pyramid);
        const int emb = local_emb_->forward(g, f.q_local, h32, w32);
        const auto decoded = decoder_->forward(g, emb, f.pyramid);
        int gemb = -1;
        if (cfg_.use_global) {
            f.q_global = global_head_->forward(g, f.pyramid);
            gemb = global_emb_->forward(g, f.q_global, h32, w32);
        }
        f.logits = merger_->forward(g, decoded, gemb);
        return f;
    }

    // PostNet path; pass posterior_input(image, mask, C) as the input node.
    MixtureNodes posterior(GraphT<T>& g, int xy) {
        return post_head_->forward(g, post_backbone_->forward(g, xy));
    }

    ParamList<T>& theta() { return theta_; }
    ParamList<T>& phi() { return phi_; }
    ParamList<T>& gamma() { return gamma_; }

    // All parameters, theta then phi then gamma; the order is the checkpoint
    // serialization order.
    ParamList<T> all_params() {
        ParamList<T> out = theta_;
        out.insert(out.end(), phi_.begin(), phi_.end());
        out.insert(out.end(), gamma_.begin(), gamma_.end());
        return out;
    }

    void zero_grads() {
        for (auto* p : all_params()) p->grad.zero();
    }

private:
    ModelConfig cfg_;
    std::unique_ptr<BackboneT<T>> backbone_;
    std::unique_ptr<LocalHeadT<T>> local_head_;
    std::unique_ptr<GlobalHeadT<T>> global_head_;
    std::unique_ptr<LocalEmbeddingT<T>> local_emb_;
    std::unique_ptr<GlobalEmbeddingT<T>> global_emb_;
    std::unique_ptr<DecoderT<T>> decoder_;
    std::unique_ptr<MergerT<T>> merger_;
    std::unique_ptr<BackboneT<T>> post_backbone_;
    std::unique_ptr<LocalHeadT<T>> post_head_;
    ParamList<T> theta_, phi_, gamma_;
};

using Model = ModelT<float>;
using ModelF64 = ModelT<double>;

}  // namespace phgmm
