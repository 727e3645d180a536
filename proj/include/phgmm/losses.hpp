#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "phgmm/config.hpp"
#include "phgmm/graph.hpp"
#include "phgmm/latent.hpp"

namespace phgmm {

// Mixture weights below this floor are clamped before entering log ratios.
inline constexpr double kWeightFloor = 1e-8;

struct LossBreakdown {
    double l_g = 0;
    double l_z = 0;
    double l_s = 0;
    double total = 0;
};

struct McEstimate {
    double mean = 0;
    double std_err = 0;
};

struct SegLossParts {
    double ce = 0;
    double soft_iou = 0;
    double total = 0;
    bool all_ignore = false;
};

// KL(N(mu, diag sigma^2) || N(0, I)), closed form.
double kl_gaussian_standard(const std::vector<double>& mean,
                            const std::vector<double>& log_std);

// KL(q || p) for two diagonal Gaussians of equal dimension.
double kl_gaussian_pair(const std::vector<double>& mean_q,
                        const std::vector<double>& log_std_q,
                        const std::vector<double>& mean_p,
                        const std::vector<double>& log_std_p);

// Matched-component upper bound on KL(q || p) for two mixtures sharing K:
// sum_k pi_q^k [ log(pi_q^k / pi_p^k) + kl_gaussian_pair(q_k, p_k) ].
double kl_mixture_matched(const MixtureParams& q, const MixtureParams& p);

// Monte-Carlo estimate of the true KL(q || p): mean and standard error of
// log q(z) - log p(z) over n draws z ~ q. Densities use log-sum-exp.
McEstimate kl_mixture_mc(const MixtureParams& q, const MixtureParams& p, int n,
                         uint64_t seed);

// Log-density of a diagonal-Gaussian mixture at z, via log-sum-exp.
double mixture_log_density(const MixtureParams& mp, const std::vector<double>& z);

// Cross entropy plus (1 - soft IoU) on per-pixel class probabilities [C,H,W].
// Ignore pixels drop out of both sums; an all-ignore mask yields total 1 and
// sets the all_ignore flag.
SegLossParts seg_loss(const TensorF64& probs, const std::vector<int>& mask,
                      int classes);

// Weighted combination. Any non-finite term raises numeric_error naming it.
LossBreakdown combine_losses(double l_g, double l_z, double l_s,
                             const LossWeights& w);

// ---- graph builders (training path) ----
// Each returns a scalar node; values match the plain functions above.

template <typename T>
int build_kl_global(GraphT<T>& g, const GaussianNodes& gn) {
    const int sigma = g.exp_(gn.log_std);
    const int sq = g.add(g.mul(sigma, sigma), g.mul(gn.mean, gn.mean));
    const int per_dim = g.add(g.affine(gn.log_std, T(-1), T(0)),
                              g.affine(sq, T(0.5), T(-0.5)));
    return g.reduce_sum(per_dim);
}

template <typename T>
int build_kl_pair(GraphT<T>& g, int mean_q, int log_std_q, int mean_p,
                  int log_std_p) {
    const int sq = g.exp_(log_std_q);
    const int sp = g.exp_(log_std_p);
    const int diff = g.sub(mean_q, mean_p);
    const int num = g.add(g.mul(sq, sq), g.mul(diff, diff));
    const int quot = g.div(num, g.affine(g.mul(sp, sp), T(2), T(0)));
    const int per_dim = g.add(g.sub(log_std_p, log_std_q),
                              g.affine(quot, T(1), T(-0.5)));
    return g.reduce_sum(per_dim);
}

template <typename T>
int build_kl_mixture(GraphT<T>& g, const MixtureNodes& q, const MixtureNodes& p) {
    if (q.means.size() != p.means.size())
        throw shape_error("mixture KL: component count mismatch");
    const int k = int(q.means.size());
    const int pi_q = g.softmax_vec(q.logits);
    const int log_pi_q = g.log_softmax_vec(q.logits);
    const T floor = T(std::log(kWeightFloor));
    const int log_pi_p = g.clamp(g.log_softmax_vec(p.logits), floor, T(0));
    int total = -1;
    for (int i = 0; i < k; ++i) {
        const int ratio =
            g.sub(g.slice(log_pi_q, i, 1), g.slice(log_pi_p, i, 1));
        const int pair = build_kl_pair(g, q.means[size_t(i)], q.log_stds[size_t(i)],
                                       p.means[size_t(i)], p.log_stds[size_t(i)]);
        const int term = g.mul(g.slice(pi_q, i, 1), g.add(ratio, pair));
        total = (total < 0) ? term : g.add(total, term);
    }
    return total;
}

struct SegLossNodes {
    int ce = -1;
    int soft_iou = -1;
    int total = -1;
    bool all_ignore = false;
};

template <typename T>
SegLossNodes build_seg_loss(GraphT<T>& g, int logits,
                            const std::vector<int>& mask, int classes) {
    const auto& s = g.val(logits).shape();
    if (s.size() != 3 || s[0] != classes)
        throw shape_error("seg loss: logits must be [C,H,W]");
    const size_t hw = size_t(s[1]) * s[2];
    if (mask.size() != hw) throw shape_error("seg loss: mask size mismatch");

    TensorT<T> onehot({classes, s[1], s[2]});
    TensorT<T> valid({classes, s[1], s[2]});
    bool any_valid = false;
    for (size_t i = 0; i < hw; ++i) {
        const int c = mask[i];
        if (c == kIgnoreIndex) continue;
        if (c < 0 || c >= classes) throw shape_error("seg loss: class out of range");
        any_valid = true;
        onehot[size_t(c) * hw + i] = T(1);
        for (int ch = 0; ch < classes; ++ch) valid[size_t(ch) * hw + i] = T(1);
    }

    SegLossNodes out;
    out.all_ignore = !any_valid;
    const int logp = g.log_softmax_channels(logits);
    out.ce = g.ce_pick_mean(logp, mask, kIgnoreIndex);

    const int probs = g.exp_(logp);
    const int y = g.input(std::move(onehot));
    const int v = g.input(std::move(valid));
    const int py = g.mul(probs, y);
    const int inter = g.channel_sum(py);
    const int uni = g.channel_sum(g.sub(g.add(g.mul(probs, v), y), py));
    out.soft_iou = g.reduce_mean(g.div(inter, g.affine(uni, T(1), T(1e-6))));
    out.total = g.add(out.ce, g.affine(out.soft_iou, T(-1), T(1)));
    return out;
}

// total = lambda_g*l_g + lambda_z*l_z + lambda_s*l_s over scalar nodes; pass
// -1 for a term to drop it (e.g. the global term when the global space is
// disabled). Checks every present term for divergence.
template <typename T>
int build_total_loss(GraphT<T>& g, int l_g, int l_z, int l_s,
                     const LossWeights& w) {
    const int terms[3] = {l_g, l_z, l_s};
    const double lambdas[3] = {w.lambda_g, w.lambda_z, w.lambda_s};
    const char* names[3] = {"l_g", "l_z", "l_s"};
    int total = -1;
    for (int i = 0; i < 3; ++i) {
        if (terms[i] < 0) continue;
        if (!std::isfinite(double(g.val(terms[i])[0])))
            throw numeric_error(std::string("training diverged: loss term ") +
                                names[i] + " is not finite");
        const int scaled = g.affine(terms[i], T(lambdas[i]), T(0));
        total = (total < 0) ? scaled : g.add(total, scaled);
    }
    if (total < 0) throw config_error("total loss: no terms present");
    return total;
}

}  // namespace phgmm
