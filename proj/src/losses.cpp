#include "phgmm/losses.hpp"

#include <algorithm>
#include <cmath>

#include "phgmm/rng.hpp"

namespace phgmm {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // log(2*pi)/2

double gaussian_log_density(const double* mean, const double* log_std, int dz,
                            const std::vector<double>& z) {
    double acc = 0;
    for (int d = 0; d < dz; ++d) {
        const double ls = log_std[d];
        const double u = (z[size_t(d)] - mean[d]) * std::exp(-ls);
        acc += -kHalfLog2Pi - ls - 0.5 * u * u;
    }
    return acc;
}

}  // namespace

double kl_gaussian_standard(const std::vector<double>& mean,
                            const std::vector<double>& log_std) {
    if (mean.size() != log_std.size())
        throw shape_error("gaussian KL: dim mismatch");
    double acc = 0;
    for (size_t d = 0; d < mean.size(); ++d) {
        const double s2 = std::exp(2 * log_std[d]);
        acc += -log_std[d] + 0.5 * (s2 + mean[d] * mean[d]) - 0.5;
    }
    return acc;
}

double kl_gaussian_pair(const std::vector<double>& mean_q,
                        const std::vector<double>& log_std_q,
                        const std::vector<double>& mean_p,
                        const std::vector<double>& log_std_p) {
    if (mean_q.size() != log_std_q.size() || mean_q.size() != mean_p.size() ||
        mean_q.size() != log_std_p.size())
        throw shape_error("gaussian KL: dim mismatch");
    double acc = 0;
    for (size_t d = 0; d < mean_q.size(); ++d) {
        const double sq2 = std::exp(2 * log_std_q[d]);
        const double sp2 = std::exp(2 * log_std_p[d]);
        const double diff = mean_q[d] - mean_p[d];
        acc += log_std_p[d] - log_std_q[d] + (sq2 + diff * diff) / (2 * sp2) - 0.5;
    }
    return acc;
}

double kl_mixture_matched(const MixtureParams& q, const MixtureParams& p) {
    if (q.k != p.k || q.dz != p.dz)
        throw shape_error("mixture KL: shape mismatch");
    const auto wq = q.weights();
    auto wp = p.weights();
    for (auto& v : wp) v = std::max(v, kWeightFloor);
    double acc = 0;
    for (int k = 0; k < q.k; ++k) {
        const size_t off = size_t(k) * q.dz;
        std::vector<double> mq(q.means.begin() + long(off), q.means.begin() + long(off) + q.dz);
        std::vector<double> lq(q.log_stds.begin() + long(off), q.log_stds.begin() + long(off) + q.dz);
        std::vector<double> mp(p.means.begin() + long(off), p.means.begin() + long(off) + p.dz);
        std::vector<double> lp(p.log_stds.begin() + long(off), p.log_stds.begin() + long(off) + p.dz);
        acc += wq[size_t(k)] *
               (std::log(wq[size_t(k)] / wp[size_t(k)]) + kl_gaussian_pair(mq, lq, mp, lp));
    }
    return acc;
}

double mixture_log_density(const MixtureParams& mp, const std::vector<double>& z) {
    const auto w = mp.weights();
    std::vector<double> lps(size_t(mp.k));
    for (int k = 0; k < mp.k; ++k) {
        const size_t off = size_t(k) * mp.dz;
        lps[size_t(k)] = std::log(std::max(w[size_t(k)], 1e-300)) +
                         gaussian_log_density(mp.means.data() + off,
                                              mp.log_stds.data() + off, mp.dz, z);
    }
    const double mx = *std::max_element(lps.begin(), lps.end());
    double s = 0;
    for (double v : lps) s += std::exp(v - mx);
    return mx + std::log(s);
}

McEstimate kl_mixture_mc(const MixtureParams& q, const MixtureParams& p, int n,
                         uint64_t seed) {
    if (n < 2) throw config_error("mc KL: need at least 2 samples");
    if (q.dz != p.dz) throw shape_error("mc KL: dim mismatch");
    const auto draws = sample_mixture(q, n, seed);
    double sum = 0, sum_sq = 0;
    for (const auto& z : draws) {
        const double v = mixture_log_density(q, z) - mixture_log_density(p, z);
        sum += v;
        sum_sq += v * v;
    }
    McEstimate est;
    est.mean = sum / n;
    const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1));
    est.std_err = std::sqrt(var / n);
    return est;
}

SegLossParts seg_loss(const TensorF64& probs, const std::vector<int>& mask,
                      int classes) {
    const auto& s = probs.shape();
    if (s.size() != 3 || s[0] != classes)
        throw shape_error("seg loss: probs must be [C,H,W]");
    const size_t hw = size_t(s[1]) * s[2];
    if (mask.size() != hw) throw shape_error("seg loss: mask size mismatch");

    double ce = 0;
    size_t valid = 0;
    std::vector<double> inter(size_t(classes), 0.0);
    std::vector<double> uni(size_t(classes), 0.0);
    for (size_t i = 0; i < hw; ++i) {
        const int c = mask[i];
        if (c == kIgnoreIndex) continue;
        if (c < 0 || c >= classes) throw shape_error("seg loss: class out of range");
        ++valid;
        ce -= std::log(probs[size_t(c) * hw + i]);
        for (int ch = 0; ch < classes; ++ch) {
            const double pr = probs[size_t(ch) * hw + i];
            const double y = (ch == c) ? 1.0 : 0.0;
            inter[size_t(ch)] += pr * y;
            uni[size_t(ch)] += pr + y - pr * y;
        }
    }

    SegLossParts out;
    out.all_ignore = (valid == 0);
    out.ce = valid ? ce / double(valid) : 0.0;
    double iou = 0;
    for (int ch = 0; ch < classes; ++ch)
        iou += inter[size_t(ch)] / (uni[size_t(ch)] + 1e-6);
    out.soft_iou = iou / classes;
    out.total = out.ce + (1.0 - out.soft_iou);
    return out;
}

LossBreakdown combine_losses(double l_g, double l_z, double l_s,
                             const LossWeights& w) {
    const double terms[3] = {l_g, l_z, l_s};
    const char* names[3] = {"l_g", "l_z", "l_s"};
    for (int i = 0; i < 3; ++i)
        if (!std::isfinite(terms[i]))
            throw numeric_error(std::string("training diverged: loss term ") +
                                names[i] + " is not finite");
    LossBreakdown b;
    b.l_g = l_g;
    b.l_z = l_z;
    b.l_s = l_s;
    b.total = w.lambda_g * l_g + w.lambda_z * l_z + w.lambda_s * l_s;
    return b;
}

}  // namespace phgmm
