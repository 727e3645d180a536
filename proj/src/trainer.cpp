#include "phgmm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace phgmm {

namespace {

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

const ModelConfig& validated_model(const TrainConfig& cfg) {
    cfg.validate();
    return cfg.model;
}

// Shared loss-graph builder: forward, posterior, the three terms, weighted
// total. Absent terms (global space disabled) report as 0.
template <typename T>
int build_loss_graph(GraphT<T>& g, ModelT<T>& model, const Sample& s,
                     const LossWeights& w, LossBreakdown* parts) {
    const ModelConfig& mc = model.config();
    const int x = g.input(image_tensor<T>(s));
    const auto f = model.forward(g, x);
    int lg = -1;
    if (mc.use_global) lg = build_kl_global(g, f.q_global);
    const int xy = g.input(posterior_input(image_tensor<T>(s), s.mask, mc.classes));
    const auto post = model.posterior(g, xy);
    const int lz = build_kl_mixture(g, f.q_local, post);
    const auto seg = build_seg_loss(g, f.logits, s.mask, mc.classes);
    const int total = build_total_loss(g, lg, lz, seg.total, w);
    if (parts)
        *parts = combine_losses(lg >= 0 ? double(g.val(lg)[0]) : 0.0,
                                double(g.val(lz)[0]),
                                double(g.val(seg.total)[0]), w);
    return total;
}

}  // namespace

template <>
TensorT<float> image_tensor<float>(const Sample& s) {
    return s.image;
}

template <>
TensorT<double> image_tensor<double>(const Sample& s) {
    return image_f64(s);
}

template <typename T>
std::vector<int> predict_mask(ModelT<T>& model, const Sample& s) {
    GraphT<T> g;
    const auto f = model.forward(g, g.input(image_tensor<T>(s)));
    const TensorT<T>& logits = g.val(f.logits);
    const int c = logits.dim(0);
    const size_t hw = size_t(logits.dim(1)) * size_t(logits.dim(2));
    std::vector<int> pred(hw, 0);
    for (size_t i = 0; i < hw; ++i) {
        T best = logits[i];
        for (int ch = 1; ch < c; ++ch) {
            const T v = logits[size_t(ch) * hw + i];
            if (v > best) {
                best = v;
                pred[i] = ch;
            }
        }
    }
    return pred;
}

template <typename T>
EvalReport evaluate(ModelT<T>& model, const DatasetManifest& manifest,
                    const std::string& split) {
    const auto it = manifest.splits.find(split);
    if (it == manifest.splits.end() || it->second.empty())
        throw config_error("split '" + split + "' is empty");
    const int c = model.config().classes;
    EvalReport rep{ConfusionMatrix(c), {}};
    for (const auto& id : it->second) {
        const Sample s = load_sample(manifest, id);
        rep.confusion.add(confusion(predict_mask(model, s), s.mask, c));
    }
    rep.class_scores = scores(rep.confusion);
    return rep;
}

template <typename T>
std::vector<TrimapPoint> trimap_curve(ModelT<T>& model,
                                      const DatasetManifest& manifest,
                                      const std::string& split,
                                      const std::vector<int>& widths) {
    const auto it = manifest.splits.find(split);
    if (it == manifest.splits.end() || it->second.empty())
        throw config_error("split '" + split + "' is empty");
    std::vector<TrimapPoint> curve;
    std::vector<long> wrong(widths.size(), 0), total(widths.size(), 0);
    for (const auto& id : it->second) {
        const Sample s = load_sample(manifest, id);
        const auto pred = predict_mask(model, s);
        for (size_t wi = 0; wi < widths.size(); ++wi) {
            const auto band = trimap_band(s.mask, s.h, s.w, widths[wi]);
            for (size_t p = 0; p < band.size(); ++p) {
                if (!band[p] || s.mask[p] == kIgnoreIndex) continue;
                ++total[wi];
                if (pred[p] != s.mask[p]) ++wrong[wi];
            }
        }
    }
    for (size_t wi = 0; wi < widths.size(); ++wi) {
        TrimapPoint pt;
        pt.width = widths[wi];
        pt.empty_band = total[wi] == 0;
        pt.error = pt.empty_band ? 0.0 : double(wrong[wi]) / double(total[wi]);
        curve.push_back(pt);
    }
    return curve;
}

template <typename T>
LatentCloud collect_latents(ModelT<T>& model, const std::vector<Sample>& samples,
                            long iteration) {
    LatentCloud cloud;
    cloud.tag = std::to_string(iteration);
    for (const Sample& s : samples) {
        GraphT<T> g;
        const auto f = model.forward(g, g.input(image_tensor<T>(s)));
        const MixtureParams mp = read_mixture(g, f.q_local);
        const auto w = mp.weights();
        for (int k = 0; k < mp.k; ++k) {
            std::vector<double> pt(static_cast<size_t>(mp.dz));
            for (int d = 0; d < mp.dz; ++d)
                pt[size_t(d)] = w[size_t(k)] * mp.means[size_t(k) * mp.dz + d];
            cloud.points.push_back(std::move(pt));
            cloud.labels.push_back(k);
        }
    }
    return cloud;
}

template <typename T>
LatentCloud collect_latents(ModelT<T>& model, const DatasetManifest& manifest,
                            const std::string& split, long iteration) {
    const auto it = manifest.splits.find(split);
    if (it == manifest.splits.end() || it->second.empty())
        throw config_error("split '" + split + "' is empty");
    std::vector<Sample> samples;
    for (const auto& id : it->second) samples.push_back(load_sample(manifest, id));
    return collect_latents(model, samples, iteration);
}

void write_latent_csv(const std::string& path, const LatentCloud& cloud) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw io_error("cannot write " + path);
    f << "iteration," << cloud.tag << "\n";
    const size_t d = cloud.points.empty() ? 0 : cloud.points[0].size();
    f << "label";
    for (size_t i = 0; i < d; ++i) f << ",v" << i;
    f << "\n";
    char buf[40];
    for (size_t r = 0; r < cloud.points.size(); ++r) {
        f << cloud.labels[r];
        for (double v : cloud.points[r]) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            f << ',' << buf;
        }
        f << "\n";
    }
    if (!f) throw io_error("cannot write " + path);
}

LatentCloud read_latent_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open " + path);
    LatentCloud cloud;
    std::string line;
    if (!std::getline(f, line) || line.rfind("iteration,", 0) != 0)
        throw io_error("corrupt latent csv, missing iteration line: " + path);
    cloud.tag = line.substr(std::string("iteration,").size());
    if (!std::getline(f, line) || line.rfind("label", 0) != 0)
        throw io_error("corrupt latent csv, missing header: " + path);
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        if (!std::getline(ss, cell, ','))
            throw io_error("corrupt latent csv row: " + path);
        cloud.labels.push_back(std::atoi(cell.c_str()));
        std::vector<double> pt;
        while (std::getline(ss, cell, ',')) pt.push_back(std::strtod(cell.c_str(), nullptr));
        cloud.points.push_back(std::move(pt));
    }
    return cloud;
}

std::string GradcheckReport::summary() const {
    std::string out;
    std::vector<std::string> failing;
    for (const auto& g : groups) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3g", g.max_rel_err);
        out += "group " + g.name + ": checked " + std::to_string(g.checked) +
               ", max rel err " + buf;
        if (!g.worst_param.empty()) out += " at " + g.worst_param;
        out += g.pass ? " -> PASS\n" : " -> FAIL\n";
        if (!g.pass) failing.push_back(g.name);
    }
    if (failing.empty()) {
        out += "gradcheck: PASS\n";
    } else {
        out += "gradcheck: FAIL (";
        for (size_t i = 0; i < failing.size(); ++i)
            out += (i ? ", " : "") + failing[i];
        out += ")\n";
    }
    return out;
}

GradcheckReport gradcheck(const TrainConfig& cfg, uint64_t seed,
                          const GradcheckOptions& opt) {
    cfg.model.validate();
    if (cfg.model.depth_scale > 4 || cfg.model.k > 3)
        throw config_error(
            "gradcheck needs a small config: depth_scale <= 4 and k <= 3");

    SceneSpec sc;
    sc.canvas_h = 32;
    sc.canvas_w = 32;
    sc.classes = cfg.model.classes;
    sc.seed = seed;
    const Sample s = generate_scene(sc, 0);

    ModelF64 model(cfg.model, seed);
    // Freshly initialized norms put residual pre-activations exactly on the
    // ReLU kink: normalized maps are zero-mean, the shifts start at zero, and
    // a 1x1 spatial extent normalizes to exactly zero. The derivative does
    // not exist there, so finite differences disagree with any analytic
    // choice. A small random offset moves the check to a generic point.
    Rng jitter(Rng::derive(seed, 0x3e77));
    for (auto* p : model.all_params())
        for (size_t i = 0; i < p->value.size(); ++i)
            p->value[i] += jitter.uniform(-0.05, 0.05);
    auto loss_value = [&]() {
        GraphT<double> g;
        const int total = build_loss_graph(g, model, s, cfg.weights, nullptr);
        return double(g.val(total)[0]);
    };

    model.zero_grads();
    {
        GraphT<double> g;
        g.backward(build_loss_graph(g, model, s, cfg.weights, nullptr));
    }
    if (opt.corrupt_grads) opt.corrupt_grads(model);

    Rng prng(Rng::derive(seed, 0x9cfd));
    GradcheckReport report;
    const std::pair<const char*, ParamList<double>*> groups[3] = {
        {"theta", &model.theta()}, {"phi", &model.phi()}, {"gamma", &model.gamma()}};
    for (const auto& [name, plist] : groups) {
        GradcheckGroup grp;
        grp.name = name;
        long total_n = 0;
        for (auto* p : *plist) total_n += long(p->value.size());
        std::set<long> picks;
        if (total_n <= opt.per_group) {
            for (long i = 0; i < total_n; ++i) picks.insert(i);
        } else {
            while (long(picks.size()) < opt.per_group)
                picks.insert(long(prng.uniform_int(0, int(total_n - 1))));
        }
        for (long flat : picks) {
            long off = flat;
            Param<double>* p = nullptr;
            for (auto* cand : *plist) {
                if (off < long(cand->value.size())) {
                    p = cand;
                    break;
                }
                off -= long(cand->value.size());
            }
            const size_t e = size_t(off);
            const double orig = p->value[e];
            p->value[e] = orig + opt.step;
            const double fp = loss_value();
            p->value[e] = orig - opt.step;
            const double fm = loss_value();
            p->value[e] = orig;
            const double numeric = (fp - fm) / (2 * opt.step);
            const double analytic = p->grad[e];
            // The absolute floor keeps finite-difference roundoff (about 1e-9
            // at these loss magnitudes) from dominating near-zero gradients.
            const double rel = std::abs(analytic - numeric) /
                               std::max({std::abs(analytic), std::abs(numeric), 1e-3});
            ++grp.checked;
            if (rel > grp.max_rel_err) {
                grp.max_rel_err = rel;
                grp.worst_param = p->name + "[" + std::to_string(e) + "]";
            }
        }
        grp.pass = grp.max_rel_err < opt.tol;
        report.pass = report.pass && grp.pass;
        report.groups.push_back(std::move(grp));
    }
    return report;
}

template <typename T>
TrainerT<T>::TrainerT(const TrainConfig& cfg, const DatasetManifest& manifest)
    : cfg_(cfg),
      manifest_(manifest),
      model_(validated_model(cfg), cfg.seed),
      rng_(Rng::derive(cfg.seed, 0x7ea1f)),
      aug_base_(Rng::derive(cfg.seed, 0xa096)),
      hash_(config_hash_hex(cfg)) {
    params_ = model_.all_params();
    opt_.init(params_);
    const auto it = manifest_.splits.find("train");
    if (it != manifest_.splits.end())
        for (const auto& id : it->second) train_.push_back(load_sample(manifest_, id));
}

template <typename T>
LossBreakdown TrainerT<T>::sample_loss_backward(const Sample& s) {
    GraphT<T> g;
    LossBreakdown parts;
    const int total = build_loss_graph(g, model_, s, cfg_.weights, &parts);
    g.backward(total);
    return parts;
}

template <typename T>
LossBreakdown TrainerT<T>::step_batch(const std::vector<Sample>& batch) {
    if (batch.empty()) throw config_error("empty batch");
    model_.zero_grads();
    LossBreakdown sum;
    for (const Sample& s : batch) {
        const LossBreakdown b = sample_loss_backward(s);
        sum.l_g += b.l_g;
        sum.l_z += b.l_z;
        sum.l_s += b.l_s;
        sum.total += b.total;
    }
    const double inv = 1.0 / double(batch.size());
    if (batch.size() > 1)
        for (auto* p : params_) {
            T* grad = p->grad.data();
            for (size_t i = 0; i < p->grad.size(); ++i) grad[i] *= T(inv);
        }
    adam_step_all(params_, opt_, T(cfg_.lr), T(cfg_.beta1), T(cfg_.beta2),
                  T(cfg_.adam_eps));
    ++steps_;
    sum.l_g *= inv;
    sum.l_z *= inv;
    sum.l_s *= inv;
    sum.total *= inv;
    return sum;
}

template <typename T>
LossBreakdown TrainerT<T>::step(const Sample& s) {
    return step_batch(std::vector<Sample>{s});
}

template <typename T>
std::vector<size_t> TrainerT<T>::shuffled_indices() {
    std::vector<size_t> idx(train_.size());
    std::iota(idx.begin(), idx.end(), size_t(0));
    for (size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[size_t(rng_.uniform_int(0, int(i) - 1))]);
    return idx;
}

template <typename T>
void TrainerT<T>::save(const std::string& path) {
    CheckpointMeta meta;
    meta.epoch = epoch_;
    meta.step = steps_;
    meta.config_hash = hash_;
    rng_.save_state(meta.rng_state);
    save_checkpoint(path, params_, opt_, meta);
    last_ckpt_ = path;
}

template <typename T>
void TrainerT<T>::resume(const std::string& path) {
    const CheckpointMeta meta = load_checkpoint(path, params_, opt_, hash_);
    epoch_ = meta.epoch;
    steps_ = meta.step;
    rng_.load_state(meta.rng_state);
    last_ckpt_ = path;
}

template <typename T>
TrainResult TrainerT<T>::run(const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw io_error("cannot create run directory: " + out_dir);
    if (train_.empty()) throw config_error("split 'train' is empty");

    const long n = long(train_.size());
    const long steps_per_epoch = (n + cfg_.batch_size - 1) / cfg_.batch_size;
    const long total_steps = steps_per_epoch * cfg_.epochs;
    std::vector<long> snaps;
    for (long v : cfg_.latent_snapshots)
        if (v > 0) snaps.push_back(std::min(v, total_steps));
    std::sort(snaps.begin(), snaps.end());
    snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());

    const std::string log_path = out_dir + "/train_log.csv";
    std::ofstream log(log_path, epoch_ > 0 ? std::ios::app : std::ios::trunc);
    if (!log) throw io_error("cannot write " + log_path);
    if (epoch_ == 0) log << "epoch,l_g,l_z,l_s,total,val_miou\n";

    const bool have_val = manifest_.splits.count("val") != 0 &&
                          !manifest_.splits.at("val").empty();
    TrainResult res;

    try {
        for (int e = epoch_ + 1; e <= cfg_.epochs; ++e) {
            const auto order = shuffled_indices();
            LossBreakdown sum;
            long batches = 0;
            size_t cursor = 0;
            while (cursor < order.size()) {
                std::vector<Sample> batch;
                for (int b = 0; b < cfg_.batch_size && cursor < order.size();
                     ++b, ++cursor) {
                    const Sample& s = train_[order[cursor]];
                    if (cfg_.augment)
                        batch.push_back(augment(
                            s, Rng::derive(aug_base_, (uint64_t(e) << 32) ^
                                                          uint64_t(order[cursor]))));
                    else
                        batch.push_back(s);
                }
                const LossBreakdown b = step_batch(batch);
                sum.l_g += b.l_g;
                sum.l_z += b.l_z;
                sum.l_s += b.l_s;
                sum.total += b.total;
                ++batches;
                if (std::binary_search(snaps.begin(), snaps.end(), steps_))
                    write_latent_csv(
                        out_dir + "/latents_step_" + std::to_string(steps_) + ".csv",
                        collect_latents(model_, train_, steps_));
            }
            const double inv = 1.0 / double(batches);
            LossBreakdown mean{sum.l_g * inv, sum.l_z * inv, sum.l_s * inv,
                               sum.total * inv};
            res.epoch_loss.push_back(mean);

            double vm = std::numeric_limits<double>::quiet_NaN();
            if (have_val && (e % cfg_.eval_interval == 0 || e == cfg_.epochs))
                vm = evaluate(model_, manifest_, "val").class_scores.mean_iou;
            res.val_miou.push_back(vm);

            log << e << ',' << fmt_g(mean.l_g) << ',' << fmt_g(mean.l_z) << ','
                << fmt_g(mean.l_s) << ',' << fmt_g(mean.total) << ','
                << (std::isnan(vm) ? std::string() : fmt_g(vm)) << "\n";
            log.flush();

            epoch_ = e;
            if (e % cfg_.checkpoint_interval == 0 && e != cfg_.epochs)
                save(out_dir + "/ckpt_epoch_" + std::to_string(e) + ".ckpt");
        }
    } catch (const numeric_error& err) {
        throw numeric_error(std::string(err.what()) + " (epoch " +
                            std::to_string(epoch_ + 1) + "); last good checkpoint: " +
                            (last_ckpt_.empty() ? "none" : last_ckpt_));
    }

    res.final_checkpoint = out_dir + "/ckpt_final.ckpt";
    save(res.final_checkpoint);
    res.steps = steps_;
    return res;
}

template class TrainerT<float>;
template class TrainerT<double>;

template std::vector<int> predict_mask<float>(ModelT<float>&, const Sample&);
template std::vector<int> predict_mask<double>(ModelT<double>&, const Sample&);
template EvalReport evaluate<float>(ModelT<float>&, const DatasetManifest&,
                                    const std::string&);
template EvalReport evaluate<double>(ModelT<double>&, const DatasetManifest&,
                                     const std::string&);
template std::vector<TrimapPoint> trimap_curve<float>(ModelT<float>&,
                                                      const DatasetManifest&,
                                                      const std::string&,
                                                      const std::vector<int>&);
template std::vector<TrimapPoint> trimap_curve<double>(ModelT<double>&,
                                                       const DatasetManifest&,
                                                       const std::string&,
                                                       const std::vector<int>&);
template LatentCloud collect_latents<float>(ModelT<float>&,
                                            const std::vector<Sample>&, long);
template LatentCloud collect_latents<double>(ModelT<double>&,
                                             const std::vector<Sample>&, long);
template LatentCloud collect_latents<float>(ModelT<float>&, const DatasetManifest&,
                                            const std::string&, long);
template LatentCloud collect_latents<double>(ModelT<double>&,
                                             const DatasetManifest&,
                                             const std::string&, long);

}  // namespace phgmm
