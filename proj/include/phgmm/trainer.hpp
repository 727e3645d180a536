#pragma once

#include <functional>
#include <string>
#include <vector>

#include "phgmm/checkpoint.hpp"
#include "phgmm/config.hpp"
#include "phgmm/data.hpp"
#include "phgmm/losses.hpp"
#include "phgmm/metrics.hpp"
#include "phgmm/model.hpp"
#include "phgmm/optim.hpp"

namespace phgmm {

struct EvalReport {
    ConfusionMatrix confusion;
    ClassScores class_scores;
};

struct TrimapPoint {
    int width = 0;
    double error = 0;
    bool empty_band = false;
};

struct TrainResult {
    std::vector<LossBreakdown> epoch_loss;  // mean per completed epoch
    std::vector<double> val_miou;           // NaN on epochs without evaluation
    long steps = 0;
    std::string final_checkpoint;
};

// Sample image as the training scalar type.
template <typename T>
TensorT<T> image_tensor(const Sample& s);
template <>
TensorT<float> image_tensor<float>(const Sample& s);
template <>
TensorT<double> image_tensor<double>(const Sample& s);

// Per-pixel argmax class for one image (ties resolve to the lower class).
template <typename T>
std::vector<int> predict_mask(ModelT<T>& model, const Sample& s);

// Aggregated confusion and class scores over a split.
template <typename T>
EvalReport evaluate(ModelT<T>& model, const DatasetManifest& manifest,
                    const std::string& split);

// Boundary-band error at each width, pixel-pooled across the split.
template <typename T>
std::vector<TrimapPoint> trimap_curve(ModelT<T>& model,
                                      const DatasetManifest& manifest,
                                      const std::string& split,
                                      const std::vector<int>& widths);

// One point per (image, component): the weighted component mean pi_k * mu_k
// labeled k, tagged with the optimizer step it was collected at.
template <typename T>
LatentCloud collect_latents(ModelT<T>& model, const std::vector<Sample>& samples,
                            long iteration);
template <typename T>
LatentCloud collect_latents(ModelT<T>& model, const DatasetManifest& manifest,
                            const std::string& split, long iteration);

void write_latent_csv(const std::string& path, const LatentCloud& cloud);
LatentCloud read_latent_csv(const std::string& path);

struct GradcheckGroup {
    std::string name;  // theta, phi or gamma
    int checked = 0;
    double max_rel_err = 0;
    std::string worst_param;
    bool pass = true;
};

struct GradcheckReport {
    std::vector<GradcheckGroup> groups;
    bool pass = true;
    std::string summary() const;
};

struct GradcheckOptions {
    int per_group = 200;   // sampled parameters per group
    double step = 1e-5;    // central-difference half step
    double tol = 1e-4;     // max relative error per group
    // Test hook, applied to the analytic gradients before comparison.
    std::function<void(ModelF64&)> corrupt_grads;
};

// Central finite differences against the analytic gradients of the full loss
// on one synthetic 32x32 scene, in 64-bit. Requires a small config.
GradcheckReport gradcheck(const TrainConfig& cfg, uint64_t seed,
                          const GradcheckOptions& opt = {});

// Owns the model, optimizer state and data order; float for training runs,
// double for bit-exactness and gradient invariant suites.
template <typename T>
class TrainerT {
public:
    TrainerT(const TrainConfig& cfg, const DatasetManifest& manifest);

    // Epochs epochs_done()+1 .. cfg.epochs: shuffles, steps, logs one CSV row
    // per epoch, snapshots latents at the configured step counts and writes
    // periodic plus final checkpoints under out_dir. A non-finite loss aborts
    // with a numeric_error naming the last good checkpoint.
    TrainResult run(const std::string& out_dir);

    // One optimizer step on explicit samples; no augmentation, no shuffling.
    LossBreakdown step(const Sample& s);
    LossBreakdown step_batch(const std::vector<Sample>& batch);

    void save(const std::string& path);
    void resume(const std::string& path);

    ModelT<T>& model() { return model_; }
    const TrainConfig& config() const { return cfg_; }
    AdamStateT<T>& opt_state() { return opt_; }
    long steps_done() const { return steps_; }
    int epochs_done() const { return epoch_; }
    const std::vector<Sample>& train_samples() const { return train_; }

private:
    LossBreakdown sample_loss_backward(const Sample& s);
    std::vector<size_t> shuffled_indices();

    TrainConfig cfg_;
    DatasetManifest manifest_;
    ModelT<T> model_;
    ParamList<T> params_;
    AdamStateT<T> opt_;
    Rng rng_;            // shuffle order; state is checkpointed
    uint64_t aug_base_;  // augmentation seeds derive from (epoch, index)
    std::vector<Sample> train_;
    long steps_ = 0;
    int epoch_ = 0;  // completed epochs
    std::string hash_;
    std::string last_ckpt_;  // most recent path saved or resumed from
};

using Trainer = TrainerT<float>;

}  // namespace phgmm
