#include "phgmm/model.hpp"

#include <sstream>

#include "phgmm/common.hpp"

namespace phgmm {

void ModelConfig::validate() const {
    std::ostringstream bad;
    if (classes < 2) bad << "classes must be >= 2; ";
    if (k < 1) bad << "k must be >= 1; ";
    if (dz < 1 || dg < 1 || d_embed < 1 || m_embed < 1 || fused_depth < 1)
        bad << "latent depths must be >= 1; ";
    if (depth_scale < 1) bad << "depth_scale must be >= 1; ";
    if (units.size() != 4 || dilations.size() != 4)
        bad << "units and dilations must list 4 stages; ";
    else {
        for (int u : units)
            if (u < 1) bad << "unit counts must be >= 1; ";
        for (int d : dilations)
            if (d < 1) bad << "dilations must be >= 1; ";
    }
    if (depth_scale >= 1 && 4 * depth_scale < classes)
        bad << "narrowest width " << 4 * depth_scale << " below class count; ";
    if (decoder_units < 1) bad << "decoder_units must be >= 1; ";
    const std::string msg = bad.str();
    if (!msg.empty()) throw config_error("invalid model config: " + msg);
}

void TrainConfig::validate() const {
    std::ostringstream bad;
    if (epochs < 1) bad << "epochs must be >= 1; ";
    if (batch_size < 1) bad << "batch_size must be >= 1; ";
    if (!(lr > 0)) bad << "lr must be > 0; ";
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
        bad << "betas must lie in [0,1); ";
    if (!(adam_eps > 0)) bad << "adam_eps must be > 0; ";
    if (weights.lambda_g < 0 || weights.lambda_z < 0 || weights.lambda_s < 0)
        bad << "loss weights must be >= 0; ";
    if (eval_interval < 1) bad << "eval_interval must be >= 1; ";
    if (checkpoint_interval < 1) bad << "checkpoint_interval must be >= 1; ";
    const std::string msg = bad.str();
    if (!msg.empty()) throw config_error("invalid train config: " + msg);
    model.validate();
}

}  // namespace phgmm
