#pragma once

#include <cstdint>
#include <string>

#include "phgmm/config.hpp"
#include "phgmm/nn.hpp"
#include "phgmm/optim.hpp"

namespace phgmm {

// Everything beyond raw tensors that a resumed run needs.
struct CheckpointMeta {
    int epoch = 0;
    long step = 0;
    std::string config_hash;
    uint64_t rng_state[6] = {0, 0, 0, 0, 0, 0};
};

// Canonical key=value serialization of the full run configuration; any field
// change produces a different string.
std::string config_fingerprint(const TrainConfig& cfg);

// FNV-1a 64-bit hash of the fingerprint, as 16 hex digits.
std::string config_hash_hex(const TrainConfig& cfg);

// Self-describing container: magic line, length-prefixed JSON header listing
// named tensor shapes plus metadata, then raw little-endian tensor payloads
// (parameter values in list order, then Adam m, then Adam v).
template <typename T>
void save_checkpoint(const std::string& path, const ParamList<T>& params,
                     const AdamStateT<T>& opt, const CheckpointMeta& meta);

// Loads into an existing model's parameter list; names and shapes must match
// the file exactly. When expect_hash is nonempty it must equal the stored
// config hash. Returns the stored metadata.
template <typename T>
CheckpointMeta load_checkpoint(const std::string& path,
                               const ParamList<T>& params, AdamStateT<T>& opt,
                               const std::string& expect_hash = "");

}  // namespace phgmm
