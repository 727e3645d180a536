#include "phgmm/checkpoint.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <vector>

#include "phgmm/common.hpp"

namespace phgmm {

namespace {

constexpr char kMagic[] = "PHGMMCKPT1\n";
constexpr size_t kMagicLen = sizeof(kMagic) - 1;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_u64_hex(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

void join_ints(std::string& out, const std::vector<int>& v) {
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
}

void encode_u64(uint64_t v, unsigned char out[8]) {
    for (int i = 0; i < 8; ++i) out[i] = (unsigned char)((v >> (8 * i)) & 0xff);
}

uint64_t decode_u64(const unsigned char in[8]) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(in[i]) << (8 * i);
    return v;
}

template <typename T>
const char* dtype_name() {
    return sizeof(T) == 4 ? "f32" : "f64";
}

}  // namespace

// Covers every field that shapes the training trajectory (model, optimizer,
// loss weights, seed, batching, augmentation). Schedule-only fields (epochs,
// eval/checkpoint intervals, snapshot list) are excluded so a run can resume
// with, say, a raised epoch budget.
std::string config_fingerprint(const TrainConfig& cfg) {
    const ModelConfig& m = cfg.model;
    std::string s;
    s += "batch_size=" + std::to_string(cfg.batch_size);
    s += ";lr=" + fmt_double(cfg.lr);
    s += ";beta1=" + fmt_double(cfg.beta1);
    s += ";beta2=" + fmt_double(cfg.beta2);
    s += ";adam_eps=" + fmt_double(cfg.adam_eps);
    s += ";seed=" + std::to_string((unsigned long long)cfg.seed);
    s += ";lambda_g=" + fmt_double(cfg.weights.lambda_g);
    s += ";lambda_z=" + fmt_double(cfg.weights.lambda_z);
    s += ";lambda_s=" + fmt_double(cfg.weights.lambda_s);
    s += ";augment=" + std::to_string(int(cfg.augment));
    s += ";classes=" + std::to_string(m.classes);
    s += ";k=" + std::to_string(m.k);
    s += ";dz=" + std::to_string(m.dz);
    s += ";dg=" + std::to_string(m.dg);
    s += ";d_embed=" + std::to_string(m.d_embed);
    s += ";m_embed=" + std::to_string(m.m_embed);
    s += ";fused_depth=" + std::to_string(m.fused_depth);
    s += ";depth_scale=" + std::to_string(m.depth_scale);
    s += ";stem_kernel=" + std::to_string(m.stem_kernel);
    s += ";units=";
    join_ints(s, m.units);
    s += ";dilations=";
    join_ints(s, m.dilations);
    s += ";decoder_units=" + std::to_string(m.decoder_units);
    s += ";use_global=" + std::to_string(int(m.use_global));
    return s;
}

std::string config_hash_hex(const TrainConfig& cfg) {
    const std::string fp = config_fingerprint(cfg);
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : fp) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return fmt_u64_hex(h);
}

template <typename T>
void save_checkpoint(const std::string& path, const ParamList<T>& params,
                     const AdamStateT<T>& opt, const CheckpointMeta& meta) {
    if (opt.m.size() != params.size() || opt.v.size() != params.size())
        throw config_error("checkpoint: optimizer state does not match parameters");

    nlohmann::json hdr;
    hdr["version"] = 1;
    hdr["dtype"] = dtype_name<T>();
    hdr["config_hash"] = meta.config_hash;
    hdr["epoch"] = meta.epoch;
    hdr["step"] = meta.step;
    hdr["adam_t"] = opt.t;
    std::vector<std::string> rng;
    for (int i = 0; i < 6; ++i) rng.push_back(fmt_u64_hex(meta.rng_state[i]));
    hdr["rng"] = rng;
    nlohmann::json tensors = nlohmann::json::array();
    for (auto* p : params) {
        nlohmann::json t;
        t["name"] = p->name;
        t["shape"] = p->value.shape();
        tensors.push_back(t);
    }
    hdr["tensors"] = tensors;
    const std::string hs = hdr.dump();

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot write checkpoint: " + path);
    f.write(kMagic, std::streamsize(kMagicLen));
    unsigned char len[8];
    encode_u64(uint64_t(hs.size()), len);
    f.write(reinterpret_cast<const char*>(len), 8);
    f.write(hs.data(), std::streamsize(hs.size()));
    auto dump = [&](const T* d, size_t n) {
        f.write(reinterpret_cast<const char*>(d),
                std::streamsize(n * sizeof(T)));
    };
    for (auto* p : params) dump(p->value.data(), p->value.size());
    for (size_t i = 0; i < params.size(); ++i) dump(opt.m[i].data(), opt.m[i].size());
    for (size_t i = 0; i < params.size(); ++i) dump(opt.v[i].data(), opt.v[i].size());
    f.flush();
    if (!f) throw io_error("cannot write checkpoint: " + path);
}

template <typename T>
CheckpointMeta load_checkpoint(const std::string& path,
                               const ParamList<T>& params, AdamStateT<T>& opt,
                               const std::string& expect_hash) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open checkpoint: " + path);
    char magic[kMagicLen];
    f.read(magic, std::streamsize(kMagicLen));
    if (!f || std::memcmp(magic, kMagic, kMagicLen) != 0)
        throw io_error("corrupt checkpoint, bad magic: " + path);
    unsigned char len[8];
    f.read(reinterpret_cast<char*>(len), 8);
    if (!f) throw io_error("corrupt checkpoint, truncated header: " + path);
    const uint64_t hlen = decode_u64(len);
    if (hlen > (1u << 26))
        throw io_error("corrupt checkpoint, oversized header: " + path);
    std::string hs(size_t(hlen), '\0');
    f.read(hs.data(), std::streamsize(hlen));
    if (!f) throw io_error("corrupt checkpoint, truncated header: " + path);

    nlohmann::json hdr;
    try {
        hdr = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception&) {
        throw io_error("corrupt checkpoint, unparsable header: " + path);
    }
    CheckpointMeta meta;
    try {
        if (hdr.at("version").get<int>() != 1)
            throw io_error("unsupported checkpoint version: " + path);
        if (hdr.at("dtype").get<std::string>() != dtype_name<T>())
            throw io_error("checkpoint dtype is " +
                           hdr["dtype"].get<std::string>() + ", expected " +
                           dtype_name<T>() + ": " + path);
        meta.config_hash = hdr.at("config_hash").get<std::string>();
        meta.epoch = hdr.at("epoch").get<int>();
        meta.step = hdr.at("step").get<long>();
        opt.t = hdr.at("adam_t").get<long>();
        const auto rng = hdr.at("rng");
        if (!rng.is_array() || rng.size() != 6)
            throw io_error("corrupt checkpoint, bad rng state: " + path);
        for (int i = 0; i < 6; ++i)
            meta.rng_state[i] =
                std::strtoull(rng[size_t(i)].get<std::string>().c_str(), nullptr, 16);
        const auto tensors = hdr.at("tensors");
        if (!tensors.is_array() || tensors.size() != params.size())
            throw io_error("checkpoint holds " + std::to_string(tensors.size()) +
                           " tensors, model has " + std::to_string(params.size()));
        for (size_t i = 0; i < params.size(); ++i) {
            const std::string name = tensors[i].at("name").get<std::string>();
            const auto shape = tensors[i].at("shape").get<std::vector<int>>();
            if (name != params[i]->name)
                throw io_error("checkpoint tensor '" + name +
                               "' does not match model parameter '" +
                               params[i]->name + "'");
            if (shape != params[i]->value.shape())
                throw io_error("checkpoint tensor '" + name + "' has shape " +
                               params[i]->value.shape_str() +
                               " mismatch against the model");
        }
    } catch (const nlohmann::json::exception&) {
        throw io_error("corrupt checkpoint, incomplete header: " + path);
    }
    if (!expect_hash.empty() && meta.config_hash != expect_hash)
        throw config_error("checkpoint was produced by a different config (hash " +
                           meta.config_hash + ", expected " + expect_hash + ")");

    opt.m.clear();
    opt.v.clear();
    for (auto* p : params) {
        opt.m.emplace_back(p->value.shape());
        opt.v.emplace_back(p->value.shape());
    }
    auto slurp = [&](T* d, size_t n) {
        f.read(reinterpret_cast<char*>(d), std::streamsize(n * sizeof(T)));
        if (!f) throw io_error("corrupt checkpoint, truncated payload: " + path);
    };
    for (auto* p : params) slurp(p->value.data(), p->value.size());
    for (size_t i = 0; i < params.size(); ++i) slurp(opt.m[i].data(), opt.m[i].size());
    for (size_t i = 0; i < params.size(); ++i) slurp(opt.v[i].data(), opt.v[i].size());
    return meta;
}

template void save_checkpoint<float>(const std::string&, const ParamList<float>&,
                                     const AdamStateT<float>&,
                                     const CheckpointMeta&);
template void save_checkpoint<double>(const std::string&,
                                      const ParamList<double>&,
                                      const AdamStateT<double>&,
                                      const CheckpointMeta&);
template CheckpointMeta load_checkpoint<float>(const std::string&,
                                               const ParamList<float>&,
                                               AdamStateT<float>&,
                                               const std::string&);
template CheckpointMeta load_checkpoint<double>(const std::string&,
                                                const ParamList<double>&,
                                                AdamStateT<double>&,
                                                const std::string&);

}  // namespace phgmm
