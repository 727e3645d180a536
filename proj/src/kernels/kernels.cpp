#include "phgmm/kernels/kernels.hpp"

#include <cstdlib>
#include <string>

#include "phgmm/common.hpp"

namespace phgmm::kernels {

Ops<float> f32;
Ops<double> f64;

namespace {
std::string g_active = "scalar";

// Selects the startup default from PHGMM_SIMD before main() runs.
const bool g_initialized = [] {
    const char* env = std::getenv("PHGMM_SIMD");
    std::string mode = env ? env : "auto";
    if (mode != "scalar" && mode != "avx2" && mode != "auto") mode = "auto";
    if (mode == "avx2" && !avx2::supported()) mode = "auto";
    select(mode);
    return true;
}();
}  // namespace

std::string select(const std::string& mode) {
    if (mode == "scalar") {
        f32 = scalar::f32;
        f64 = scalar::f64;
        g_active = "scalar";
    } else if (mode == "avx2") {
        if (!avx2::supported())
            throw config_error("PHGMM_SIMD=avx2 requested but CPU lacks AVX2/FMA");
        f32 = avx2::f32;
        f64 = avx2::f64;
        g_active = "avx2";
    } else if (mode == "auto") {
        return select(avx2::supported() ? "avx2" : "scalar");
    } else {
        throw config_error("unknown SIMD mode '" + mode + "' (scalar|avx2|auto)");
    }
    return g_active;
}

std::string active() { return g_active; }

}  // namespace phgmm::kernels
