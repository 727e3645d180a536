#pragma once

#include <cstddef>
#include <string>

namespace phgmm::kernels {

// Hot-loop primitives. Each has a scalar reference implementation and an AVX2
// variant; dispatch picks one at startup based on CPU support, overridable
// with PHGMM_SIMD=scalar|avx2|auto. All variants are equivalence-tested
// against the scalar reference.
//
// GEMM conventions (row-major):
//   gemm_nn: C[m,n] += A[m,k] * B[k,n]
//   gemm_nt: C[m,n] += A[m,k] * B[n,k]^T
//   gemm_tn: C[m,n] += A[k,m]^T * B[k,n]
template <typename T>
struct Ops {
    void (*gemm_nn)(int m, int n, int k, const T* a, const T* b, T* c);
    void (*gemm_nt)(int m, int n, int k, const T* a, const T* b, T* c);
    void (*gemm_tn)(int m, int n, int k, const T* a, const T* b, T* c);
    // y += alpha * x
    void (*axpy)(size_t n, T alpha, const T* x, T* y);
    // out = a + b
    void (*add)(size_t n, const T* a, const T* b, T* out);
    // out = a * b
    void (*mul)(size_t n, const T* a, const T* b, T* out);
    // out = max(x, 0)
    void (*relu_forward)(size_t n, const T* x, T* out);
    // dx += dy where x > 0
    void (*relu_backward)(size_t n, const T* x, const T* dy, T* dx);
    T (*dot)(size_t n, const T* a, const T* b);
    T (*reduce_sum)(size_t n, const T* x);
    // Adam update for one parameter block; t is the 1-based step count.
    void (*adam_step)(size_t n, T* w, const T* g, T* m, T* v, T lr, T beta1,
                      T beta2, T eps, long t);
};

// Active dispatch tables. Initialized before main() via a static initializer;
// select() can re-point them (tests use this to compare variants).
extern Ops<float> f32;
extern Ops<double> f64;

namespace scalar {
extern const Ops<float> f32;
extern const Ops<double> f64;
}  // namespace scalar

namespace avx2 {
extern const Ops<float> f32;
extern const Ops<double> f64;
bool supported();
}  // namespace avx2

// mode: "scalar", "avx2", or "auto". Returns the name actually selected.
// Throws config_error for unknown modes or "avx2" on a CPU without AVX2.
std::string select(const std::string& mode);

// Name of the currently active variant.
std::string active();

}  // namespace phgmm::kernels
