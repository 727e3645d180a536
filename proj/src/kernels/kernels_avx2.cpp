#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "phgmm/kernels/kernels.hpp"

// This translation unit is compiled with -mavx2 -mfma. Nothing here runs
// unless avx2::supported() returned true at dispatch time.

namespace phgmm::kernels::avx2 {
namespace {

// ---------------------------------------------------------------- GEMM ----
// BLIS-style packed GEMM. A and B are repacked into contiguous micro-panels
// so the micro-kernel streams linearly; the same driver serves nn/nt/tn via
// row/column strides. C is accumulated (C += A*B), matching the scalar
// reference.

constexpr int kMc = 128;
constexpr int kKc = 256;
constexpr int kNc = 512;

template <typename T, int MR>
void pack_a(int mc, int kc, const T* a, size_t rs, size_t cs, T* out) {
    for (int ib = 0; ib < mc; ib += MR) {
        const int mr = std::min(MR, mc - ib);
        for (int p = 0; p < kc; ++p) {
            for (int r = 0; r < MR; ++r)
                out[size_t(p) * MR + r] =
                    r < mr ? a[size_t(ib + r) * rs + size_t(p) * cs] : T(0);
        }
        out += size_t(kc) * MR;
    }
}

template <typename T, int NR>
void pack_b(int kc, int nc, const T* b, size_t rs, size_t cs, T* out) {
    for (int jb = 0; jb < nc; jb += NR) {
        const int nr = std::min(NR, nc - jb);
        for (int p = 0; p < kc; ++p) {
            for (int j = 0; j < NR; ++j)
                out[size_t(p) * NR + j] =
                    j < nr ? b[size_t(p) * rs + size_t(jb + j) * cs] : T(0);
        }
        out += size_t(kc) * NR;
    }
}

// 4x16 f32 micro-kernel: 8 accumulator registers, two B loads and four A
// broadcasts per k step.
void micro_f32(int kc, const float* ap, const float* bp, float* out) {
    __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps();
    __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps();
    __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps();
    __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps();
    for (int p = 0; p < kc; ++p) {
        const __m256 b0 = _mm256_loadu_ps(bp + size_t(p) * 16);
        const __m256 b1 = _mm256_loadu_ps(bp + size_t(p) * 16 + 8);
        __m256 a = _mm256_broadcast_ss(ap + size_t(p) * 4 + 0);
        c00 = _mm256_fmadd_ps(a, b0, c00);
        c01 = _mm256_fmadd_ps(a, b1, c01);
        a = _mm256_broadcast_ss(ap + size_t(p) * 4 + 1);
        c10 = _mm256_fmadd_ps(a, b0, c10);
        c11 = _mm256_fmadd_ps(a, b1, c11);
        a = _mm256_broadcast_ss(ap + size_t(p) * 4 + 2);
        c20 = _mm256_fmadd_ps(a, b0, c20);
        c21 = _mm256_fmadd_ps(a, b1, c21);
        a = _mm256_broadcast_ss(ap + size_t(p) * 4 + 3);
        c30 = _mm256_fmadd_ps(a, b0, c30);
        c31 = _mm256_fmadd_ps(a, b1, c31);
    }
    _mm256_storeu_ps(out + 0, c00);
    _mm256_storeu_ps(out + 8, c01);
    _mm256_storeu_ps(out + 16, c10);
    _mm256_storeu_ps(out + 24, c11);
    _mm256_storeu_ps(out + 32, c20);
    _mm256_storeu_ps(out + 40, c21);
    _mm256_storeu_ps(out + 48, c30);
    _mm256_storeu_ps(out + 56, c31);
}

// 4x8 f64 micro-kernel, same layout with 4-lane vectors.
void micro_f64(int kc, const double* ap, const double* bp, double* out) {
    __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
    __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
    __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
    __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
    for (int p = 0; p < kc; ++p) {
        const __m256d b0 = _mm256_loadu_pd(bp + size_t(p) * 8);
        const __m256d b1 = _mm256_loadu_pd(bp + size_t(p) * 8 + 4);
        __m256d a = _mm256_broadcast_sd(ap + size_t(p) * 4 + 0);
        c00 = _mm256_fmadd_pd(a, b0, c00);
        c01 = _mm256_fmadd_pd(a, b1, c01);
        a = _mm256_broadcast_sd(ap + size_t(p) * 4 + 1);
        c10 = _mm256_fmadd_pd(a, b0, c10);
        c11 = _mm256_fmadd_pd(a, b1, c11);
        a = _mm256_broadcast_sd(ap + size_t(p) * 4 + 2);
        c20 = _mm256_fmadd_pd(a, b0, c20);
        c21 = _mm256_fmadd_pd(a, b1, c21);
        a = _mm256_broadcast_sd(ap + size_t(p) * 4 + 3);
        c30 = _mm256_fmadd_pd(a, b0, c30);
        c31 = _mm256_fmadd_pd(a, b1, c31);
    }
    _mm256_storeu_pd(out + 0, c00);
    _mm256_storeu_pd(out + 4, c01);
    _mm256_storeu_pd(out + 8, c10);
    _mm256_storeu_pd(out + 12, c11);
    _mm256_storeu_pd(out + 16, c20);
    _mm256_storeu_pd(out + 20, c21);
    _mm256_storeu_pd(out + 24, c30);
    _mm256_storeu_pd(out + 28, c31);
}

template <typename T, int MR, int NR, void (*Micro)(int, const T*, const T*, T*)>
void gemm_packed(int m, int n, int k, const T* a, size_t rs_a, size_t cs_a,
                 const T* b, size_t rs_b, size_t cs_b, T* c) {
    if (m <= 0 || n <= 0 || k <= 0) return;
    static thread_local std::vector<T> apack, bpack;
    apack.resize(size_t(kMc + MR) * kKc);
    bpack.resize(size_t(kKc) * (kNc + NR));

    for (int jc = 0; jc < n; jc += kNc) {
        const int nc = std::min(kNc, n - jc);
        for (int pc = 0; pc < k; pc += kKc) {
            const int kc = std::min(kKc, k - pc);
            pack_b<T, NR>(kc, nc, b + size_t(pc) * rs_b + size_t(jc) * cs_b,
                          rs_b, cs_b, bpack.data());
            for (int ic = 0; ic < m; ic += kMc) {
                const int mc = std::min(kMc, m - ic);
                pack_a<T, MR>(mc, kc, a + size_t(ic) * rs_a + size_t(pc) * cs_a,
                              rs_a, cs_a, apack.data());
                for (int jb = 0; jb < nc; jb += NR) {
                    const int nr = std::min(NR, nc - jb);
                    for (int ib = 0; ib < mc; ib += MR) {
                        const int mr = std::min(MR, mc - ib);
                        T out[MR * NR];
                        Micro(kc, apack.data() + size_t(ib / MR) * kc * MR,
                              bpack.data() + size_t(jb / NR) * kc * NR, out);
                        T* crow = c + size_t(ic + ib) * n + jc + jb;
                        for (int r = 0; r < mr; ++r)
                            for (int j = 0; j < nr; ++j)
                                crow[size_t(r) * n + j] += out[r * NR + j];
                    }
                }
            }
        }
    }
}

void gemm_nn_f32(int m, int n, int k, const float* a, const float* b, float* c) {
    gemm_packed<float, 4, 16, micro_f32>(m, n, k, a, size_t(k), 1, b, size_t(n), 1, c);
}
void gemm_nt_f32(int m, int n, int k, const float* a, const float* b, float* c) {
    gemm_packed<float, 4, 16, micro_f32>(m, n, k, a, size_t(k), 1, b, 1, size_t(k), c);
}
void gemm_tn_f32(int m, int n, int k, const float* a, const float* b, float* c) {
    gemm_packed<float, 4, 16, micro_f32>(m, n, k, a, 1, size_t(m), b, size_t(n), 1, c);
}
void gemm_nn_f64(int m, int n, int k, const double* a, const double* b, double* c) {
    gemm_packed<double, 4, 8, micro_f64>(m, n, k, a, size_t(k), 1, b, size_t(n), 1, c);
}
void gemm_nt_f64(int m, int n, int k, const double* a, const double* b, double* c) {
    gemm_packed<double, 4, 8, micro_f64>(m, n, k, a, size_t(k), 1, b, 1, size_t(k), c);
}
void gemm_tn_f64(int m, int n, int k, const double* a, const double* b, double* c) {
    gemm_packed<double, 4, 8, micro_f64>(m, n, k, a, 1, size_t(m), b, size_t(n), 1, c);
}

// --------------------------------------------------------- elementwise ----

float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    const __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_movehdup_ps(lo));
    return _mm_cvtss_f32(lo);
}

double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

// mul+add rather than fmadd: elementwise kernels promise bit-identical
// results across variants, so rounding must match the scalar reference.
void axpy_f32(size_t n, float alpha, const float* x, float* y) {
    const __m256 va = _mm256_set1_ps(alpha);
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i),
                                              _mm256_mul_ps(va, _mm256_loadu_ps(x + i))));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_f64(size_t n, double alpha, const double* x, double* y) {
    const __m256d va = _mm256_set1_pd(alpha);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i),
                                              _mm256_mul_pd(va, _mm256_loadu_pd(x + i))));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void add_f32(size_t n, const float* a, const float* b, float* out) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i),
                                                _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void add_f64(size_t n, const double* a, const double* b, double* out) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_f32(size_t n, const float* a, const float* b, float* out) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i),
                                                _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_f64(size_t n, const double* a, const double* b, double* out) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void relu_forward_f32(size_t n, const float* x, float* out) {
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
    for (; i < n; ++i) out[i] = x[i] > 0.f ? x[i] : 0.f;
}

void relu_forward_f64(size_t n, const double* x, double* out) {
    const __m256d zero = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_f32(size_t n, const float* x, const float* dy, float* dx) {
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
        const __m256 g = _mm256_and_ps(mask, _mm256_loadu_ps(dy + i));
        _mm256_storeu_ps(dx + i, _mm256_add_ps(_mm256_loadu_ps(dx + i), g));
    }
    for (; i < n; ++i)
        if (x[i] > 0.f) dx[i] += dy[i];
}

void relu_backward_f64(size_t n, const double* x, const double* dy, double* dx) {
    const __m256d zero = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        const __m256d g = _mm256_and_pd(mask, _mm256_loadu_pd(dy + i));
        _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), g));
    }
    for (; i < n; ++i)
        if (x[i] > 0.0) dx[i] += dy[i];
}

float dot_f32(size_t n, const float* a, const float* b) {
    __m256 acc0 = _mm256_setzero_ps(), acc1 = _mm256_setzero_ps();
    __m256 acc2 = _mm256_setzero_ps(), acc3 = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
        acc2 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 16), _mm256_loadu_ps(b + i + 16), acc2);
        acc3 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 24), _mm256_loadu_ps(b + i + 24), acc3);
    }
    for (; i + 8 <= n; i += 8)
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    float s = hsum(_mm256_add_ps(_mm256_add_ps(acc0, acc1), _mm256_add_ps(acc2, acc3)));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double dot_f64(size_t n, const double* a, const double* b) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

float reduce_sum_f32(size_t n, const float* x) {
    __m256 acc0 = _mm256_setzero_ps(), acc1 = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_add_ps(acc0, _mm256_loadu_ps(x + i));
        acc1 = _mm256_add_ps(acc1, _mm256_loadu_ps(x + i + 8));
    }
    for (; i + 8 <= n; i += 8) acc0 = _mm256_add_ps(acc0, _mm256_loadu_ps(x + i));
    float s = hsum(_mm256_add_ps(acc0, acc1));
    for (; i < n; ++i) s += x[i];
    return s;
}

double reduce_sum_f64(size_t n, const double* x) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += x[i];
    return s;
}

void adam_step_f32(size_t n, float* w, const float* g, float* m, float* v,
                   float lr, float beta1, float beta2, float eps, long t) {
    const float bc1 = 1.f - std::pow(beta1, float(t));
    const float bc2 = 1.f - std::pow(beta2, float(t));
    const __m256 vb1 = _mm256_set1_ps(beta1), vib1 = _mm256_set1_ps(1.f - beta1);
    const __m256 vb2 = _mm256_set1_ps(beta2), vib2 = _mm256_set1_ps(1.f - beta2);
    const __m256 vbc1 = _mm256_set1_ps(bc1), vbc2 = _mm256_set1_ps(bc2);
    const __m256 vlr = _mm256_set1_ps(lr), veps = _mm256_set1_ps(eps);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 gi = _mm256_loadu_ps(g + i);
        __m256 mi = _mm256_loadu_ps(m + i);
        __m256 vi = _mm256_loadu_ps(v + i);
        mi = _mm256_fmadd_ps(vb1, mi, _mm256_mul_ps(vib1, gi));
        vi = _mm256_fmadd_ps(vb2, vi, _mm256_mul_ps(vib2, _mm256_mul_ps(gi, gi)));
        _mm256_storeu_ps(m + i, mi);
        _mm256_storeu_ps(v + i, vi);
        const __m256 mhat = _mm256_div_ps(mi, vbc1);
        const __m256 vhat = _mm256_div_ps(vi, vbc2);
        const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), veps);
        const __m256 upd = _mm256_div_ps(_mm256_mul_ps(vlr, mhat), denom);
        _mm256_storeu_ps(w + i, _mm256_sub_ps(_mm256_loadu_ps(w + i), upd));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.f - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.f - beta2) * g[i] * g[i];
        w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

void adam_step_f64(size_t n, double* w, const double* g, double* m, double* v,
                   double lr, double beta1, double beta2, double eps, long t) {
    const double bc1 = 1.0 - std::pow(beta1, double(t));
    const double bc2 = 1.0 - std::pow(beta2, double(t));
    const __m256d vb1 = _mm256_set1_pd(beta1), vib1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2), vib2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d vbc1 = _mm256_set1_pd(bc1), vbc2 = _mm256_set1_pd(bc2);
    const __m256d vlr = _mm256_set1_pd(lr), veps = _mm256_set1_pd(eps);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gi = _mm256_loadu_pd(g + i);
        __m256d mi = _mm256_loadu_pd(m + i);
        __m256d vi = _mm256_loadu_pd(v + i);
        mi = _mm256_fmadd_pd(vb1, mi, _mm256_mul_pd(vib1, gi));
        vi = _mm256_fmadd_pd(vb2, vi, _mm256_mul_pd(vib2, _mm256_mul_pd(gi, gi)));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d mhat = _mm256_div_pd(mi, vbc1);
        const __m256d vhat = _mm256_div_pd(vi, vbc2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        const __m256d upd = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
        _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), upd));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

}  // namespace

bool supported() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

const Ops<float> f32 = {gemm_nn_f32,      gemm_nt_f32,       gemm_tn_f32,
                        axpy_f32,         add_f32,           mul_f32,
                        relu_forward_f32, relu_backward_f32, dot_f32,
                        reduce_sum_f32,   adam_step_f32};

const Ops<double> f64 = {gemm_nn_f64,      gemm_nt_f64,       gemm_tn_f64,
                         axpy_f64,         add_f64,           mul_f64,
                         relu_forward_f64, relu_backward_f64, dot_f64,
                         reduce_sum_f64,   adam_step_f64};

}  // namespace phgmm::kernels::avx2
