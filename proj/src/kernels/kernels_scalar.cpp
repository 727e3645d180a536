#include <cmath>
#include <cstddef>

#include "phgmm/kernels/kernels.hpp"

namespace phgmm::kernels::scalar {
namespace {

// Reference implementations. Plain loops, no blocking; these define the
// semantics the SIMD variants are tested against.

template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c) {
    for (int i = 0; i < m; ++i) {
        T* ci = c + size_t(i) * n;
        for (int p = 0; p < k; ++p) {
            const T aip = a[size_t(i) * k + p];
            const T* bp = b + size_t(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c) {
    for (int i = 0; i < m; ++i) {
        const T* ai = a + size_t(i) * k;
        for (int j = 0; j < n; ++j) {
            const T* bj = b + size_t(j) * k;
            T acc = 0;
            for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
            c[size_t(i) * n + j] += acc;
        }
    }
}

template <typename T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c) {
    for (int p = 0; p < k; ++p) {
        const T* ap = a + size_t(p) * m;
        const T* bp = b + size_t(p) * n;
        for (int i = 0; i < m; ++i) {
            const T api = ap[i];
            T* ci = c + size_t(i) * n;
            for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
}

template <typename T>
void axpy(size_t n, T alpha, const T* x, T* y) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void add(size_t n, const T* a, const T* b, T* out) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void mul(size_t n, const T* a, const T* b, T* out) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void relu_forward(size_t n, const T* x, T* out) {
    for (size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(size_t n, const T* x, const T* dy, T* dx) {
    for (size_t i = 0; i < n; ++i)
        if (x[i] > T(0)) dx[i] += dy[i];
}

template <typename T>
T dot(size_t n, const T* a, const T* b) {
    T acc = 0;
    for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <typename T>
T reduce_sum(size_t n, const T* x) {
    T acc = 0;
    for (size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

template <typename T>
void adam_step(size_t n, T* w, const T* g, T* m, T* v, T lr, T beta1, T beta2,
               T eps, long t) {
    const T bc1 = T(1) - std::pow(beta1, T(t));
    const T bc2 = T(1) - std::pow(beta2, T(t));
    for (size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
        v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
        const T mhat = m[i] / bc1;
        const T vhat = v[i] / bc2;
        w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

template <typename T>
constexpr Ops<T> make_ops() {
    return Ops<T>{gemm_nn<T>, gemm_nt<T>,      gemm_tn<T>,       axpy<T>,
                  add<T>,     mul<T>,          relu_forward<T>,  relu_backward<T>,
                  dot<T>,     reduce_sum<T>,   adam_step<T>};
}

}  // namespace

const Ops<float> f32 = make_ops<float>();
const Ops<double> f64 = make_ops<double>();

}  // namespace phgmm::kernels::scalar
