#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "phgmm/common.hpp"
#include "phgmm/kernels/kernels.hpp"
#include "phgmm/rng.hpp"

using phgmm::Rng;
namespace K = phgmm::kernels;

namespace {

template <typename T>
std::vector<T> random_vec(Rng& rng, size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<T> v(n);
    for (auto& x : v) x = T(rng.uniform(lo, hi));
    return v;
}

// Ground truth: direct triple loop with double accumulation.
template <typename T>
std::vector<double> naive_gemm(int m, int n, int k, const std::vector<T>& a,
                               const std::vector<T>& b, char mode) {
    std::vector<double> c(size_t(m) * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0;
            for (int p = 0; p < k; ++p) {
                double av, bv;
                if (mode == 'n') {
                    av = a[size_t(i) * k + p];
                    bv = b[size_t(p) * n + j];
                } else if (mode == 't') {  // gemm_nt
                    av = a[size_t(i) * k + p];
                    bv = b[size_t(j) * k + p];
                } else {  // gemm_tn
                    av = a[size_t(p) * m + i];
                    bv = b[size_t(p) * n + j];
                }
                acc += av * bv;
            }
            c[size_t(i) * n + j] = acc;
        }
    return c;
}

template <typename T>
void check_gemm_variant(const K::Ops<T>& ops, int m, int n, int k, uint64_t seed) {
    Rng rng(seed);
    const auto a = random_vec<T>(rng, size_t(std::max(m, k)) * std::max(k, m));
    const auto b = random_vec<T>(rng, size_t(std::max(k, n)) * std::max(n, k));
    const double tol = std::is_same_v<T, float> ? 1e-3 : 1e-10;

    const struct {
        char mode;
        void (*fn)(int, int, int, const T*, const T*, T*);
    } cases[] = {{'n', ops.gemm_nn}, {'t', ops.gemm_nt}, {'m', ops.gemm_tn}};
    for (const auto& cs : cases) {
        std::vector<T> c(size_t(m) * n, T(0.5));  // nonzero: verifies accumulate semantics
        cs.fn(m, n, k, a.data(), b.data(), c.data());
        const auto want = naive_gemm(m, n, k, a, b, cs.mode);
        for (size_t i = 0; i < c.size(); ++i) {
            const double w = want[i] + 0.5;
            REQUIRE(std::abs(double(c[i]) - w) <= tol * (1.0 + std::abs(w)));
        }
    }
}

}  // namespace

TEST_CASE("scalar gemm matches naive triple loop") {
    check_gemm_variant(K::scalar::f32, 7, 9, 5, 1);
    check_gemm_variant(K::scalar::f64, 7, 9, 5, 2);
    check_gemm_variant(K::scalar::f32, 1, 1, 1, 3);
    check_gemm_variant(K::scalar::f64, 16, 32, 8, 4);
}

TEST_CASE("avx2 gemm matches naive triple loop across edge sizes") {
    if (!K::avx2::supported()) return;
    // Sizes straddle the micro-tile (4x16 / 4x8) and cache-block boundaries.
    for (auto [m, n, k] : {std::tuple{1, 1, 1},
                           {3, 5, 2},
                           {4, 16, 8},
                           {5, 17, 9},
                           {13, 31, 7},
                           {64, 64, 64},
                           {130, 300, 260},
                           {2, 520, 3}}) {
        check_gemm_variant(K::avx2::f32, m, n, k, uint64_t(m * 100 + n));
        check_gemm_variant(K::avx2::f64, m, n, k, uint64_t(m * 100 + n + 1));
    }
}

TEST_CASE("elementwise avx2 kernels match scalar exactly") {
    if (!K::avx2::supported()) return;
    Rng rng(42);
    for (size_t n : {size_t(1), size_t(7), size_t(8), size_t(9), size_t(1023)}) {
        const auto a = random_vec<float>(rng, n);
        const auto b = random_vec<float>(rng, n);

        std::vector<float> s(n), v(n);
        K::scalar::f32.add(n, a.data(), b.data(), s.data());
        K::avx2::f32.add(n, a.data(), b.data(), v.data());
        REQUIRE(s == v);

        K::scalar::f32.mul(n, a.data(), b.data(), s.data());
        K::avx2::f32.mul(n, a.data(), b.data(), v.data());
        REQUIRE(s == v);

        K::scalar::f32.relu_forward(n, a.data(), s.data());
        K::avx2::f32.relu_forward(n, a.data(), v.data());
        REQUIRE(s == v);

        s = b;
        v = b;
        K::scalar::f32.axpy(n, 0.37f, a.data(), s.data());
        K::avx2::f32.axpy(n, 0.37f, a.data(), v.data());
        REQUIRE(s == v);

        std::vector<float> ds(n, 0.1f), dv(n, 0.1f);
        K::scalar::f32.relu_backward(n, a.data(), b.data(), ds.data());
        K::avx2::f32.relu_backward(n, a.data(), b.data(), dv.data());
        REQUIRE(ds == dv);
    }
}

TEST_CASE("reductions agree between variants within accumulation tolerance") {
    if (!K::avx2::supported()) return;
    Rng rng(7);
    for (size_t n : {size_t(3), size_t(33), size_t(1000), size_t(100000)}) {
        const auto a = random_vec<double>(rng, n);
        const auto b = random_vec<double>(rng, n);
        const double ds = K::scalar::f64.dot(n, a.data(), b.data());
        const double dv = K::avx2::f64.dot(n, a.data(), b.data());
        REQUIRE(std::abs(ds - dv) <= 1e-9 * (1.0 + std::abs(ds)));
        const double ss = K::scalar::f64.reduce_sum(n, a.data());
        const double sv = K::avx2::f64.reduce_sum(n, a.data());
        REQUIRE(std::abs(ss - sv) <= 1e-9 * (1.0 + std::abs(ss)));

        const auto af = random_vec<float>(rng, n);
        const auto bf = random_vec<float>(rng, n);
        const float fs = K::scalar::f32.dot(n, af.data(), bf.data());
        const float fv = K::avx2::f32.dot(n, af.data(), bf.data());
        REQUIRE(std::abs(fs - fv) <= 1e-3f * (1.f + std::abs(fs)));
    }
}

TEST_CASE("adam_step matches the update formula and variants agree") {
    Rng rng(11);
    const size_t n = 37;
    auto w0 = random_vec<double>(rng, n);
    auto g = random_vec<double>(rng, n);
    const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;

    auto w = w0;
    std::vector<double> m(n, 0.0), v(n, 0.0);
    for (long t = 1; t <= 3; ++t)
        K::scalar::f64.adam_step(n, w.data(), g.data(), m.data(), v.data(), lr,
                                 b1, b2, eps, t);

    // Constant gradient: m and v converge toward g and g^2, and the first
    // step must be exactly -lr * g / (|g| + eps') in the bias-corrected form.
    std::vector<double> mw(n, 0.0), mv(n, 0.0);
    auto ww = w0;
    for (long t = 1; t <= 3; ++t) {
        for (size_t i = 0; i < n; ++i) {
            mw[i] = b1 * mw[i] + (1 - b1) * g[i];
            mv[i] = b2 * mv[i] + (1 - b2) * g[i] * g[i];
            const double mhat = mw[i] / (1 - std::pow(b1, double(t)));
            const double vhat = mv[i] / (1 - std::pow(b2, double(t)));
            ww[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
    for (size_t i = 0; i < n; ++i) REQUIRE(w[i] == doctest::Approx(ww[i]).epsilon(1e-12));

    if (K::avx2::supported()) {
        auto wa = w0;
        std::vector<double> ma(n, 0.0), va(n, 0.0);
        for (long t = 1; t <= 3; ++t)
            K::avx2::f64.adam_step(n, wa.data(), g.data(), ma.data(), va.data(),
                                   lr, b1, b2, eps, t);
        for (size_t i = 0; i < n; ++i)
            REQUIRE(wa[i] == doctest::Approx(w[i]).epsilon(1e-12));
    }
}

TEST_CASE("dispatch select validates modes") {
    const std::string before = K::active();
    CHECK(K::select("scalar") == "scalar");
    CHECK_THROWS_AS(K::select("sse9"), phgmm::config_error);
    const std::string picked = K::select("auto");
    CHECK((picked == "scalar" || picked == "avx2"));
    K::select(before);
}
