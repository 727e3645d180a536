#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "phgmm/graph.hpp"
#include "phgmm/rng.hpp"

namespace phgmm {

template <typename T>
struct Param {
    std::string name;
    TensorT<T> value;
    TensorT<T> grad;

    Param(std::string n, std::vector<int> shape)
        : name(std::move(n)), value(shape), grad(std::move(shape)) {}
};

template <typename T>
using ParamList = std::vector<Param<T>*>;

namespace init {

// Kaiming-normal for convolutions feeding ReLUs.
template <typename T>
void kaiming(TensorT<T>& w, int fan_in, Rng& rng) {
    const double std = std::sqrt(2.0 / double(fan_in));
    for (size_t i = 0; i < w.size(); ++i) w[i] = T(rng.normal(0.0, std));
}

// Xavier-uniform for affine layers.
template <typename T>
void xavier(TensorT<T>& w, int fan_in, int fan_out, Rng& rng) {
    const double lim = std::sqrt(6.0 / double(fan_in + fan_out));
    for (size_t i = 0; i < w.size(); ++i) w[i] = T(rng.uniform(-lim, lim));
}

}  // namespace init

template <typename T>
struct Conv2dT {
    Param<T> w;
    std::unique_ptr<Param<T>> b;
    int stride, dilation;
    int pt, pl, pb, pr;

    // 'same'-style padding for the given kernel: odd kernels pad k/2 on each
    // side, even kernels pad one more at bottom/right.
    Conv2dT(const std::string& name, int cin, int cout, int k, int stride_,
            Rng& rng, bool bias = true, int dilation_ = 1)
        : w(name + ".w", {cout, cin, k, k}), stride(stride_), dilation(dilation_) {
        const int span = dilation_ * (k - 1) + 1;
        pt = pl = (span - 1) / 2;
        pb = pr = span / 2;
        init::kaiming(w.value, cin * k * k, rng);
        if (bias) b = std::make_unique<Param<T>>(name + ".b", std::vector<int>{cout});
    }

    int forward(GraphT<T>& g, int x) {
        const int wi = g.param(w.value, w.grad);
        const int bi = b ? g.param(b->value, b->grad) : -1;
        return g.conv2d(x, wi, bi, stride, pt, pl, pb, pr, dilation);
    }

    void collect(ParamList<T>& out) {
        out.push_back(&w);
        if (b) out.push_back(b.get());
    }
};

template <typename T>
struct LinearT {
    Param<T> w;
    Param<T> b;

    LinearT(const std::string& name, int in, int out, Rng& rng)
        : w(name + ".w", {out, in}), b(name + ".b", {out}) {
        init::xavier(w.value, in, out, rng);
    }

    int forward(GraphT<T>& g, int x) {
        return g.linear(x, g.param(w.value, w.grad), g.param(b.value, b.grad));
    }

    void collect(ParamList<T>& out) {
        out.push_back(&w);
        out.push_back(&b);
    }
};

// Per-channel standardization over the sample's spatial extent with learned
// scale/shift (epsilon 1e-5).
template <typename T>
struct NormT {
    Param<T> gamma;
    Param<T> beta;

    NormT(const std::string& name, int channels)
        : gamma(name + ".gamma", {channels}), beta(name + ".beta", {channels}) {
        gamma.value.fill(T(1));
    }

    int forward(GraphT<T>& g, int x) {
        return g.spatial_norm(x, g.param(gamma.value, gamma.grad),
                              g.param(beta.value, beta.grad), T(1e-5));
    }

    void collect(ParamList<T>& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }
};

// Basic residual unit: conv-norm-relu-conv-norm plus a (projected) shortcut,
// ReLU after the sum.
template <typename T>
struct ResidualUnitT {
    Conv2dT<T> conv1;
    NormT<T> norm1;
    Conv2dT<T> conv2;
    NormT<T> norm2;
    std::unique_ptr<Conv2dT<T>> proj;
    std::unique_ptr<NormT<T>> proj_norm;

    ResidualUnitT(const std::string& name, int cin, int cout, int stride, Rng& rng,
                  int dilation = 1)
        : conv1(name + ".conv1", cin, cout, 3, stride, rng, false, dilation),
          norm1(name + ".norm1", cout),
          conv2(name + ".conv2", cout, cout, 3, 1, rng, false, dilation),
          norm2(name + ".norm2", cout) {
        if (cin != cout || stride != 1) {
            proj = std::make_unique<Conv2dT<T>>(name + ".proj", cin, cout, 1, stride,
                                                rng, false);
            proj_norm = std::make_unique<NormT<T>>(name + ".proj_norm", cout);
        }
    }

    int forward(GraphT<T>& g, int x) {
        int h = g.relu(norm1.forward(g, conv1.forward(g, x)));
        h = norm2.forward(g, conv2.forward(g, h));
        const int sc = proj ? proj_norm->forward(g, proj->forward(g, x)) : x;
        return g.relu(g.add(h, sc));
    }

    void collect(ParamList<T>& out) {
        conv1.collect(out);
        norm1.collect(out);
        conv2.collect(out);
        norm2.collect(out);
        if (proj) {
            proj->collect(out);
            proj_norm->collect(out);
        }
    }
};

}  // namespace phgmm
