#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <vector>

#include "phgmm/kernels/kernels.hpp"
#include "phgmm/tensor.hpp"

namespace phgmm {

namespace detail {
inline const kernels::Ops<float>& ops(float) { return kernels::f32; }
inline const kernels::Ops<double>& ops(double) { return kernels::f64; }
}  // namespace detail

// Dynamic reverse-mode autodiff tape. A graph is built fresh for every
// forward pass; backward() walks the tape in reverse creation order.
// Feature maps are [C,H,W]; vectors are 1-d; scalars have shape [1].
template <typename T>
class GraphT {
public:
    // Constant input; gradients do not flow into it.
    int input(TensorT<T> v) {
        const int id = new_node(std::move(v), false);
        return id;
    }

    // Leaf bound to external parameter storage. Gradients accumulate
    // directly into `grad_out`, which the caller owns and zeroes.
    int param(TensorT<T>& value, TensorT<T>& grad_out) {
        Node n;
        n.ext_value = &value;
        n.ext_grad = &grad_out;
        n.needs = true;
        nodes_.push_back(std::move(n));
        return int(nodes_.size()) - 1;
    }

    TensorT<T>& val(int id) {
        Node& n = nodes_[size_t(id)];
        return n.ext_value ? *n.ext_value : n.value;
    }
    TensorT<T>& grad(int id) {
        Node& n = nodes_[size_t(id)];
        return n.ext_grad ? *n.ext_grad : n.grad;
    }
    bool needs(int id) const { return nodes_[size_t(id)].needs; }
    size_t num_nodes() const { return nodes_.size(); }

    void backward(int id) {
        if (val(id).size() != 1) throw shape_error("backward expects a scalar node");
        grad(id)[0] = T(1);
        for (int i = id; i >= 0; --i) {
            Node& n = nodes_[size_t(i)];
            if (n.needs && n.backward) n.backward();
        }
    }

    // ------------------------------------------------------- elementwise
    int add(int a, int b) {
        same_shape(a, b, "add");
        int id = alloc_like(a, {a, b});
        op().add(val(a).size(), val(a).data(), val(b).data(), val(id).data());
        set_backward(id, [this, id, a, b] {
            if (needs(a)) op().axpy(grad(id).size(), T(1), grad(id).data(), grad(a).data());
            if (needs(b)) op().axpy(grad(id).size(), T(1), grad(id).data(), grad(b).data());
        });
        return id;
    }

    int sub(int a, int b) {
        same_shape(a, b, "sub");
        int id = alloc_like(a, {a, b});
        auto& y = val(id);
        const auto &va = val(a), &vb = val(b);
        for (size_t i = 0; i < y.size(); ++i) y[i] = va[i] - vb[i];
        set_backward(id, [this, id, a, b] {
            if (needs(a)) op().axpy(grad(id).size(), T(1), grad(id).data(), grad(a).data());
            if (needs(b)) op().axpy(grad(id).size(), T(-1), grad(id).data(), grad(b).data());
        });
        return id;
    }

    int mul(int a, int b) {
        same_shape(a, b, "mul");
        int id = alloc_like(a, {a, b});
        op().mul(val(a).size(), val(a).data(), val(b).data(), val(id).data());
        set_backward(id, [this, id, a, b] {
            const auto& g = grad(id);
            if (needs(a)) {
                const auto& vb = val(b);
                auto& ga = grad(a);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
            }
            if (needs(b)) {
                const auto& va = val(a);
                auto& gb = grad(b);
                for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
            }
        });
        return id;
    }

    int div(int a, int b) {
        same_shape(a, b, "div");
        int id = alloc_like(a, {a, b});
        auto& y = val(id);
        const auto &va = val(a), &vb = val(b);
        for (size_t i = 0; i < y.size(); ++i) y[i] = va[i] / vb[i];
        set_backward(id, [this, id, a, b] {
            const auto& g = grad(id);
            const auto &va = val(a), &vb = val(b);
            if (needs(a)) {
                auto& ga = grad(a);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / vb[i];
            }
            if (needs(b)) {
                auto& gb = grad(b);
                for (size_t i = 0; i < g.size(); ++i)
                    gb[i] -= g[i] * va[i] / (vb[i] * vb[i]);
            }
        });
        return id;
    }

    // y = a*x + b
    int affine(int x, T a, T b) {
        int id = alloc_like(x, {x});
        auto& y = val(id);
        const auto& vx = val(x);
        for (size_t i = 0; i < y.size(); ++i) y[i] = a * vx[i] + b;
        set_backward(id, [this, id, x, a] {
            if (needs(x)) op().axpy(grad(id).size(), a, grad(id).data(), grad(x).data());
        });
        return id;
    }

    int exp_(int x) {
        int id = alloc_like(x, {x});
        auto& y = val(id);
        const auto& vx = val(x);
        for (size_t i = 0; i < y.size(); ++i) y[i] = std::exp(vx[i]);
        set_backward(id, [this, id, x] {
            if (!needs(x)) return;
            const auto &g = grad(id), &y = val(id);
            auto& gx = grad(x);
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i];
        });
        return id;
    }

    int relu(int x) {
        int id = alloc_like(x, {x});
        op().relu_forward(val(x).size(), val(x).data(), val(id).data());
        set_backward(id, [this, id, x] {
            if (needs(x))
                op().relu_backward(val(x).size(), val(x).data(), grad(id).data(),
                                   grad(x).data());
        });
        return id;
    }

    int sigmoid(int x) {
        int id = alloc_like(x, {x});
        auto& y = val(id);
        const auto& vx = val(x);
        for (size_t i = 0; i < y.size(); ++i) y[i] = T(1) / (T(1) + std::exp(-vx[i]));
        set_backward(id, [this, id, x] {
            if (!needs(x)) return;
            const auto &g = grad(id), &y = val(id);
            auto& gx = grad(x);
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (T(1) - y[i]);
        });
        return id;
    }

    // Gradient passes where the value was not clipped.
    int clamp(int x, T lo, T hi) {
        int id = alloc_like(x, {x});
        auto& y = val(id);
        const auto& vx = val(x);
        for (size_t i = 0; i < y.size(); ++i) y[i] = std::min(hi, std::max(lo, vx[i]));
        set_backward(id, [this, id, x, lo, hi] {
            if (!needs(x)) return;
            const auto& g = grad(id);
            const auto& vx = val(x);
            auto& gx = grad(x);
            for (size_t i = 0; i < g.size(); ++i)
                if (vx[i] >= lo && vx[i] <= hi) gx[i] += g[i];
        });
        return id;
    }

    // y = x * s[0], s is a scalar node.
    int mul_scalar_node(int x, int s) {
        if (val(s).size() != 1) throw shape_error("mul_scalar_node: s must be scalar");
        int id = alloc_like(x, {x, s});
        auto& y = val(id);
        const auto& vx = val(x);
        const T sv = val(s)[0];
        for (size_t i = 0; i < y.size(); ++i) y[i] = sv * vx[i];
        set_backward(id, [this, id, x, s] {
            const auto& g = grad(id);
            if (needs(x)) op().axpy(g.size(), val(s)[0], g.data(), grad(x).data());
            if (needs(s)) grad(s)[0] += op().dot(g.size(), g.data(), val(x).data());
        });
        return id;
    }

    // ----------------------------------------------------- shape plumbing
    int slice(int x, int offset, int len) {
        if (val(x).ndim() != 1) throw shape_error("slice: 1-d only");
        if (offset < 0 || offset + len > val(x).dim(0)) throw shape_error("slice: out of range");
        int id = new_op({len}, {x});
        auto& y = val(id);
        const auto& vx = val(x);
        for (int i = 0; i < len; ++i) y[size_t(i)] = vx[size_t(offset + i)];
        set_backward(id, [this, id, x, offset, len] {
            if (!needs(x)) return;
            const auto& g = grad(id);
            auto& gx = grad(x);
            for (int i = 0; i < len; ++i) gx[size_t(offset + i)] += g[size_t(i)];
        });
        return id;
    }

    int reshape(int x, std::vector<int> shape) {
        if (TensorT<T>::count(shape) != val(x).size())
            throw shape_error("reshape: element count mismatch");
        int id = new_op(shape, {x});
        auto& y = val(id);
        std::copy(val(x).data(), val(x).data() + val(x).size(), y.data());
        set_backward(id, [this, id, x] {
            if (needs(x))
                op().axpy(grad(id).size(), T(1), grad(id).data(), grad(x).data());
        });
        return id;
    }

    int concat(const std::vector<int>& parts) {
        int total = 0;
        for (int p : parts) {
            if (val(p).ndim() != 1) throw shape_error("concat: 1-d only");
            total += val(p).dim(0);
        }
        int id = new_op({total}, parts);
        auto& y = val(id);
        size_t off = 0;
        for (int p : parts) {
            const auto& vp = val(p);
            std::copy(vp.data(), vp.data() + vp.size(), y.data() + off);
            off += vp.size();
        }
        set_backward(id, [this, id, parts] {
            const auto& g = grad(id);
            size_t off = 0;
            for (int p : parts) {
                const size_t n = val(p).size();
                if (needs(p)) op().axpy(n, T(1), g.data() + off, grad(p).data());
                off += n;
            }
        });
        return id;
    }

    int concat_channels(const std::vector<int>& parts) {
        const int H = val(parts[0]).dim(1), W = val(parts[0]).dim(2);
        int ctot = 0;
        for (int p : parts) {
            const auto& s = val(p).shape();
            if (s.size() != 3 || s[1] != H || s[2] != W)
                throw shape_error("concat_channels: mismatched spatial dims");
            ctot += s[0];
        }
        int id = new_op({ctot, H, W}, parts);
        auto& y = val(id);
        size_t off = 0;
        for (int p : parts) {
            const auto& vp = val(p);
            std::copy(vp.data(), vp.data() + vp.size(), y.data() + off);
            off += vp.size();
        }
        set_backward(id, [this, id, parts] {
            const auto& g = grad(id);
            size_t off = 0;
            for (int p : parts) {
                const size_t n = val(p).size();
                if (needs(p)) op().axpy(n, T(1), g.data() + off, grad(p).data());
                off += n;
            }
        });
        return id;
    }

    // ------------------------------------------------------- reductions
    int reduce_sum(int x) {
        int id = new_op({1}, {x});
        val(id)[0] = op().reduce_sum(val(x).size(), val(x).data());
        set_backward(id, [this, id, x] {
            if (!needs(x)) return;
            const T g = grad(id)[0];
            auto& gx = grad(x);
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += g;
        });
        return id;
    }

    int reduce_mean(int x) {
        int id = new_op({1}, {x});
        const size_t n = val(x).size();
        val(id)[0] = op().reduce_sum(n, val(x).data()) / T(n);
        set_backward(id, [this, id, x, n] {
            if (!needs(x)) return;
            const T g = grad(id)[0] / T(n);
            auto& gx = grad(x);
            for (size_t i = 0; i < n; ++i) gx[i] += g;
        });
        return id;
    }

    // y[c] = sum over H,W
    int channel_sum(int x) {
        const auto& s = val(x).shape();
        if (s.size() != 3) throw shape_error("channel_sum: CHW only");
        const int C = s[0];
        const size_t hw = size_t(s[1]) * s[2];
        int id = new_op({C}, {x});
        auto& y = val(id);
        for (int c = 0; c < C; ++c)
            y[size_t(c)] = op().reduce_sum(hw, val(x).data() + size_t(c) * hw);
        set_backward(id, [this, id, x, C, hw] {
            if (!needs(x)) return;
            const auto& g = grad(id);
            auto& gx = grad(x);
            for (int c = 0; c < C; ++c) {
                const T gv = g[size_t(c)];
                T* p = gx.data() + size_t(c) * hw;
                for (size_t i = 0; i < hw; ++i) p[i] += gv;
            }
        });
        return id;
    }

    // -------------------------------------------------------- softmaxes
    int softmax_vec(int x) {
        if (val(x).ndim() != 1) throw shape_error("softmax_vec: 1-d only");
        int id = alloc_like(x, {x});
        softmax_row(val(x).data(), val(id).data(), size_t(val(x).dim(0)), 1);
        set_backward(id, [this, id, x] {
            if (!needs(x)) return;
            const auto &g = grad(id), &y = val(id);
            auto& gx = grad(x);
            const T s = op().dot(y.size(), y.data(), g.data());
            for (size_t i = 0; i < y.size(); ++i) gx[i] += y[i] * (g[i] - s);
        });
        return id;
    }

    int log_softmax_vec(int x) {
        if (val(x).ndim() != 1) throw shape_error("log_softmax_vec: 1-d only");
        int id = alloc_like(x, {x});
        log_softmax_row(val(x).data(), val(id).data(), size_t(val(x).dim(0)), 1);
        set_backward(id, [this, id, x] {
            if (!needs(x)) return;
            const auto &g = grad(id), &y = val(id);
            auto& gx = grad(x);
            const T gs = op().reduce_sum(g.size(), g.data());
            for (size_t i = 0; i < y.size(); ++i) gx[i] += g[i] - std::exp(y[i]) * gs;
        });
        return id;
    }

    // Per-pixel softmax over the channel dimension.
    int softmax_channels(int x) {
        const auto& s = val(x).shape();
        if (s.size() != 3) throw shape_error("softmax_channels: CHW only");
        int id = alloc_like(x, {x});
        const size_t C = size_t(s[0]), hw = size_t(s[1]) * s[2];
        for (size_t i = 0; i < hw; ++i)
            softmax_row(val(x).data() + i, val(id).data() + i, C, hw);
        set_backward(id, [this, id, x, C, hw] {
            if (!needs(x)) return;
            const auto &g = grad(id), &y = val(id);
            auto& gx = grad(x);
            for (size_t i = 0; i < hw; ++i) {
                T s = 0;
                for (size_t c = 0; c < C; ++c) s += y[c * hw + i] * g[c * hw + i];
                for (size_t c = 0; c < C; ++c)
                    gx[c * hw + i] += y[c * hw + i] * (g[c * hw + i] - s);
            }
        });
        return id;
    }

    int log_softmax_channels(int x) {
        const auto& s = val(x).shape();
        if (s.size() != 3) throw shape_error("log_softmax_channels: CHW only");
        int id = alloc_like(x, {x});
        const size_t C = size_t(s[0]), hw = size_t(s[1]) * s[2];
        for (size_t i = 0; i < hw; ++i)
            log_softmax_row(val(x).data() + i, val(id).data() + i, C, hw);
        set_backward(id, [this, id, x, C, hw] {
            if (!needs(x)) return;
            const auto &g = grad(id), &y = val(id);
            auto& gx = grad(x);
            for (size_t i = 0; i < hw; ++i) {
                T gs = 0;
                for (size_t c = 0; c < C; ++c) gs += g[c * hw + i];
                for (size_t c = 0; c < C; ++c)
                    gx[c * hw + i] += g[c * hw + i] - std::exp(y[c * hw + i]) * gs;
            }
        });
        return id;
    }

    // ------------------------------------------------------------ layers
    // x [Cin,H,W], w [Cout,Cin,kh,kw], b [Cout] or -1. Explicit edge padding
    // supports even kernels ('same' output needs asymmetric pads).
    int conv2d(int x, int w, int b, int stride, int pt, int pl, int pb, int pr,
               int dilation = 1) {
        const auto& xs = val(x).shape();
        const auto& ws = val(w).shape();
        if (xs.size() != 3 || ws.size() != 4) throw shape_error("conv2d: bad ranks");
        if (ws[1] != xs[0]) throw shape_error("conv2d: channel mismatch");
        const int Cin = xs[0], H = xs[1], W = xs[2];
        const int Cout = ws[0], kh = ws[2], kw = ws[3];
        const int eh = dilation * (kh - 1) + 1, ew = dilation * (kw - 1) + 1;
        const int Ho = (H + pt + pb - eh) / stride + 1;
        const int Wo = (W + pl + pr - ew) / stride + 1;
        if (Ho <= 0 || Wo <= 0) throw shape_error("conv2d: empty output");
        const int ck = Cin * kh * kw;
        const size_t np = size_t(Ho) * Wo;

        TensorT<T> col({ck, int(np)});
        im2col(val(x), kh, kw, stride, pt, pl, dilation, Ho, Wo, col);

        std::vector<int> parents{x, w};
        if (b >= 0) parents.push_back(b);
        int id = new_op({Cout, Ho, Wo}, parents);
        auto& y = val(id);
        op().gemm_nn(Cout, int(np), ck, val(w).data(), col.data(), y.data());
        if (b >= 0) {
            const auto& vb = val(b);
            for (int c = 0; c < Cout; ++c) {
                T* p = y.data() + size_t(c) * np;
                for (size_t i = 0; i < np; ++i) p[i] += vb[size_t(c)];
            }
        }
        set_backward(id, [this, id, x, w, b, stride, pt, pl, dilation, Cin, H, W,
                          Cout, kh, kw, Ho, Wo, ck, np, col = std::move(col)] {
            const auto& g = grad(id);
            if (b >= 0 && needs(b)) {
                auto& gb = grad(b);
                for (int c = 0; c < Cout; ++c)
                    gb[size_t(c)] += op().reduce_sum(np, g.data() + size_t(c) * np);
            }
            if (needs(w))
                op().gemm_nt(Cout, ck, int(np), g.data(), col.data(), grad(w).data());
            if (needs(x)) {
                TensorT<T> dcol({ck, int(np)});
                op().gemm_tn(ck, int(np), Cout, val(w).data(), g.data(), dcol.data());
                col2im(dcol, kh, kw, stride, pt, pl, dilation, Ho, Wo, Cin, H, W,
                       grad(x));
            }
        });
        return id;
    }

    // x [in], w [out,in], b [out] or -1.
    int linear(int x, int w, int b) {
        const auto& xs = val(x).shape();
        const auto& ws = val(w).shape();
        if (xs.size() != 1 || ws.size() != 2 || ws[1] != xs[0])
            throw shape_error("linear: shape mismatch");
        const int in = xs[0], out = ws[0];
        std::vector<int> parents{x, w};
        if (b >= 0) parents.push_back(b);
        int id = new_op({out}, parents);
        auto& y = val(id);
        op().gemm_nn(out, 1, in, val(w).data(), val(x).data(), y.data());
        if (b >= 0) op().axpy(size_t(out), T(1), val(b).data(), y.data());
        set_backward(id, [this, id, x, w, b, in, out] {
            const auto& g = grad(id);
            if (b >= 0 && needs(b)) op().axpy(size_t(out), T(1), g.data(), grad(b).data());
            if (needs(w))
                op().gemm_nt(out, in, 1, g.data(), val(x).data(), grad(w).data());
            if (needs(x))
                op().gemm_tn(in, 1, out, val(w).data(), g.data(), grad(x).data());
        });
        return id;
    }

    // Per-channel standardization over the sample's H,W, with learned scale
    // and shift. Statistics come from the single sample, so evaluation is a
    // pure function of the input.
    int spatial_norm(int x, int gamma, int beta, T eps) {
        const auto& s = val(x).shape();
        if (s.size() != 3) throw shape_error("spatial_norm: CHW only");
        const int C = s[0];
        const size_t hw = size_t(s[1]) * s[2];
        if (val(gamma).size() != size_t(C) || val(beta).size() != size_t(C))
            throw shape_error("spatial_norm: gamma/beta size mismatch");

        TensorT<T> xhat({C, s[1], s[2]});
        TensorT<T> invstd({C});
        const auto& vx = val(x);
        for (int c = 0; c < C; ++c) {
            const T* p = vx.data() + size_t(c) * hw;
            const T mean = op().reduce_sum(hw, p) / T(hw);
            T var = 0;
            for (size_t i = 0; i < hw; ++i) {
                const T d = p[i] - mean;
                var += d * d;
            }
            var /= T(hw);
            const T is = T(1) / std::sqrt(var + eps);
            invstd[size_t(c)] = is;
            T* q = xhat.data() + size_t(c) * hw;
            for (size_t i = 0; i < hw; ++i) q[i] = (p[i] - mean) * is;
        }
        int id = new_op(s, {x, gamma, beta});
        auto& y = val(id);
        const auto &vg = val(gamma), &vb = val(beta);
        for (int c = 0; c < C; ++c) {
            const T* q = xhat.data() + size_t(c) * hw;
            T* o = y.data() + size_t(c) * hw;
            for (size_t i = 0; i < hw; ++i) o[i] = vg[size_t(c)] * q[i] + vb[size_t(c)];
        }
        set_backward(id, [this, id, x, gamma, beta, C, hw, xhat = std::move(xhat),
                          invstd = std::move(invstd)] {
            const auto& g = grad(id);
            for (int c = 0; c < C; ++c) {
                const T* gy = g.data() + size_t(c) * hw;
                const T* xh = xhat.data() + size_t(c) * hw;
                const T sum_gy = op().reduce_sum(hw, gy);
                const T sum_gy_xh = op().dot(hw, gy, xh);
                if (needs(beta)) grad(beta)[size_t(c)] += sum_gy;
                if (needs(gamma)) grad(gamma)[size_t(c)] += sum_gy_xh;
                if (needs(x)) {
                    const T gsc = val(gamma)[size_t(c)] * invstd[size_t(c)];
                    T* gx = grad(x).data() + size_t(c) * hw;
                    const T m1 = sum_gy / T(hw), m2 = sum_gy_xh / T(hw);
                    for (size_t i = 0; i < hw; ++i)
                        gx[i] += gsc * (gy[i] - m1 - xh[i] * m2);
                }
            }
        });
        return id;
    }

    int maxpool2(int x) {
        const auto& s = val(x).shape();
        if (s.size() != 3 || s[1] % 2 || s[2] % 2)
            throw shape_error("maxpool2: needs even CHW input");
        const int C = s[0], H = s[1], W = s[2], Ho = H / 2, Wo = W / 2;
        std::vector<int> arg(size_t(C) * Ho * Wo);
        int id = new_op({C, Ho, Wo}, {x});
        auto& y = val(id);
        const auto& vx = val(x);
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < Ho; ++i)
                for (int j = 0; j < Wo; ++j) {
                    size_t best = (size_t(c) * H + 2 * i) * W + 2 * j;
                    T bv = vx[best];
                    for (int di = 0; di < 2; ++di)
                        for (int dj = 0; dj < 2; ++dj) {
                            const size_t idx =
                                (size_t(c) * H + 2 * i + di) * W + 2 * j + dj;
                            if (vx[idx] > bv) {
                                bv = vx[idx];
                                best = idx;
                            }
                        }
                    y[(size_t(c) * Ho + i) * Wo + j] = bv;
                    arg[(size_t(c) * Ho + i) * Wo + j] = int(best);
                }
        set_backward(id, [this, id, x, arg = std::move(arg)] {
            if (!needs(x)) return;
            const auto& g = grad(id);
            auto& gx = grad(x);
            for (size_t i = 0; i < arg.size(); ++i) gx[size_t(arg[i])] += g[i];
        });
        return id;
    }

    int global_avg_pool(int x) {
        const auto& s = val(x).shape();
        if (s.size() != 3) throw shape_error("global_avg_pool: CHW only");
        const int C = s[0];
        const size_t hw = size_t(s[1]) * s[2];
        int id = new_op({C}, {x});
        auto& y = val(id);
        for (int c = 0; c < C; ++c)
            y[size_t(c)] = op().reduce_sum(hw, val(x).data() + size_t(c) * hw) / T(hw);
        set_backward(id, [this, id, x, C, hw] {
            if (!needs(x)) return;
            const auto& g = grad(id);
            auto& gx = grad(x);
            for (int c = 0; c < C; ++c) {
                const T gv = g[size_t(c)] / T(hw);
                T* p = gx.data() + size_t(c) * hw;
                for (size_t i = 0; i < hw; ++i) p[i] += gv;
            }
        });
        return id;
    }

    // Tiles a vector [D] into a map [D,H,W].
    int broadcast_spatial(int x, int H, int W) {
        if (val(x).ndim() != 1) throw shape_error("broadcast_spatial: 1-d only");
        const int D = val(x).dim(0);
        const size_t hw = size_t(H) * W;
        int id = new_op({D, H, W}, {x});
        auto& y = val(id);
        for (int d = 0; d < D; ++d) {
            const T v = val(x)[size_t(d)];
            T* p = y.data() + size_t(d) * hw;
            for (size_t i = 0; i < hw; ++i) p[i] = v;
        }
        set_backward(id, [this, id, x, D, hw] {
            if (!needs(x)) return;
            const auto& g = grad(id);
            auto& gx = grad(x);
            for (int d = 0; d < D; ++d)
                gx[size_t(d)] += op().reduce_sum(hw, g.data() + size_t(d) * hw);
        });
        return id;
    }

    // Bilinear upsample by an integer factor, half-pixel sample centers,
    // edges clamped. factor 1 is the identity.
    int bilinear_upsample(int x, int factor) {
        if (factor < 1) throw shape_error("bilinear_upsample: factor must be >= 1");
        if (factor == 1) return x;
        const auto& s = val(x).shape();
        if (s.size() != 3) throw shape_error("bilinear_upsample: CHW only");
        const int C = s[0], H = s[1], W = s[2];
        const int Ho = H * factor, Wo = W * factor;

        struct Tap {
            int lo, hi;
            T w;  // weight of hi; lo gets 1-w
        };
        auto taps = [factor](int out_n, int in_n) {
            std::vector<Tap> t(static_cast<size_t>(out_n));
            for (int o = 0; o < out_n; ++o) {
                T src = (T(o) + T(0.5)) / T(factor) - T(0.5);
                src = std::min(T(in_n - 1), std::max(T(0), src));
                const int lo = int(src);
                t[size_t(o)] = {lo, std::min(lo + 1, in_n - 1), src - T(lo)};
            }
            return t;
        };
        const auto ti = taps(Ho, H);
        const auto tj = taps(Wo, W);

        int id = new_op({C, Ho, Wo}, {x});
        auto& y = val(id);
        const auto& vx = val(x);
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < Ho; ++i) {
                const Tap& a = ti[size_t(i)];
                const T* r0 = vx.data() + (size_t(c) * H + a.lo) * W;
                const T* r1 = vx.data() + (size_t(c) * H + a.hi) * W;
                T* out = y.data() + (size_t(c) * Ho + i) * Wo;
                for (int j = 0; j < Wo; ++j) {
                    const Tap& b = tj[size_t(j)];
                    const T top = r0[b.lo] + b.w * (r0[b.hi] - r0[b.lo]);
                    const T bot = r1[b.lo] + b.w * (r1[b.hi] - r1[b.lo]);
                    out[j] = top + a.w * (bot - top);
                }
            }
        set_backward(id, [this, id, x, C, H, W, Ho, Wo, ti, tj] {
            if (!needs(x)) return;
            const auto& g = grad(id);
            auto& gx = grad(x);
            for (int c = 0; c < C; ++c)
                for (int i = 0; i < Ho; ++i) {
                    const Tap& a = ti[size_t(i)];
                    T* r0 = gx.data() + (size_t(c) * H + a.lo) * W;
                    T* r1 = gx.data() + (size_t(c) * H + a.hi) * W;
                    const T* gy = g.data() + (size_t(c) * Ho + i) * Wo;
                    for (int j = 0; j < Wo; ++j) {
                        const Tap& b = tj[size_t(j)];
                        const T gv = gy[j];
                        r0[b.lo] += (1 - a.w) * (1 - b.w) * gv;
                        r0[b.hi] += (1 - a.w) * b.w * gv;
                        r1[b.lo] += a.w * (1 - b.w) * gv;
                        r1[b.hi] += a.w * b.w * gv;
                    }
                }
        });
        return id;
    }

    // Mean of -logp[label] over pixels whose label != ignore. logp is a
    // [C,H,W] log-probability map; labels holds H*W class ids row-major.
    // Returns 0 when every pixel is ignored.
    int ce_pick_mean(int logp, std::vector<int> labels, int ignore) {
        const auto& s = val(logp).shape();
        if (s.size() != 3) throw shape_error("ce_pick_mean: CHW only");
        const int C = s[0];
        const size_t hw = size_t(s[1]) * s[2];
        if (labels.size() != hw) throw shape_error("ce_pick_mean: label count mismatch");
        size_t n = 0;
        T acc = 0;
        for (size_t i = 0; i < hw; ++i) {
            const int c = labels[i];
            if (c == ignore) continue;
            if (c < 0 || c >= C) throw shape_error("ce_pick_mean: label out of range");
            acc -= val(logp)[size_t(c) * hw + i];
            ++n;
        }
        int id = new_op({1}, {logp});
        val(id)[0] = n ? acc / T(n) : T(0);
        set_backward(id, [this, id, logp, hw, ignore, n, labels = std::move(labels)] {
            if (!needs(logp) || n == 0) return;
            const T g = grad(id)[0] / T(n);
            auto& gx = grad(logp);
            for (size_t i = 0; i < hw; ++i)
                if (labels[i] != ignore) gx[size_t(labels[i]) * hw + i] -= g;
        });
        return id;
    }

private:
    struct Node {
        TensorT<T> value;
        TensorT<T> grad;
        TensorT<T>* ext_value = nullptr;
        TensorT<T>* ext_grad = nullptr;
        bool needs = false;
        std::function<void()> backward;
    };

    static const kernels::Ops<T>& op() { return detail::ops(T{}); }

    int new_node(TensorT<T> v, bool needs) {
        Node n;
        n.value = std::move(v);
        n.needs = needs;
        if (needs) n.grad = TensorT<T>(n.value.shape());
        nodes_.push_back(std::move(n));
        return int(nodes_.size()) - 1;
    }

    int new_op(const std::vector<int>& shape, const std::vector<int>& parents) {
        bool needs = false;
        for (int p : parents) needs = needs || nodes_[size_t(p)].needs;
        return new_node(TensorT<T>(shape), needs);
    }

    int alloc_like(int x, const std::vector<int>& parents) {
        return new_op(val(x).shape(), parents);
    }

    void set_backward(int id, std::function<void()> fn) {
        if (nodes_[size_t(id)].needs) nodes_[size_t(id)].backward = std::move(fn);
    }

    void same_shape(int a, int b, const char* what) {
        if (val(a).shape() != val(b).shape())
            throw shape_error(std::string(what) + ": shape mismatch " +
                              val(a).shape_str() + " vs " + val(b).shape_str());
    }

    static void softmax_row(const T* x, T* y, size_t n, size_t stride) {
        T mx = x[0];
        for (size_t i = 1; i < n; ++i) mx = std::max(mx, x[i * stride]);
        T s = 0;
        for (size_t i = 0; i < n; ++i) {
            y[i * stride] = std::exp(x[i * stride] - mx);
            s += y[i * stride];
        }
        for (size_t i = 0; i < n; ++i) y[i * stride] /= s;
    }

    static void log_softmax_row(const T* x, T* y, size_t n, size_t stride) {
        T mx = x[0];
        for (size_t i = 1; i < n; ++i) mx = std::max(mx, x[i * stride]);
        T s = 0;
        for (size_t i = 0; i < n; ++i) s += std::exp(x[i * stride] - mx);
        const T lse = mx + std::log(s);
        for (size_t i = 0; i < n; ++i) y[i * stride] = x[i * stride] - lse;
    }

    static void im2col(const TensorT<T>& x, int kh, int kw, int stride, int pt,
                       int pl, int dil, int Ho, int Wo, TensorT<T>& col) {
        const int Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
        T* out = col.data();
        for (int c = 0; c < Cin; ++c)
            for (int u = 0; u < kh; ++u)
                for (int v = 0; v < kw; ++v) {
                    for (int i = 0; i < Ho; ++i) {
                        const int hi = i * stride - pt + u * dil;
                        if (hi < 0 || hi >= H) {
                            for (int j = 0; j < Wo; ++j) *out++ = T(0);
                            continue;
                        }
                        const T* row = x.data() + (size_t(c) * H + hi) * W;
                        for (int j = 0; j < Wo; ++j) {
                            const int wi = j * stride - pl + v * dil;
                            *out++ = (wi >= 0 && wi < W) ? row[wi] : T(0);
                        }
                    }
                }
    }

    static void col2im(const TensorT<T>& col, int kh, int kw, int stride, int pt,
                       int pl, int dil, int Ho, int Wo, int Cin, int H, int W,
                       TensorT<T>& dx) {
        const T* in = col.data();
        for (int c = 0; c < Cin; ++c)
            for (int u = 0; u < kh; ++u)
                for (int v = 0; v < kw; ++v) {
                    for (int i = 0; i < Ho; ++i) {
                        const int hi = i * stride - pt + u * dil;
                        if (hi < 0 || hi >= H) {
                            in += Wo;
                            continue;
                        }
                        T* row = dx.data() + (size_t(c) * H + hi) * W;
                        for (int j = 0; j < Wo; ++j) {
                            const int wi = j * stride - pl + v * dil;
                            if (wi >= 0 && wi < W) row[wi] += *in;
                            ++in;
                        }
                    }
                }
    }

    std::deque<Node> nodes_;
};

using Graph = GraphT<float>;
using GraphF64 = GraphT<double>;

}  // namespace phgmm
