#pragma once

#include <type_traits>
#include <vector>

#include "phgmm/kernels/kernels.hpp"
#include "phgmm/nn.hpp"
#include "phgmm/tensor.hpp"

namespace phgmm {

namespace detail {
template <typename T>
inline const kernels::Ops<T>& ops() {
    if constexpr (std::is_same_v<T, float>)
        return kernels::f32;
    else
        return kernels::f64;
}
}  // namespace detail

// Adam moment buffers, parallel to a fixed parameter list. t counts applied
// steps and drives bias correction; it is checkpointed with the moments.
template <typename T>
struct AdamStateT {
    std::vector<TensorT<T>> m, v;
    long t = 0;

    void init(const ParamList<T>& params) {
        m.clear();
        v.clear();
        t = 0;
        for (auto* p : params) {
            m.emplace_back(p->value.shape());
            v.emplace_back(p->value.shape());
        }
    }
};

// One Adam update over every parameter from its accumulated gradient.
template <typename T>
void adam_step_all(const ParamList<T>& params, AdamStateT<T>& st, T lr, T beta1,
                   T beta2, T eps) {
    if (st.m.size() != params.size())
        throw config_error("optimizer state does not match the parameter list");
    ++st.t;
    const auto& k = detail::ops<T>();
    for (size_t i = 0; i < params.size(); ++i) {
        auto* p = params[i];
        k.adam_step(p->value.size(), p->value.data(), p->grad.data(),
                    st.m[i].data(), st.v[i].data(), lr, beta1, beta2, eps, st.t);
    }
}

using AdamState = AdamStateT<float>;

}  // namespace phgmm
