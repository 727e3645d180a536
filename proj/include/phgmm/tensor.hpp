#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "phgmm/common.hpp"

namespace phgmm {

// Dense row-major tensor. Feature maps use CHW order; weights use their
// layer's natural layout (documented at each layer).
template <typename T>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(count(shape_), T(0));
    }

    TensorT(std::initializer_list<int> shape) : TensorT(std::vector<int>(shape)) {}

    static TensorT full(std::vector<int> shape, T v) {
        TensorT t(std::move(shape));
        for (auto& x : t.data_) x = v;
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_[size_t(i)]; }
    int ndim() const { return int(shape_.size()); }
    size_t size() const { return data_.size(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](size_t i) { return data_[i]; }
    const T& operator[](size_t i) const { return data_[i]; }

    // CHW accessor for 3-d tensors.
    T& at(int c, int h, int w) {
        return data_[(size_t(c) * shape_[1] + h) * shape_[2] + w];
    }
    const T& at(int c, int h, int w) const {
        return data_[(size_t(c) * shape_[1] + h) * shape_[2] + w];
    }

    void fill(T v) {
        for (auto& x : data_) x = v;
    }

    void zero() { fill(T(0)); }

    std::string shape_str() const {
        std::ostringstream os;
        os << '[';
        for (size_t i = 0; i < shape_.size(); ++i) {
            if (i) os << 'x';
            os << shape_[i];
        }
        os << ']';
        return os.str();
    }

    static size_t count(const std::vector<int>& shape) {
        size_t n = 1;
        for (int d : shape) {
            if (d < 0) throw shape_error("negative tensor dimension");
            n *= size_t(d);
        }
        return n;
    }

private:
    std::vector<int> shape_;
    std::vector<T> data_;
};

using Tensor = TensorT<float>;
using TensorF64 = TensorT<double>;

template <typename T>
void check_shape(const TensorT<T>& t, const std::vector<int>& want, const char* what) {
    if (t.shape() != want) {
        std::ostringstream os;
        os << what << ": expected shape [";
        for (size_t i = 0; i < want.size(); ++i) {
            if (i) os << 'x';
            os << want[i];
        }
        os << "], got " << t.shape_str();
        throw shape_error(os.str());
    }
}

}  // namespace phgmm
