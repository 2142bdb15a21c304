#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "unext/core/shape.hpp"

namespace unext {

// Dense row-major (n, c, h, w) tensor owning its storage. T is float for
// production runs and double for gradient checking.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape4 s) : shape_(s), data_(static_cast<size_t>(s.numel()), T(0)) {
        require(s.n >= 0 && s.c >= 0 && s.h >= 0 && s.w >= 0,
                "tensor: negative extent " + s.str());
    }

    Tensor(Shape4 s, T fill) : Tensor(s) { std::fill(data_.begin(), data_.end(), fill); }

    static Tensor zeros(Shape4 s) { return Tensor(s); }
    static Tensor full(Shape4 s, T v) { return Tensor(s, v); }

    const Shape4& shape() const { return shape_; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    T& at(int64_t n, int64_t c, int64_t y, int64_t x) {
        return data_[static_cast<size_t>(((n * shape_.c + c) * shape_.h + y) * shape_.w + x)];
    }
    const T& at(int64_t n, int64_t c, int64_t y, int64_t x) const {
        return data_[static_cast<size_t>(((n * shape_.c + c) * shape_.h + y) * shape_.w + x)];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (const T& v : data_) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (int64_t i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
        return out;
    }

private:
    Shape4 shape_;
    std::vector<T> data_;
};

template <typename T>
inline void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
    require_shape(src.shape(), dst.shape(), "accumulate");
    T* d = dst.data();
    const T* s = src.data();
    const int64_t n = dst.size();
    for (int64_t i = 0; i < n; ++i) d[i] += s[i];
}

} // namespace unext
