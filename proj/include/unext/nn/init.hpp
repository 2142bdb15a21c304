#pragma once

#include <cmath>

#include "unext/core/rng.hpp"
#include "unext/core/tensor.hpp"

namespace unext {
namespace init {

// He-style normal fill: std = gain * sqrt(2 / fan_in). Elements are drawn in
// storage order so a given seed pins every weight.
template <typename T>
void he_normal(Tensor<T>& t, Rng& rng, int64_t fan_in, double gain = 1.0) {
    const double std = gain * std::sqrt(2.0 / static_cast<double>(fan_in));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.normal() * std);
}

template <typename T>
void zeros(Tensor<T>& t) {
    t.fill(T(0));
}

template <typename T>
void constant(Tensor<T>& t, T v) {
    t.fill(v);
}

inline int64_t conv_fan_in(int64_t c_in, int64_t kh, int64_t kw) { return c_in * kh * kw; }

} // namespace init
} // namespace unext
