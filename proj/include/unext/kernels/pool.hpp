#pragma once

#include <cstdint>
#include <vector>

#include "unext/core/tensor.hpp"

namespace unext {
namespace kernels {

// Stride-1 box mean dividing by the in-bounds window size, so pooling a
// constant map returns that constant everywhere including borders.
// Summed-area table in double keeps binary inputs exact: partial sums are
// integers below 2^53.
template <typename T>
Tensor<T> box_mean_same(const Tensor<T>& x, int64_t k) {
    require(k >= 1 && k % 2 == 1, "box_mean: kernel must be odd, got " + std::to_string(k));
    const Shape4 s = x.shape();
    const int64_t pad = k / 2;
    Tensor<T> y(s);
    std::vector<double> sat(static_cast<size_t>((s.h + 1) * (s.w + 1)));
    const int64_t sw = s.w + 1;
    for (int64_t n = 0; n < s.n; ++n) {
        for (int64_t c = 0; c < s.c; ++c) {
            for (int64_t i = 0; i <= s.h; ++i) sat[static_cast<size_t>(i * sw)] = 0.0;
            for (int64_t j = 0; j <= s.w; ++j) sat[static_cast<size_t>(j)] = 0.0;
            for (int64_t i = 1; i <= s.h; ++i) {
                for (int64_t j = 1; j <= s.w; ++j) {
                    sat[static_cast<size_t>(i * sw + j)] =
                        static_cast<double>(x.at(n, c, i - 1, j - 1)) +
                        sat[static_cast<size_t>((i - 1) * sw + j)] +
                        sat[static_cast<size_t>(i * sw + j - 1)] -
                        sat[static_cast<size_t>((i - 1) * sw + j - 1)];
                }
            }
            for (int64_t i = 0; i < s.h; ++i) {
                const int64_t y0 = std::max<int64_t>(0, i - pad);
                const int64_t y1 = std::min<int64_t>(s.h, i + pad + 1);
                for (int64_t j = 0; j < s.w; ++j) {
                    const int64_t x0 = std::max<int64_t>(0, j - pad);
                    const int64_t x1 = std::min<int64_t>(s.w, j + pad + 1);
                    const double sum = sat[static_cast<size_t>(y1 * sw + x1)] -
                                       sat[static_cast<size_t>(y0 * sw + x1)] -
                                       sat[static_cast<size_t>(y1 * sw + x0)] +
                                       sat[static_cast<size_t>(y0 * sw + x0)];
                    const double count = static_cast<double>((y1 - y0) * (x1 - x0));
                    y.at(n, c, i, j) = static_cast<T>(sum / count);
                }
            }
        }
    }
    return y;
}

} // namespace kernels
} // namespace unext
