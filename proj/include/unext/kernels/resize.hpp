#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "unext/core/tensor.hpp"

namespace unext {
namespace kernels {

// Per-axis bilinear sampling table under the half-pixel-centers convention
// (source coordinate of output center i is (i + 0.5) * in/out - 0.5, clamped).
struct AxisTaps {
    std::vector<int64_t> lo, hi;
    std::vector<double> w_hi; // weight of hi tap; lo gets 1 - w_hi
};

inline AxisTaps make_axis_taps(int64_t in, int64_t out) {
    AxisTaps t;
    t.lo.resize(static_cast<size_t>(out));
    t.hi.resize(static_cast<size_t>(out));
    t.w_hi.resize(static_cast<size_t>(out));
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (int64_t i = 0; i < out; ++i) {
        double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
        if (src < 0.0) src = 0.0;
        const int64_t lo = std::min(static_cast<int64_t>(src), in - 1);
        t.lo[static_cast<size_t>(i)] = lo;
        t.hi[static_cast<size_t>(i)] = std::min(lo + 1, in - 1);
        t.w_hi[static_cast<size_t>(i)] = src - static_cast<double>(lo);
    }
    return t;
}

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, int64_t oh, int64_t ow) {
    require(oh >= 1 && ow >= 1, "resize: target extent must be >= 1");
    const Shape4 s = x.shape();
    if (s.h == oh && s.w == ow) return x;
    const AxisTaps ty = make_axis_taps(s.h, oh);
    const AxisTaps tx = make_axis_taps(s.w, ow);
    Tensor<T> y(Shape4{s.n, s.c, oh, ow});
    for (int64_t n = 0; n < s.n; ++n) {
        for (int64_t c = 0; c < s.c; ++c) {
            for (int64_t i = 0; i < oh; ++i) {
                const int64_t y0 = ty.lo[static_cast<size_t>(i)], y1 = ty.hi[static_cast<size_t>(i)];
                const T wy = static_cast<T>(ty.w_hi[static_cast<size_t>(i)]);
                for (int64_t j = 0; j < ow; ++j) {
                    const int64_t x0 = tx.lo[static_cast<size_t>(j)],
                                  x1 = tx.hi[static_cast<size_t>(j)];
                    const T wx = static_cast<T>(tx.w_hi[static_cast<size_t>(j)]);
                    const T top = x.at(n, c, y0, x0) * (T(1) - wx) + x.at(n, c, y0, x1) * wx;
                    const T bot = x.at(n, c, y1, x0) * (T(1) - wx) + x.at(n, c, y1, x1) * wx;
                    y.at(n, c, i, j) = top * (T(1) - wy) + bot * wy;
                }
            }
        }
    }
    return y;
}

// Scatter-adds the adjoint of resize_bilinear into dx (shape of the source).
template <typename T>
void resize_bilinear_backward(const Tensor<T>& dy, Tensor<T>& dx) {
    const Shape4 s = dx.shape();
    const int64_t oh = dy.shape().h, ow = dy.shape().w;
    if (s.h == oh && s.w == ow) {
        accumulate(dx, dy);
        return;
    }
    const AxisTaps ty = make_axis_taps(s.h, oh);
    const AxisTaps tx = make_axis_taps(s.w, ow);
    for (int64_t n = 0; n < s.n; ++n) {
        for (int64_t c = 0; c < s.c; ++c) {
            for (int64_t i = 0; i < oh; ++i) {
                const int64_t y0 = ty.lo[static_cast<size_t>(i)], y1 = ty.hi[static_cast<size_t>(i)];
                const T wy = static_cast<T>(ty.w_hi[static_cast<size_t>(i)]);
                for (int64_t j = 0; j < ow; ++j) {
                    const int64_t x0 = tx.lo[static_cast<size_t>(j)],
                                  x1 = tx.hi[static_cast<size_t>(j)];
                    const T wx = static_cast<T>(tx.w_hi[static_cast<size_t>(j)]);
                    const T g = dy.at(n, c, i, j);
                    dx.at(n, c, y0, x0) += g * (T(1) - wy) * (T(1) - wx);
                    dx.at(n, c, y0, x1) += g * (T(1) - wy) * wx;
                    dx.at(n, c, y1, x0) += g * wy * (T(1) - wx);
                    dx.at(n, c, y1, x1) += g * wy * wx;
                }
            }
        }
    }
}

// Nearest-neighbor resize for label maps (same center convention, round to
// nearest source pixel, ties toward the lower index via floor(src + 0.5)
// after the clamp-at-zero).
template <typename T>
Tensor<T> resize_nearest(const Tensor<T>& x, int64_t oh, int64_t ow) {
    require(oh >= 1 && ow >= 1, "resize: target extent must be >= 1");
    const Shape4 s = x.shape();
    if (s.h == oh && s.w == ow) return x;
    std::vector<int64_t> iy(static_cast<size_t>(oh)), ix(static_cast<size_t>(ow));
    const double sy = static_cast<double>(s.h) / oh, sx = static_cast<double>(s.w) / ow;
    for (int64_t i = 0; i < oh; ++i)
        iy[static_cast<size_t>(i)] =
            std::min<int64_t>(s.h - 1, static_cast<int64_t>(std::max(0.0, (i + 0.5) * sy - 0.5) + 0.5));
    for (int64_t j = 0; j < ow; ++j)
        ix[static_cast<size_t>(j)] =
            std::min<int64_t>(s.w - 1, static_cast<int64_t>(std::max(0.0, (j + 0.5) * sx - 0.5) + 0.5));
    Tensor<T> y(Shape4{s.n, s.c, oh, ow});
    for (int64_t n = 0; n < s.n; ++n)
        for (int64_t c = 0; c < s.c; ++c)
            for (int64_t i = 0; i < oh; ++i)
                for (int64_t j = 0; j < ow; ++j)
                    y.at(n, c, i, j) = x.at(n, c, iy[static_cast<size_t>(i)], ix[static_cast<size_t>(j)]);
    return y;
}

} // namespace kernels
} // namespace unext
