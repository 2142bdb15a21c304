#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>

#include "unext/core/tensor.hpp"

namespace unext {
namespace kernels {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;

inline int64_t conv_out_extent(int64_t in, int64_t k, int64_t stride, int64_t pad) {
    require(in + 2 * pad >= k, "conv2d: kernel " + std::to_string(k) +
                                   " exceeds padded input " + std::to_string(in + 2 * pad));
    return (in + 2 * pad - k) / stride + 1;
}

// Column tile budget: bounds the K x P_tile scratch matrix so a full-image
// im2col is never materialized for large activations.
inline constexpr int64_t kColTileElems = int64_t(1) << 23;

// Fills col (K x tile) for output positions [p0, p0 + tile) of image n.
// K = c_in * kh * kw, output position p = oy * ow + ox.
template <typename T>
void im2col_tile(const Tensor<T>& x, int64_t n, int64_t kh, int64_t kw, int64_t stride,
                 int64_t pad, int64_t ow, int64_t p0, int64_t tile, T* col) {
    const int64_t c_in = x.shape().c, h = x.shape().h, w = x.shape().w;
    for (int64_t c = 0; c < c_in; ++c) {
        for (int64_t ky = 0; ky < kh; ++ky) {
            for (int64_t kx = 0; kx < kw; ++kx) {
                T* row = col + ((c * kh + ky) * kw + kx) * tile;
                for (int64_t t = 0; t < tile; ++t) {
                    const int64_t p = p0 + t;
                    const int64_t iy = (p / ow) * stride - pad + ky;
                    const int64_t ix = (p % ow) * stride - pad + kx;
                    row[t] = (iy >= 0 && iy < h && ix >= 0 && ix < w) ? x.at(n, c, iy, ix) : T(0);
                }
            }
        }
    }
}

// Transpose of im2col_tile: scatter-adds the column tile back into dx.
template <typename T>
void col2im_tile(const T* col, int64_t n, int64_t kh, int64_t kw, int64_t stride, int64_t pad,
                 int64_t ow, int64_t p0, int64_t tile, Tensor<T>& dx) {
    const int64_t c_in = dx.shape().c, h = dx.shape().h, w = dx.shape().w;
    for (int64_t c = 0; c < c_in; ++c) {
        for (int64_t ky = 0; ky < kh; ++ky) {
            for (int64_t kx = 0; kx < kw; ++kx) {
                const T* row = col + ((c * kh + ky) * kw + kx) * tile;
                for (int64_t t = 0; t < tile; ++t) {
                    const int64_t p = p0 + t;
                    const int64_t iy = (p / ow) * stride - pad + ky;
                    const int64_t ix = (p % ow) * stride - pad + kx;
                    if (iy >= 0 && iy < h && ix >= 0 && ix < w) dx.at(n, c, iy, ix) += row[t];
                }
            }
        }
    }
}

template <typename T>
void check_conv_args(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b, int64_t stride,
                     int64_t pad) {
    require(stride >= 1, "conv2d: stride must be >= 1");
    require(pad >= 0, "conv2d: pad must be >= 0");
    require(x.shape().c == w.shape().c,
            "conv2d: input channels " + x.shape().str() + " vs weight " + w.shape().str());
    if (b) {
        require_shape(b->shape(), Shape4{1, w.shape().n, 1, 1}, "conv2d bias");
    }
}

// Cross-correlation with zero padding. x: (n, c_in, h, w), w: (c_out, c_in,
// kh, kw), b: (1, c_out, 1, 1) or null. Output (n, c_out, oh, ow).
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b,
                         int64_t stride, int64_t pad) {
    check_conv_args(x, w, b, stride, pad);
    const int64_t n = x.shape().n, c_in = x.shape().c;
    const int64_t c_out = w.shape().n, kh = w.shape().h, kw = w.shape().w;
    const int64_t oh = conv_out_extent(x.shape().h, kh, stride, pad);
    const int64_t ow = conv_out_extent(x.shape().w, kw, stride, pad);
    const int64_t K = c_in * kh * kw, P = oh * ow;

    Tensor<T> y(Shape4{n, c_out, oh, ow});
    CMapRM<T> wm(w.data(), c_out, K);

    if (kh == 1 && kw == 1 && stride == 1 && pad == 0) {
        for (int64_t i = 0; i < n; ++i) {
            CMapRM<T> xm(x.data() + i * c_in * P, c_in, P);
            MapRM<T> ym(y.data() + i * c_out * P, c_out, P);
            ym.noalias() = wm * xm;
        }
    } else {
        const int64_t tile_max = std::max<int64_t>(1, kColTileElems / K);
        std::vector<T> col(static_cast<size_t>(K * std::min(P, tile_max)));
        for (int64_t i = 0; i < n; ++i) {
            for (int64_t p0 = 0; p0 < P; p0 += tile_max) {
                const int64_t tile = std::min(tile_max, P - p0);
                im2col_tile(x, i, kh, kw, stride, pad, ow, p0, tile, col.data());
                CMapRM<T> cm(col.data(), K, tile);
                for (int64_t co = 0; co < c_out; ++co) {
                    MapRM<T> ym(y.data() + (i * c_out + co) * P + p0, 1, tile);
                    ym.noalias() = wm.row(co) * cm;
                }
            }
        }
    }

    if (b) {
        for (int64_t i = 0; i < n; ++i) {
            for (int64_t co = 0; co < c_out; ++co) {
                T* row = y.data() + (i * c_out + co) * P;
                const T bias = b->data()[co];
                for (int64_t p = 0; p < P; ++p) row[p] += bias;
            }
        }
    }
    return y;
}

// Accumulates input/weight/bias gradients (any of dx, dw, db may be null).
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>* dx,
                     Tensor<T>* dw, Tensor<T>* db, int64_t stride, int64_t pad) {
    check_conv_args(x, w, static_cast<const Tensor<T>*>(nullptr), stride, pad);
    const int64_t n = x.shape().n, c_in = x.shape().c;
    const int64_t c_out = w.shape().n, kh = w.shape().h, kw = w.shape().w;
    const int64_t oh = dy.shape().h, ow = dy.shape().w;
    require_shape(dy.shape(),
                  Shape4{n, c_out, conv_out_extent(x.shape().h, kh, stride, pad),
                         conv_out_extent(x.shape().w, kw, stride, pad)},
                  "conv2d backward dy");
    const int64_t K = c_in * kh * kw, P = oh * ow;

    if (db) {
        for (int64_t i = 0; i < n; ++i) {
            for (int64_t co = 0; co < c_out; ++co) {
                const T* row = dy.data() + (i * c_out + co) * P;
                T acc = 0;
                for (int64_t p = 0; p < P; ++p) acc += row[p];
                db->data()[co] += acc;
            }
        }
    }

    CMapRM<T> wm(w.data(), c_out, K);

    if (kh == 1 && kw == 1 && stride == 1 && pad == 0) {
        for (int64_t i = 0; i < n; ++i) {
            CMapRM<T> xm(x.data() + i * c_in * P, c_in, P);
            CMapRM<T> gm(dy.data() + i * c_out * P, c_out, P);
            if (dw) {
                MapRM<T> dwm(dw->data(), c_out, K);
                dwm.noalias() += gm * xm.transpose();
            }
            if (dx) {
                MapRM<T> dxm(dx->data() + i * c_in * P, c_in, P);
                dxm.noalias() += wm.transpose() * gm;
            }
        }
        return;
    }

    const int64_t tile_max = std::max<int64_t>(1, kColTileElems / K);
    std::vector<T> col(static_cast<size_t>(K * std::min(P, tile_max)));
    std::vector<T> dcol(dx ? static_cast<size_t>(K * std::min(P, tile_max)) : size_t(0));
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t p0 = 0; p0 < P; p0 += tile_max) {
            const int64_t tile = std::min(tile_max, P - p0);
            if (dw) im2col_tile(x, i, kh, kw, stride, pad, ow, p0, tile, col.data());
            // dy rows for this tile are strided in memory; gather into a
            // dense tile so both GEMMs see contiguous operands.
            MatRM<T> gtile(c_out, tile);
            for (int64_t co = 0; co < c_out; ++co) {
                const T* src = dy.data() + (i * c_out + co) * P + p0;
                std::copy(src, src + tile, gtile.data() + co * tile);
            }
            if (dw) {
                CMapRM<T> cm(col.data(), K, tile);
                MapRM<T> dwm(dw->data(), c_out, K);
                dwm.noalias() += gtile * cm.transpose();
            }
            if (dx) {
                MapRM<T> dcm(dcol.data(), K, tile);
                dcm.noalias() = wm.transpose() * gtile;
                col2im_tile(dcol.data(), i, kh, kw, stride, pad, ow, p0, tile, *dx);
            }
        }
    }
}

} // namespace kernels
} // namespace unext
