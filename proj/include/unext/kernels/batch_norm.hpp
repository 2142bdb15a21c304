#pragma once

#include <cmath>
#include <vector>

#include "unext/core/tensor.hpp"

namespace unext {
namespace kernels {

// Per-channel normalization over the (n, h, w) axes. Normalization uses the
// biased variance; the running-variance update uses the unbiased one.
// running <- (1 - momentum) * running + momentum * batch_stat.
template <typename T>
Tensor<T> bn_forward_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                           Tensor<T>& running_mean, Tensor<T>& running_var, T eps, T momentum,
                           std::vector<T>* saved_mean, std::vector<T>* saved_invstd) {
    const Shape4 s = x.shape();
    const int64_t C = s.c;
    const int64_t N = s.n * s.h * s.w;
    require(N > 1, "batch_norm: train mode needs more than one value per channel, got " + s.str());
    require_shape(gamma.shape(), Shape4{1, C, 1, 1}, "batch_norm gamma");
    require_shape(beta.shape(), Shape4{1, C, 1, 1}, "batch_norm beta");

    Tensor<T> y(s);
    if (saved_mean) saved_mean->assign(static_cast<size_t>(C), T(0));
    if (saved_invstd) saved_invstd->assign(static_cast<size_t>(C), T(0));
    const int64_t plane = s.h * s.w;
    for (int64_t c = 0; c < C; ++c) {
        T sum = 0, sq = 0;
        for (int64_t n = 0; n < s.n; ++n) {
            const T* p = x.data() + (n * C + c) * plane;
            for (int64_t i = 0; i < plane; ++i) {
                sum += p[i];
                sq += p[i] * p[i];
            }
        }
        const T mean = sum / static_cast<T>(N);
        T var = sq / static_cast<T>(N) - mean * mean;
        if (var < T(0)) var = T(0);
        const T invstd = T(1) / std::sqrt(var + eps);
        const T var_unbiased = var * static_cast<T>(N) / static_cast<T>(N - 1);
        running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * mean;
        running_var[c] = (T(1) - momentum) * running_var[c] + momentum * var_unbiased;
        if (saved_mean) (*saved_mean)[static_cast<size_t>(c)] = mean;
        if (saved_invstd) (*saved_invstd)[static_cast<size_t>(c)] = invstd;
        const T g = gamma[c], b = beta[c];
        for (int64_t n = 0; n < s.n; ++n) {
            const T* p = x.data() + (n * C + c) * plane;
            T* q = y.data() + (n * C + c) * plane;
            for (int64_t i = 0; i < plane; ++i) q[i] = g * ((p[i] - mean) * invstd) + b;
        }
    }
    return y;
}

template <typename T>
Tensor<T> bn_forward_eval(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          const Tensor<T>& running_mean, const Tensor<T>& running_var, T eps) {
    const Shape4 s = x.shape();
    const int64_t C = s.c, plane = s.h * s.w;
    require_shape(gamma.shape(), Shape4{1, C, 1, 1}, "batch_norm gamma");
    Tensor<T> y(s);
    for (int64_t c = 0; c < C; ++c) {
        const T invstd = T(1) / std::sqrt(running_var[c] + eps);
        const T g = gamma[c], b = beta[c], m = running_mean[c];
        for (int64_t n = 0; n < s.n; ++n) {
            const T* p = x.data() + (n * C + c) * plane;
            T* q = y.data() + (n * C + c) * plane;
            for (int64_t i = 0; i < plane; ++i) q[i] = g * ((p[i] - m) * invstd) + b;
        }
    }
    return y;
}

// Train-mode backward differentiates through the batch statistics.
template <typename T>
void bn_backward_train(const Tensor<T>& x, const Tensor<T>& gamma, const std::vector<T>& mean,
                       const std::vector<T>& invstd, const Tensor<T>& dy, Tensor<T>* dx,
                       Tensor<T>* dgamma, Tensor<T>* dbeta) {
    const Shape4 s = x.shape();
    const int64_t C = s.c, plane = s.h * s.w;
    const T N = static_cast<T>(s.n * plane);
    for (int64_t c = 0; c < C; ++c) {
        const T mu = mean[static_cast<size_t>(c)], is = invstd[static_cast<size_t>(c)];
        T sum_dy = 0, sum_dy_xhat = 0;
        for (int64_t n = 0; n < s.n; ++n) {
            const T* px = x.data() + (n * C + c) * plane;
            const T* pg = dy.data() + (n * C + c) * plane;
            for (int64_t i = 0; i < plane; ++i) {
                sum_dy += pg[i];
                sum_dy_xhat += pg[i] * (px[i] - mu) * is;
            }
        }
        if (dbeta) (*dbeta)[c] += sum_dy;
        if (dgamma) (*dgamma)[c] += sum_dy_xhat;
        if (dx) {
            const T g = gamma[c];
            const T mean_dy = sum_dy / N;
            const T mean_dy_xhat = sum_dy_xhat / N;
            for (int64_t n = 0; n < s.n; ++n) {
                const T* px = x.data() + (n * C + c) * plane;
                const T* pg = dy.data() + (n * C + c) * plane;
                T* pd = dx->data() + (n * C + c) * plane;
                for (int64_t i = 0; i < plane; ++i) {
                    const T xhat = (px[i] - mu) * is;
                    pd[i] += g * is * (pg[i] - mean_dy - xhat * mean_dy_xhat);
                }
            }
        }
    }
}

// Eval-mode backward treats the running statistics as constants.
template <typename T>
void bn_backward_eval(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& running_mean,
                      const Tensor<T>& running_var, T eps, const Tensor<T>& dy, Tensor<T>* dx,
                      Tensor<T>* dgamma, Tensor<T>* dbeta) {
    const Shape4 s = x.shape();
    const int64_t C = s.c, plane = s.h * s.w;
    for (int64_t c = 0; c < C; ++c) {
        const T is = T(1) / std::sqrt(running_var[c] + eps);
        const T mu = running_mean[c], g = gamma[c];
        for (int64_t n = 0; n < s.n; ++n) {
            const T* px = x.data() + (n * C + c) * plane;
            const T* pg = dy.data() + (n * C + c) * plane;
            for (int64_t i = 0; i < plane; ++i) {
                if (dbeta) (*dbeta)[c] += pg[i];
                if (dgamma) (*dgamma)[c] += pg[i] * (px[i] - mu) * is;
                if (dx) dx->data()[(n * C + c) * plane + i] += pg[i] * g * is;
            }
        }
    }
}

} // namespace kernels
} // namespace unext
