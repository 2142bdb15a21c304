#pragma once

#include <cmath>

#include "unext/core/tensor.hpp"

namespace unext {
namespace kernels {

template <typename T>
inline T sigmoid_scalar(T z) {
    // Branch keeps exp argument non-positive so large |z| cannot overflow.
    if (z >= T(0)) {
        const T e = std::exp(-z);
        return T(1) / (T(1) + e);
    }
    const T e = std::exp(z);
    return e / (T(1) + e);
}

// Exact (erf-based) GELU.
template <typename T>
inline T gelu_scalar(T x) {
    return x * T(0.5) * (T(1) + std::erf(x * T(0.7071067811865475244)));
}

template <typename T>
inline T gelu_grad_scalar(T x) {
    const T kInvSqrt2 = T(0.7071067811865475244);
    const T kInvSqrt2Pi = T(0.3989422804014326779);
    const T cdf = T(0.5) * (T(1) + std::erf(x * kInvSqrt2));
    const T pdf = kInvSqrt2Pi * std::exp(T(-0.5) * x * x);
    return cdf + x * pdf;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    return y;
}

// Accumulates dx. Gradient at exactly zero is zero.
template <typename T>
void relu_backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx) {
    for (int64_t i = 0; i < x.size(); ++i) dx[i] += x[i] > T(0) ? dy[i] : T(0);
}

template <typename T>
Tensor<T> gelu_forward(const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) y[i] = gelu_scalar(x[i]);
    return y;
}

template <typename T>
void gelu_backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx) {
    for (int64_t i = 0; i < x.size(); ++i) dx[i] += dy[i] * gelu_grad_scalar(x[i]);
}

template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) y[i] = sigmoid_scalar(x[i]);
    return y;
}

// Uses the saved output: d sigma = y (1 - y).
template <typename T>
void sigmoid_backward(const Tensor<T>& y, const Tensor<T>& dy, Tensor<T>& dx) {
    for (int64_t i = 0; i < y.size(); ++i) dx[i] += dy[i] * y[i] * (T(1) - y[i]);
}

} // namespace kernels
} // namespace unext
