#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "unext/autodiff/tape.hpp"
#include "unext/kernels/activations.hpp"
#include "unext/kernels/batch_norm.hpp"
#include "unext/kernels/conv2d.hpp"
#include "unext/kernels/resize.hpp"

namespace unext {
namespace ops {

template <typename T>
Var conv2d(Tape<T>& t, Var x, Var w, std::optional<Var> b, int64_t stride, int64_t pad) {
    const Tensor<T>* bias = b ? &t.value(*b) : nullptr;
    Tensor<T> y = kernels::conv2d_forward(t.value(x), t.value(w), bias, stride, pad);
    std::vector<Var> parents{x, w};
    if (b) parents.push_back(*b);
    return t.emit(std::move(y), parents, [x, w, b, stride, pad](Tape<T>& tp, const Tensor<T>& dy) {
        Tensor<T>* dx = tp.requires_grad(x) ? &tp.grad_buffer(x) : nullptr;
        Tensor<T>* dw = tp.requires_grad(w) ? &tp.grad_buffer(w) : nullptr;
        Tensor<T>* db = (b && tp.requires_grad(*b)) ? &tp.grad_buffer(*b) : nullptr;
        if (!dx && !dw && !db) return;
        kernels::conv2d_backward(tp.value(x), tp.value(w), dy, dx, dw, db, stride, pad);
    });
}

// Train mode normalizes with batch statistics, updates the running buffers in
// place, and differentiates through the statistics. Eval mode treats the
// running statistics as constants.
template <typename T>
Var batch_norm(Tape<T>& t, Var x, Var gamma, Var beta, Parameter<T>& running_mean,
               Parameter<T>& running_var, bool train, T eps = T(1e-5), T momentum = T(0.1)) {
    if (train) {
        auto mean = std::make_shared<std::vector<T>>();
        auto invstd = std::make_shared<std::vector<T>>();
        Tensor<T> y = kernels::bn_forward_train(t.value(x), t.value(gamma), t.value(beta),
                                                running_mean.values, running_var.values, eps,
                                                momentum, mean.get(), invstd.get());
        return t.emit(std::move(y), {x, gamma, beta},
                      [x, gamma, beta, mean, invstd](Tape<T>& tp, const Tensor<T>& dy) {
                          Tensor<T>* dx = tp.requires_grad(x) ? &tp.grad_buffer(x) : nullptr;
                          Tensor<T>* dg = tp.requires_grad(gamma) ? &tp.grad_buffer(gamma) : nullptr;
                          Tensor<T>* db = tp.requires_grad(beta) ? &tp.grad_buffer(beta) : nullptr;
                          kernels::bn_backward_train(tp.value(x), tp.value(gamma), *mean, *invstd,
                                                     dy, dx, dg, db);
                      });
    }
    auto rm = std::make_shared<Tensor<T>>(running_mean.values);
    auto rv = std::make_shared<Tensor<T>>(running_var.values);
    Tensor<T> y =
        kernels::bn_forward_eval(t.value(x), t.value(gamma), t.value(beta), *rm, *rv, eps);
    return t.emit(std::move(y), {x, gamma, beta},
                  [x, gamma, beta, rm, rv, eps](Tape<T>& tp, const Tensor<T>& dy) {
                      Tensor<T>* dx = tp.requires_grad(x) ? &tp.grad_buffer(x) : nullptr;
                      Tensor<T>* dg = tp.requires_grad(gamma) ? &tp.grad_buffer(gamma) : nullptr;
                      Tensor<T>* db = tp.requires_grad(beta) ? &tp.grad_buffer(beta) : nullptr;
                      kernels::bn_backward_eval(tp.value(x), tp.value(gamma), *rm, *rv, eps, dy,
                                                dx, dg, db);
                  });
}

template <typename T>
Var relu(Tape<T>& t, Var x) {
    return t.emit(kernels::relu_forward(t.value(x)), {x}, [x](Tape<T>& tp, const Tensor<T>& dy) {
        if (tp.requires_grad(x)) kernels::relu_backward(tp.value(x), dy, tp.grad_buffer(x));
    });
}

template <typename T>
Var gelu(Tape<T>& t, Var x) {
    return t.emit(kernels::gelu_forward(t.value(x)), {x}, [x](Tape<T>& tp, const Tensor<T>& dy) {
        if (tp.requires_grad(x)) kernels::gelu_backward(tp.value(x), dy, tp.grad_buffer(x));
    });
}

template <typename T>
Var sigmoid(Tape<T>& t, Var x) {
    Tensor<T> y = kernels::sigmoid_forward(t.value(x));
    return t.emit(std::move(y), {x}, [x](Tape<T>& tp, const Tensor<T>& dy) {
        if (!tp.requires_grad(x)) return;
        const Tensor<T>& xv = tp.value(x);
        Tensor<T>& dx = tp.grad_buffer(x);
        for (int64_t i = 0; i < dy.size(); ++i) {
            const T s = kernels::sigmoid_scalar(xv[i]);
            dx[i] += dy[i] * s * (T(1) - s);
        }
    });
}

template <typename T>
Var add(Tape<T>& t, Var a, Var b) {
    const Tensor<T>& av = t.value(a);
    const Tensor<T>& bv = t.value(b);
    require_shape(bv.shape(), av.shape(), "add");
    Tensor<T> y(av.shape());
    for (int64_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
    return t.emit(std::move(y), {a, b}, [a, b](Tape<T>& tp, const Tensor<T>& dy) {
        if (tp.requires_grad(a)) accumulate(tp.grad_buffer(a), dy);
        if (tp.requires_grad(b)) accumulate(tp.grad_buffer(b), dy);
    });
}

// Elementwise product. One operand may be a scalar (numel 1), which
// broadcasts over the other.
template <typename T>
Var mul(Tape<T>& t, Var a, Var b) {
    const Tensor<T>& av = t.value(a);
    const Tensor<T>& bv = t.value(b);
    const bool a_scalar = av.shape().numel() == 1;
    const bool b_scalar = bv.shape().numel() == 1;
    require(a_scalar || b_scalar || av.shape() == bv.shape(),
            "mul: shapes " + av.shape().str() + " and " + bv.shape().str());
    const Shape4 out_shape = a_scalar ? bv.shape() : av.shape();
    Tensor<T> y(out_shape);
    for (int64_t i = 0; i < y.size(); ++i) {
        y[i] = (a_scalar ? av[0] : av[i]) * (b_scalar ? bv[0] : bv[i]);
    }
    return t.emit(std::move(y), {a, b},
                  [a, b, a_scalar, b_scalar](Tape<T>& tp, const Tensor<T>& dy) {
                      const Tensor<T>& av = tp.value(a);
                      const Tensor<T>& bv = tp.value(b);
                      if (tp.requires_grad(a)) {
                          Tensor<T>& da = tp.grad_buffer(a);
                          if (a_scalar) {
                              T acc = 0;
                              for (int64_t i = 0; i < dy.size(); ++i)
                                  acc += dy[i] * (b_scalar ? bv[0] : bv[i]);
                              da[0] += acc;
                          } else {
                              for (int64_t i = 0; i < dy.size(); ++i)
                                  da[i] += dy[i] * (b_scalar ? bv[0] : bv[i]);
                          }
                      }
                      if (tp.requires_grad(b)) {
                          Tensor<T>& db = tp.grad_buffer(b);
                          if (b_scalar) {
                              T acc = 0;
                              for (int64_t i = 0; i < dy.size(); ++i)
                                  acc += dy[i] * (a_scalar ? av[0] : av[i]);
                              db[0] += acc;
                          } else {
                              for (int64_t i = 0; i < dy.size(); ++i)
                                  db[i] += dy[i] * (a_scalar ? av[0] : av[i]);
                          }
                      }
                  });
}

template <typename T>
Var scale(Tape<T>& t, Var x, T c) {
    const Tensor<T>& xv = t.value(x);
    Tensor<T> y(xv.shape());
    for (int64_t i = 0; i < y.size(); ++i) y[i] = xv[i] * c;
    return t.emit(std::move(y), {x}, [x, c](Tape<T>& tp, const Tensor<T>& dy) {
        if (!tp.requires_grad(x)) return;
        Tensor<T>& dx = tp.grad_buffer(x);
        for (int64_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * c;
    });
}

template <typename T>
Var concat_channels(Tape<T>& t, const std::vector<Var>& xs) {
    require(!xs.empty(), "concat: empty input list");
    const Shape4 first = t.value(xs[0]).shape();
    int64_t c_total = 0;
    for (Var v : xs) {
        const Shape4 s = t.value(v).shape();
        require(s.n == first.n && s.h == first.h && s.w == first.w,
                "concat: spatial/batch mismatch " + s.str() + " vs " + first.str());
        c_total += s.c;
    }
    Tensor<T> y(Shape4{first.n, c_total, first.h, first.w});
    const int64_t plane = first.h * first.w;
    int64_t c_off = 0;
    for (Var v : xs) {
        const Tensor<T>& xv = t.value(v);
        for (int64_t n = 0; n < first.n; ++n) {
            std::copy(xv.data() + n * xv.shape().c * plane,
                      xv.data() + (n + 1) * xv.shape().c * plane,
                      y.data() + (n * c_total + c_off) * plane);
        }
        c_off += xv.shape().c;
    }
    std::vector<Var> parents = xs;
    return t.emit(std::move(y), parents, [parents, c_total, plane](Tape<T>& tp, const Tensor<T>& dy) {
        int64_t c_off = 0;
        const int64_t n_batch = dy.shape().n;
        for (Var v : parents) {
            const int64_t c = tp.value(v).shape().c;
            if (tp.requires_grad(v)) {
                Tensor<T>& dx = tp.grad_buffer(v);
                for (int64_t n = 0; n < n_batch; ++n) {
                    const T* src = dy.data() + (n * c_total + c_off) * plane;
                    T* dst = dx.data() + n * c * plane;
                    for (int64_t i = 0; i < c * plane; ++i) dst[i] += src[i];
                }
            }
            c_off += c;
        }
    });
}

template <typename T>
Var resize_bilinear(Tape<T>& t, Var x, int64_t oh, int64_t ow) {
    Tensor<T> y = kernels::resize_bilinear(t.value(x), oh, ow);
    return t.emit(std::move(y), {x}, [x](Tape<T>& tp, const Tensor<T>& dy) {
        if (tp.requires_grad(x)) kernels::resize_bilinear_backward(dy, tp.grad_buffer(x));
    });
}

template <typename T>
Var upsample2x(Tape<T>& t, Var x) {
    const Shape4 s = t.value(x).shape();
    return resize_bilinear(t, x, s.h * 2, s.w * 2);
}

// Reduces to a (1,1,1,1) scalar.
template <typename T>
Var sum(Tape<T>& t, Var x) {
    const Tensor<T>& xv = t.value(x);
    Tensor<T> y(Shape4{1, 1, 1, 1});
    T acc = 0;
    for (int64_t i = 0; i < xv.size(); ++i) acc += xv[i];
    y[0] = acc;
    return t.emit(std::move(y), {x}, [x](Tape<T>& tp, const Tensor<T>& dy) {
        if (!tp.requires_grad(x)) return;
        Tensor<T>& dx = tp.grad_buffer(x);
        for (int64_t i = 0; i < dx.size(); ++i) dx[i] += dy[0];
    });
}

template <typename T>
Var mean(Tape<T>& t, Var x) {
    const T inv = T(1) / static_cast<T>(t.value(x).size());
    return scale(t, sum(t, x), inv);
}

} // namespace ops
} // namespace unext
