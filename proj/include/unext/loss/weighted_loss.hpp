#pragma once

#include <cmath>
#include <memory>

#include "unext/autodiff/ops.hpp"
#include "unext/autodiff/tape.hpp"
#include "unext/kernels/pool.hpp"

namespace unext {
namespace loss {

template <typename T>
void require_binary(const Tensor<T>& gt, const char* where) {
    for (int64_t i = 0; i < gt.size(); ++i) {
        if (gt[i] != T(0) && gt[i] != T(1)) {
            throw ValueError(std::string(where) + ": ground truth must be binary, found " +
                             std::to_string(static_cast<double>(gt[i])));
        }
    }
}

// Boundary-emphasis weights: 1 + 5 * |boxmean_31(gt) - gt|. Flat regions get
// weight 1, pixels whose 31x31 neighborhood disagrees with them up to 6.
template <typename T>
Tensor<T> pixel_weights(const Tensor<T>& gt) {
    require_binary(gt, "pixel_weights");
    Tensor<T> pooled = kernels::box_mean_same(gt, 31);
    Tensor<T> w(gt.shape());
    for (int64_t i = 0; i < gt.size(); ++i) {
        w[i] = T(1) + T(5) * std::abs(pooled[i] - gt[i]);
    }
    return w;
}

template <typename T>
inline T bce_with_logits_scalar(T z, T y) {
    // max(z,0) - z*y + log(1 + exp(-|z|)): stable for large |z|.
    const T zmax = z > T(0) ? z : T(0);
    return zmax - z * y + std::log1p(std::exp(-std::abs(z)));
}

// Per image: sum(w * bce) / sum(w); result is the mean over the batch.
template <typename T>
Var weighted_bce(Tape<T>& t, Var logits, const Tensor<T>& gt, const Tensor<T>& omega) {
    const Tensor<T>& z = t.value(logits);
    require_shape(gt.shape(), z.shape(), "weighted_bce gt");
    require_shape(omega.shape(), z.shape(), "weighted_bce weights");
    const int64_t n = z.shape().n, per = z.size() / std::max<int64_t>(n, 1);

    auto wsum = std::make_shared<std::vector<T>>(static_cast<size_t>(n), T(0));
    T total = 0;
    for (int64_t i = 0; i < n; ++i) {
        T num = 0, den = 0;
        for (int64_t p = 0; p < per; ++p) {
            const int64_t k = i * per + p;
            num += omega[k] * bce_with_logits_scalar(z[k], gt[k]);
            den += omega[k];
        }
        (*wsum)[static_cast<size_t>(i)] = den;
        total += num / den;
    }
    Tensor<T> out(Shape4{1, 1, 1, 1});
    out[0] = total / static_cast<T>(n);

    auto gt_c = std::make_shared<Tensor<T>>(gt);
    auto om_c = std::make_shared<Tensor<T>>(omega);
    return t.emit(std::move(out), {logits},
                  [logits, gt_c, om_c, wsum, n, per](Tape<T>& tp, const Tensor<T>& dy) {
                      if (!tp.requires_grad(logits)) return;
                      const Tensor<T>& z = tp.value(logits);
                      Tensor<T>& dz = tp.grad_buffer(logits);
                      const T g0 = dy[0];
                      for (int64_t i = 0; i < n; ++i) {
                          const T scale = g0 / ((*wsum)[static_cast<size_t>(i)] * static_cast<T>(n));
                          for (int64_t p = 0; p < per; ++p) {
                              const int64_t k = i * per + p;
                              dz[k] += scale * (*om_c)[k] *
                                       (kernels::sigmoid_scalar(z[k]) - (*gt_c)[k]);
                          }
                      }
                  });
}

// Per image: 1 - (sum(w*p*g) + 1) / (sum(w*(p + g - p*g)) + 1) with
// p = sigmoid(logits); result is the mean over the batch.
template <typename T>
Var weighted_iou(Tape<T>& t, Var logits, const Tensor<T>& gt, const Tensor<T>& omega) {
    const Tensor<T>& z = t.value(logits);
    require_shape(gt.shape(), z.shape(), "weighted_iou gt");
    require_shape(omega.shape(), z.shape(), "weighted_iou weights");
    const int64_t n = z.shape().n, per = z.size() / std::max<int64_t>(n, 1);

    auto inter = std::make_shared<std::vector<T>>(static_cast<size_t>(n), T(0));
    auto uni = std::make_shared<std::vector<T>>(static_cast<size_t>(n), T(0));
    T total = 0;
    for (int64_t i = 0; i < n; ++i) {
        T I = 0, U = 0;
        for (int64_t p = 0; p < per; ++p) {
            const int64_t k = i * per + p;
            const T pr = kernels::sigmoid_scalar(z[k]);
            const T g = gt[k];
            I += omega[k] * pr * g;
            U += omega[k] * (pr + g - pr * g);
        }
        (*inter)[static_cast<size_t>(i)] = I;
        (*uni)[static_cast<size_t>(i)] = U;
        total += T(1) - (I + T(1)) / (U + T(1));
    }
    Tensor<T> out(Shape4{1, 1, 1, 1});
    out[0] = total / static_cast<T>(n);

    auto gt_c = std::make_shared<Tensor<T>>(gt);
    auto om_c = std::make_shared<Tensor<T>>(omega);
    return t.emit(std::move(out), {logits},
                  [logits, gt_c, om_c, inter, uni, n, per](Tape<T>& tp, const Tensor<T>& dy) {
                      if (!tp.requires_grad(logits)) return;
                      const Tensor<T>& z = tp.value(logits);
                      Tensor<T>& dz = tp.grad_buffer(logits);
                      const T g0 = dy[0];
                      for (int64_t i = 0; i < n; ++i) {
                          const T I1 = (*inter)[static_cast<size_t>(i)] + T(1);
                          const T U1 = (*uni)[static_cast<size_t>(i)] + T(1);
                          for (int64_t p = 0; p < per; ++p) {
                              const int64_t k = i * per + p;
                              const T pr = kernels::sigmoid_scalar(z[k]);
                              const T g = (*gt_c)[k];
                              const T w = (*om_c)[k];
                              // d/dp of -(I+1)/(U+1): dI = w*g, dU = w*(1-g).
                              const T dL_dp = -(w * g * U1 - I1 * w * (T(1) - g)) / (U1 * U1);
                              dz[k] += g0 * dL_dp * pr * (T(1) - pr) / static_cast<T>(n);
                          }
                      }
                  });
}

template <typename T>
struct LossVars {
    Var total;
    Var wbce;
    Var wiou;
};

// Combined objective on half-resolution logits: upsample logits to the
// ground-truth resolution (pre-sigmoid), derive pixel weights from the mask,
// and sum the two weighted terms.
template <typename T>
LossVars<T> weighted_loss(Tape<T>& t, Var logits, const Tensor<T>& gt_full) {
    const Shape4 gs = gt_full.shape();
    Var z = ops::resize_bilinear(t, logits, gs.h, gs.w);
    require_shape(t.value(z).shape(), gs, "weighted_loss logits vs gt");
    Tensor<T> omega = pixel_weights(gt_full);
    LossVars<T> out;
    out.wbce = weighted_bce(t, z, gt_full, omega);
    out.wiou = weighted_iou(t, z, gt_full, omega);
    out.total = ops::add(t, out.wbce, out.wiou);
    return out;
}

} // namespace loss
} // namespace unext
