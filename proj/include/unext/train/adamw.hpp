#pragma once

// AdamW with decoupled weight decay. Decay multiplies the weights before the
// moment update (the same order torch.optim.AdamW uses) and is applied only
// to parameters flagged for decay; biases and norm parameters opt out via
// that flag. Frozen parameters and buffers are never touched.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "unext/core/error.hpp"
#include "unext/core/tensor.hpp"
#include "unext/nn/parameter.hpp"

namespace unext {

struct AdamWConfig {
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
class AdamW {
public:
    struct Slot {
        Tensor<T> m, v;
    };

    explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {
        require(cfg_.beta1 > 0 && cfg_.beta1 < 1 && cfg_.beta2 > 0 && cfg_.beta2 < 1,
                "adamw betas must lie in (0,1)");
        require(cfg_.eps > 0 && cfg_.weight_decay >= 0, "adamw eps/weight_decay invalid");
    }

    const AdamWConfig& config() const { return cfg_; }
    int64_t t() const { return t_; }
    void set_t(int64_t t) {
        require(t >= 0, "adamw step counter must be >= 0");
        t_ = t;
    }

    // name -> moment slot, populated lazily for trainable parameters.
    std::map<std::string, Slot>& slots() { return slots_; }
    const std::map<std::string, Slot>& slots() const { return slots_; }

    // One update over every trainable parameter whose gradient is populated.
    void step(const ParamRegistry<T>& registry, double lr) {
        require(lr >= 0, "adamw lr must be >= 0");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (const auto& [name, p] : registry) {
            if (!p->trainable || p->buffer || !p->grad.has_value()) continue;
            const Tensor<T>& g = *p->grad;
            if (!g.all_finite()) {
                throw StateError("non-finite gradient in parameter " + name);
            }
            Slot& slot = slots_[name];
            if (slot.m.size() == 0) {
                slot.m = Tensor<T>(p->values.shape(), T(0));
                slot.v = Tensor<T>(p->values.shape(), T(0));
            }
            require_shape(slot.m.shape(), p->values.shape(), ("adamw moment for " + name).c_str());
            Tensor<T>& w = p->values;
            if (p->decay && cfg_.weight_decay > 0) {
                const T keep = static_cast<T>(1.0 - lr * cfg_.weight_decay);
                for (int64_t i = 0; i < w.size(); ++i) w[i] *= keep;
            }
            const T b1 = static_cast<T>(cfg_.beta1);
            const T b2 = static_cast<T>(cfg_.beta2);
            for (int64_t i = 0; i < w.size(); ++i) {
                slot.m[i] = b1 * slot.m[i] + (T(1) - b1) * g[i];
                slot.v[i] = b2 * slot.v[i] + (T(1) - b2) * g[i] * g[i];
                const T mhat = slot.m[i] / static_cast<T>(bc1);
                const T vhat = slot.v[i] / static_cast<T>(bc2);
                w[i] -= static_cast<T>(lr) * mhat /
                        (static_cast<T>(std::sqrt(static_cast<double>(vhat))) +
                         static_cast<T>(cfg_.eps));
            }
        }
    }

private:
    AdamWConfig cfg_;
    int64_t t_ = 0;
    std::map<std::string, Slot> slots_;
};

} // namespace unext
