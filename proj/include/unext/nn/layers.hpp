#pragma once

// Parameterized layer wrappers: a convolution layer and a batch-norm layer
// owning their parameters, with registry hookup and tape-graph application.

#include <optional>
#include <string>

#include "unext/autodiff/ops.hpp"
#include "unext/autodiff/tape.hpp"
#include "unext/core/rng.hpp"
#include "unext/nn/init.hpp"
#include "unext/nn/parameter.hpp"

namespace unext {

template <typename T>
struct Conv2dLayer {
    Parameter<T> w, b;
    int64_t stride = 1, pad = 0;
    bool has_bias = true;

    void init(int64_t c_out, int64_t c_in, int64_t k, int64_t stride_, int64_t pad_, Rng& rng,
              bool trainable, bool bias = true, double gain = 1.0) {
        stride = stride_;
        pad = pad_;
        has_bias = bias;
        w.values = Tensor<T>({c_out, c_in, k, k});
        init::he_normal(w.values, rng, c_in * k * k, gain);
        w.trainable = trainable;
        w.decay = true;
        if (has_bias) {
            b.values = Tensor<T>({1, c_out, 1, 1});
            b.trainable = trainable;
            b.decay = false;
        }
    }

    void reg(ParamRegistry<T>& r, const std::string& prefix) {
        r.add(prefix + ".w", &w);
        if (has_bias) r.add(prefix + ".b", &b);
    }

    Var apply(Tape<T>& t, Var x) {
        const Var wv = t.param(w);
        std::optional<Var> bv;
        if (has_bias) bv = t.param(b);
        return ops::conv2d(t, x, wv, bv, stride, pad);
    }
};

template <typename T>
struct BnLayer {
    Parameter<T> gamma, beta, run_mean, run_var;

    void init(int64_t c, bool trainable) {
        gamma.values = Tensor<T>({1, c, 1, 1}, T(1));
        gamma.trainable = trainable;
        gamma.decay = false;
        beta.values = Tensor<T>({1, c, 1, 1});
        beta.trainable = trainable;
        beta.decay = false;
        run_mean.values = Tensor<T>({1, c, 1, 1});
        run_mean.trainable = false;
        run_mean.buffer = true;
        run_var.values = Tensor<T>({1, c, 1, 1}, T(1));
        run_var.trainable = false;
        run_var.buffer = true;
    }

    void reg(ParamRegistry<T>& r, const std::string& prefix) {
        r.add(prefix + ".gamma", &gamma);
        r.add(prefix + ".beta", &beta);
        r.add(prefix + ".running_mean", &run_mean);
        r.add(prefix + ".running_var", &run_var);
    }

    Var apply(Tape<T>& t, Var x, bool train) {
        return ops::batch_norm(t, x, t.param(gamma), t.param(beta), run_mean, run_var, train);
    }
};

} // namespace unext
