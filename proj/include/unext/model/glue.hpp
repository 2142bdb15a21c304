#pragma once

// Fusion of the auxiliary feature grid into every pyramid stage: align the
// auxiliary channels with a 1x1 convolution, resize bilinearly to the stage
// dims, concatenate (pyramid first), and compress to a fixed width. Without
// an auxiliary branch the compression convolution alone maps each stage to
// the fused width. All glue parameters are trainable.

#include <array>
#include <optional>
#include <string>

#include "unext/autodiff/ops.hpp"
#include "unext/autodiff/tape.hpp"
#include "unext/core/rng.hpp"
#include "unext/model/config.hpp"
#include "unext/nn/layers.hpp"

namespace unext {

template <typename T>
struct Glue {
    GlueConfig cfg;
    bool with_aux = true;
    std::array<Conv2dLayer<T>, 4> align;    // aux_dim -> c_i (aux mode only)
    std::array<Conv2dLayer<T>, 4> compress; // 2*c_i -> fused (or c_i -> fused)

    void init(const GlueConfig& c, const std::vector<int64_t>& stage_channels, bool aux,
              Rng& rng) {
        cfg = c;
        with_aux = aux;
        for (int i = 0; i < 4; ++i) {
            const int64_t ci = stage_channels[size_t(i)];
            if (with_aux) {
                align[size_t(i)].init(ci, c.aux_dim, 1, 1, 0, rng, true);
                compress[size_t(i)].init(c.fused_channels, 2 * ci, 1, 1, 0, rng, true);
            } else {
                compress[size_t(i)].init(c.fused_channels, ci, 1, 1, 0, rng, true);
            }
        }
    }

    void reg(ParamRegistry<T>& r, const std::string& prefix) {
        for (int i = 0; i < 4; ++i) {
            if (with_aux) align[size_t(i)].reg(r, prefix + ".align" + std::to_string(i + 1));
            compress[size_t(i)].reg(r, prefix + ".compress" + std::to_string(i + 1));
        }
    }

    std::array<Var, 4> apply(Tape<T>& t, const std::array<Var, 4>& pyramid,
                             std::optional<Var> aux) {
        require(with_aux == aux.has_value(),
                "glue configured " + std::string(with_aux ? "with" : "without") +
                    " an auxiliary branch but called the other way");
        std::array<Var, 4> out;
        for (int i = 0; i < 4; ++i) {
            Var fused_in = pyramid[size_t(i)];
            if (with_aux) {
                const Shape4 dims = t.value(pyramid[size_t(i)]).shape();
                Var a = align[size_t(i)].apply(t, *aux);
                a = ops::resize_bilinear(t, a, dims.h, dims.w);
                fused_in = ops::concat_channels(t, {pyramid[size_t(i)], a});
            }
            out[size_t(i)] = compress[size_t(i)].apply(t, fused_in);
        }
        return out;
    }
};

} // namespace unext
