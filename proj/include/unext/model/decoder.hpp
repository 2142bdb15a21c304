#pragma once

// U-Net-style decoder over the fused pyramid: one block per stage with skip
// concatenation, plus a partial stage (no concatenation) reaching stride 2,
// and a 1x1 head producing single-channel logits.

#include <array>
#include <string>

#include "unext/autodiff/ops.hpp"
#include "unext/autodiff/tape.hpp"
#include "unext/core/rng.hpp"
#include "unext/model/config.hpp"
#include "unext/nn/layers.hpp"

namespace unext {

// Two consecutive conv(3x3, pad 1, no bias) -> batch norm -> ReLU layers.
template <typename T>
struct DecoderBlock {
    Conv2dLayer<T> conv1, conv2;
    BnLayer<T> bn1, bn2;

    void init(int64_t c_in, int64_t c_out, Rng& rng) {
        conv1.init(c_out, c_in, 3, 1, 1, rng, true, false);
        bn1.init(c_out, true);
        conv2.init(c_out, c_out, 3, 1, 1, rng, true, false);
        bn2.init(c_out, true);
    }

    void reg(ParamRegistry<T>& r, const std::string& prefix) {
        conv1.reg(r, prefix + ".conv1");
        bn1.reg(r, prefix + ".bn1");
        conv2.reg(r, prefix + ".conv2");
        bn2.reg(r, prefix + ".bn2");
    }

    Var apply(Tape<T>& t, Var x, bool train) {
        Var h = ops::relu(t, bn1.apply(t, conv1.apply(t, x), train));
        return ops::relu(t, bn2.apply(t, conv2.apply(t, h), train));
    }
};

template <typename T>
struct Decoder {
    int64_t channels = 128;
    std::array<DecoderBlock<T>, 4> block; // [0]=stage1 ... [3]=stage4
    DecoderBlock<T> partial;
    Conv2dLayer<T> head;

    void init(int64_t fused_channels, int64_t decoder_channels, Rng& rng) {
        channels = decoder_channels;
        block[3].init(fused_channels, decoder_channels, rng);
        for (int i = 2; i >= 0; --i) {
            block[size_t(i)].init(decoder_channels + fused_channels, decoder_channels, rng);
        }
        partial.init(decoder_channels, decoder_channels, rng);
        head.init(1, decoder_channels, 1, 1, 0, rng, true);
    }

    void reg(ParamRegistry<T>& r, const std::string& prefix) {
        for (int i = 0; i < 4; ++i) {
            block[size_t(i)].reg(r, prefix + ".block" + std::to_string(i + 1));
        }
        partial.reg(r, prefix + ".partial");
        head.reg(r, prefix + ".head");
    }

    // fused: stage taps in stage order ([0] at stride 4 ... [3] at stride 32).
    Var apply(Tape<T>& t, const std::array<Var, 4>& fused, bool train) {
        Var d = block[3].apply(t, fused[3], train);
        for (int i = 2; i >= 0; --i) {
            Var up = ops::upsample2x(t, d);
            Var cat = ops::concat_channels(t, {up, fused[size_t(i)]});
            d = block[size_t(i)].apply(t, cat, train);
        }
        Var p = partial.apply(t, ops::upsample2x(t, d), train);
        return head.apply(t, p);
    }
};

} // namespace unext
