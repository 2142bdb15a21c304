#pragma once

// The two encoder branches and the trainable convolutional auxiliary
// stand-in. Backbone weights are seeded stand-ins that keep every interface,
// shape, and freeze property of the real pretrained encoders; adapters are
// the only trainable parameters inside the hierarchical branch.

#include <array>
#include <string>
#include <vector>

#include "unext/autodiff/ops.hpp"
#include "unext/autodiff/tape.hpp"
#include "unext/core/rng.hpp"
#include "unext/model/config.hpp"
#include "unext/nn/layers.hpp"

namespace unext {

// Per-channel input normalization constants shared by both branches.
inline constexpr std::array<double, 3> kInputMean = {0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kInputStd = {0.229, 0.224, 0.225};

// Scales RGB in [0,1] to the fixed per-channel normalization both branches
// expect.
template <typename T>
void normalize_image_inplace(Tensor<T>& img) {
    const Shape4 s = img.shape();
    require(s.c == 3, "normalize_image expects 3 channels, got " + s.str());
    for (int64_t n = 0; n < s.n; ++n) {
        for (int64_t c = 0; c < 3; ++c) {
            const T mean = static_cast<T>(kInputMean[size_t(c)]);
            const T inv_std = static_cast<T>(1.0 / kInputStd[size_t(c)]);
            for (int64_t y = 0; y < s.h; ++y) {
                for (int64_t x = 0; x < s.w; ++x) {
                    img.at(n, c, y, x) = (img.at(n, c, y, x) - mean) * inv_std;
                }
            }
        }
    }
}

// Bottleneck MLP applied per spatial location: x + gelu(up(gelu(down(x)))).
// Down-projection seeded, up-projection zero, so the block is the identity
// at initialization.
template <typename T>
struct AdapterBlock {
    Conv2dLayer<T> down, up;

    void init(int64_t channels, int64_t bottleneck, Rng& rng) {
        down.init(bottleneck, channels, 1, 1, 0, rng, true);
        up.init(channels, bottleneck, 1, 1, 0, rng, true);
        up.w.values.fill(T(0));
    }

    void reg(ParamRegistry<T>& r, const std::string& prefix) {
        down.reg(r, prefix + ".down");
        up.reg(r, prefix + ".up");
    }

    Var apply(Tape<T>& t, Var x) {
        Var h = ops::gelu(t, down.apply(t, x));
        h = ops::gelu(t, up.apply(t, h));
        return ops::add(t, x, h);
    }
};

template <typename T>
struct HierEncoder {
    HierEncoderSpec spec;
    Conv2dLayer<T> stem;                            // 3 -> c1, k4 s4
    std::vector<std::vector<Conv2dLayer<T>>> block; // [stage][block] 3x3 residual conv
    std::vector<std::vector<AdapterBlock<T>>> adapter;
    std::vector<Conv2dLayer<T>> down;               // stage i -> i+1, k2 s2

    void init(const HierEncoderSpec& s, Rng& rng) {
        spec = s;
        const bool bb_train = !s.backbone_frozen;
        stem.init(s.stage_channels[0], 3, 4, 4, 0, rng, bb_train);
        block.resize(4);
        adapter.resize(4);
        for (int i = 0; i < 4; ++i) {
            const int64_t c = s.stage_channels[size_t(i)];
            block[size_t(i)].resize(static_cast<size_t>(s.blocks_per_stage));
            adapter[size_t(i)].resize(static_cast<size_t>(s.blocks_per_stage));
            for (int64_t m = 0; m < s.blocks_per_stage; ++m) {
                adapter[size_t(i)][size_t(m)].init(c, s.adapter_bottleneck, rng);
                block[size_t(i)][size_t(m)].init(c, c, 3, 1, 1, rng, bb_train, true, 0.5);
            }
        }
        down.resize(3);
        for (int i = 0; i < 3; ++i) {
            down[size_t(i)].init(s.stage_channels[size_t(i) + 1], s.stage_channels[size_t(i)], 2,
                                 2, 0, rng, bb_train);
        }
    }

    void reg(ParamRegistry<T>& r, const std::string& prefix) {
        stem.reg(r, prefix + ".stem");
        for (int i = 0; i < 4; ++i) {
            for (int64_t m = 0; m < spec.blocks_per_stage; ++m) {
                adapter[size_t(i)][size_t(m)].reg(
                    r, prefix + ".adapter" + std::to_string(i + 1) + "_" + std::to_string(m + 1));
                block[size_t(i)][size_t(m)].reg(
                    r, prefix + ".stage" + std::to_string(i + 1) + ".block" +
                           std::to_string(m + 1) + ".conv");
            }
        }
        for (int i = 0; i < 3; ++i) {
            down[size_t(i)].reg(r, prefix + ".down" + std::to_string(i + 1));
        }
    }

    // Returns the four stage taps at strides 4/8/16/32.
    std::array<Var, 4> apply(Tape<T>& t, Var x) {
        const Shape4 in = t.value(x).shape();
        require(in.c == 3, "hier encoder expects 3 input channels, got " + in.str());
        require(in.h % 32 == 0 && in.w % 32 == 0,
                "hier encoder input dims must be divisible by 32, got " + in.str());
        std::array<Var, 4> taps;
        Var h = stem.apply(t, x);
        for (int i = 0; i < 4; ++i) {
            for (int64_t m = 0; m < spec.blocks_per_stage; ++m) {
                h = adapter[size_t(i)][size_t(m)].apply(t, h);
                Var r = ops::gelu(t, block[size_t(i)][size_t(m)].apply(t, h));
                h = ops::add(t, h, r);
            }
            taps[size_t(i)] = h;
            if (i < 3) h = down[size_t(i)].apply(t, h);
        }
        return taps;
    }
};

template <typename T>
struct PlainEncoder {
    PlainEncoderSpec spec;
    Conv2dLayer<T> patch;                 // 3 -> embed, k = s = patch_size
    std::vector<Conv2dLayer<T>> fc1, fc2; // per-location MLP, hidden = embed

    void init(const PlainEncoderSpec& s, Rng& rng) {
        spec = s;
        patch.init(s.embed_dim, 3, s.patch_size, s.patch_size, 0, rng, false);
        fc1.resize(static_cast<size_t>(s.depth));
        fc2.resize(static_cast<size_t>(s.depth));
        for (int64_t k = 0; k < s.depth; ++k) {
            fc1[size_t(k)].init(s.embed_dim, s.embed_dim, 1, 1, 0, rng, false);
            fc2[size_t(k)].init(s.embed_dim, s.embed_dim, 1, 1, 0, rng, false, true, 0.5);
        }
    }

    void reg(ParamRegistry<T>& r, const std::string& prefix) {
        patch.reg(r, prefix + ".patch");
        for (int64_t k = 0; k < spec.depth; ++k) {
            fc1[size_t(k)].reg(r, prefix + ".block" + std::to_string(k + 1) + ".fc1");
            fc2[size_t(k)].reg(r, prefix + ".block" + std::to_string(k + 1) + ".fc2");
        }
    }

    Var apply(Tape<T>& t, Var x) {
        const Shape4 in = t.value(x).shape();
        require(in.c == 3, "plain encoder expects 3 input channels, got " + in.str());
        require(in.h % spec.patch_size == 0 && in.w % spec.patch_size == 0,
                "plain encoder input dims must be divisible by patch_size " +
                    std::to_string(spec.patch_size) + ", got " + in.str());
        Var h = patch.apply(t, x);
        for (int64_t k = 0; k < spec.depth; ++k) {
            Var m = ops::gelu(t, fc1[size_t(k)].apply(t, h));
            m = fc2[size_t(k)].apply(t, m);
            h = ops::add(t, h, m);
        }
        return h;
    }
};

// Trainable auxiliary encoder: four stride-2 3x3 conv + GELU layers ramping
// to aux_dim, overall ceil-stride 16.
template <typename T>
struct ConvStandInAux {
    std::array<Conv2dLayer<T>, 4> conv;

    void init(int64_t aux_dim, Rng& rng) {
        const std::array<int64_t, 4> widths = conv_stand_in_widths(aux_dim);
        int64_t c_in = 3;
        for (int i = 0; i < 4; ++i) {
            conv[size_t(i)].init(widths[size_t(i)], c_in, 3, 2, 1, rng, true);
            c_in = widths[size_t(i)];
        }
    }

    void reg(ParamRegistry<T>& r, const std::string& prefix) {
        for (int i = 0; i < 4; ++i) {
            conv[size_t(i)].reg(r, prefix + ".conv" + std::to_string(i + 1));
        }
    }

    Var apply(Tape<T>& t, Var x) {
        Var h = x;
        for (int i = 0; i < 4; ++i) h = ops::gelu(t, conv[size_t(i)].apply(t, h));
        return h;
    }
};

} // namespace unext
