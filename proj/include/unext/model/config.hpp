#pragma once

// Configuration types for the dual-encoder segmentation network, plus a
// pure-arithmetic shape trace that predicts every intermediate tensor shape
// without allocating tensors (used for fast structural checks and by the
// shape-only CLI paths).

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "unext/core/error.hpp"
#include "unext/core/shape.hpp"

namespace unext {

// Detail branch: stride-4 stem, four stages at strides 4/8/16/32, frozen
// residual blocks with trainable bottleneck adapters in front of each block.
struct HierEncoderSpec {
    std::vector<int64_t> stage_channels = {144, 288, 576, 1152};
    int64_t blocks_per_stage = 2;
    int64_t adapter_bottleneck = 32;
    bool backbone_frozen = true;

    static constexpr std::array<int64_t, 4> kStageStrides = {4, 8, 16, 32};

    static HierEncoderSpec hiera_l_shape() { return HierEncoderSpec{}; }
};

// Semantic branch: patchify projection plus frozen per-location MLP blocks,
// a single feature grid at the patch stride. Always frozen.
struct PlainEncoderSpec {
    int64_t embed_dim = 1024;
    int64_t patch_size = 14;
    int64_t depth = 2;

    static PlainEncoderSpec dinov2_l_shape() { return PlainEncoderSpec{}; }
};

struct GlueConfig {
    int64_t aux_dim = 1024;
    int64_t fused_channels = 128;
};

enum class AuxMode { kDinov2Shape, kConvStandIn, kNone };

inline std::string aux_mode_name(AuxMode m) {
    switch (m) {
        case AuxMode::kDinov2Shape: return "dinov2-shape";
        case AuxMode::kConvStandIn: return "conv-stand-in";
        case AuxMode::kNone: return "none";
    }
    return "?";
}

inline AuxMode aux_mode_from_name(const std::string& s) {
    if (s == "dinov2-shape") return AuxMode::kDinov2Shape;
    if (s == "conv-stand-in") return AuxMode::kConvStandIn;
    if (s == "none") return AuxMode::kNone;
    throw ConfigError("unknown aux_mode '" + s +
                      "' (expected dinov2-shape, conv-stand-in, or none)");
}

struct ModelConfig {
    int64_t high_h = 1024, high_w = 1024;
    int64_t low_h = 448, low_w = 448;
    HierEncoderSpec hier;
    PlainEncoderSpec plain;
    GlueConfig glue;
    int64_t decoder_channels = 128;
    AuxMode aux_mode = AuxMode::kDinov2Shape;

    void validate() const {
        require(hier.stage_channels.size() == 4, "hier.stage_channels must list 4 widths");
        for (int64_t c : hier.stage_channels) {
            require(c >= 1, "hier.stage_channels entries must be positive");
        }
        require(hier.blocks_per_stage >= 1, "hier.blocks_per_stage must be positive");
        require(hier.adapter_bottleneck >= 1, "hier.adapter_bottleneck must be positive");
        require(high_h >= 32 && high_w >= 32 && high_h % 32 == 0 && high_w % 32 == 0,
                "high_res dims must be positive multiples of 32, got " +
                    std::to_string(high_h) + "x" + std::to_string(high_w));
        if (aux_mode == AuxMode::kDinov2Shape) {
            require(plain.embed_dim >= 1 && plain.patch_size >= 1 && plain.depth >= 1,
                    "plain encoder dimensions must be positive");
            require(low_h >= plain.patch_size && low_w >= plain.patch_size &&
                        low_h % plain.patch_size == 0 && low_w % plain.patch_size == 0,
                    "low_res dims must be positive multiples of patch_size " +
                        std::to_string(plain.patch_size) + ", got " + std::to_string(low_h) +
                        "x" + std::to_string(low_w));
            require(glue.aux_dim == plain.embed_dim,
                    "glue.aux_dim must equal plain.embed_dim for aux_mode=dinov2-shape");
        }
        if (aux_mode == AuxMode::kConvStandIn) {
            require(low_h >= 16 && low_w >= 16, "low_res too small for the conv stand-in");
        }
        if (aux_mode != AuxMode::kNone) {
            require(glue.aux_dim >= 1, "glue.aux_dim must be positive");
        }
        require(glue.fused_channels >= 1, "glue.fused_channels must be positive");
        require(decoder_channels >= 1, "decoder_channels must be positive");
    }
};

// Widths of the trainable convolutional stand-in for the auxiliary branch:
// four stride-2 3x3 convolutions ramping up to aux_dim.
inline std::array<int64_t, 4> conv_stand_in_widths(int64_t aux_dim) {
    auto at_least = [](int64_t v, int64_t lo) { return v < lo ? lo : v; };
    return {at_least(aux_dim / 8, 4), at_least(aux_dim / 4, 4), at_least(aux_dim / 2, 4),
            aux_dim};
}

struct ShapeTrace {
    Shape4 input_high, input_low;
    Shape4 stem;
    std::array<Shape4, 4> taps;
    Shape4 aux;                          // zero-sized when aux_mode=none
    std::array<int64_t, 4> concat_widths; // pre-compression channel widths
    std::array<Shape4, 4> fused;
    std::array<Shape4, 4> decoder;       // d4..d1 in stage order [0]=d1 .. [3]=d4
    Shape4 partial;
    Shape4 logits;
};

inline ShapeTrace trace_shapes(const ModelConfig& cfg, int64_t n = 1) {
    cfg.validate();
    ShapeTrace t;
    t.input_high = {n, 3, cfg.high_h, cfg.high_w};
    t.input_low = {n, 3, cfg.low_h, cfg.low_w};
    t.stem = {n, cfg.hier.stage_channels[0], cfg.high_h / 4, cfg.high_w / 4};
    for (int i = 0; i < 4; ++i) {
        const int64_t s = HierEncoderSpec::kStageStrides[size_t(i)];
        t.taps[size_t(i)] = {n, cfg.hier.stage_channels[size_t(i)], cfg.high_h / s,
                             cfg.high_w / s};
    }
    switch (cfg.aux_mode) {
        case AuxMode::kDinov2Shape:
            t.aux = {n, cfg.plain.embed_dim, cfg.low_h / cfg.plain.patch_size,
                     cfg.low_w / cfg.plain.patch_size};
            break;
        case AuxMode::kConvStandIn: {
            int64_t h = cfg.low_h, w = cfg.low_w;
            for (int i = 0; i < 4; ++i) {
                h = (h + 1) / 2;
                w = (w + 1) / 2;
            }
            t.aux = {n, cfg.glue.aux_dim, h, w};
            break;
        }
        case AuxMode::kNone:
            t.aux = {0, 0, 0, 0};
            break;
    }
    for (int i = 0; i < 4; ++i) {
        const int64_t ci = cfg.hier.stage_channels[size_t(i)];
        t.concat_widths[size_t(i)] = cfg.aux_mode == AuxMode::kNone ? ci : 2 * ci;
        t.fused[size_t(i)] = {n, cfg.glue.fused_channels, t.taps[size_t(i)].h,
                              t.taps[size_t(i)].w};
    }
    for (int i = 3; i >= 0; --i) {
        t.decoder[size_t(i)] = {n, cfg.decoder_channels, t.taps[size_t(i)].h,
                                t.taps[size_t(i)].w};
    }
    t.partial = {n, cfg.decoder_channels, cfg.high_h / 2, cfg.high_w / 2};
    t.logits = {n, 1, cfg.high_h / 2, cfg.high_w / 2};
    return t;
}

} // namespace unext
