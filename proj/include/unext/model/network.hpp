#pragma once

// Full dual-encoder segmentation network: high-resolution detail branch and
// low-resolution semantic branch fused per stage, U-Net decoder with partial
// stage, single-channel logits at half the high input resolution.

#include <array>
#include <optional>
#include <string>

#include "unext/autodiff/ops.hpp"
#include "unext/autodiff/tape.hpp"
#include "unext/core/rng.hpp"
#include "unext/kernels/activations.hpp"
#include "unext/kernels/resize.hpp"
#include "unext/model/config.hpp"
#include "unext/model/decoder.hpp"
#include "unext/model/encoders.hpp"
#include "unext/model/glue.hpp"

namespace unext {

template <typename T>
struct ForwardVars {
    std::array<Var, 4> taps;
    std::optional<Var> aux;
    std::array<Var, 4> fused;
    Var logits;
};

struct PredictStats {
    int resizes = 0; // non-identity resize operations performed
};

template <typename T>
class DualEncoderUNet {
public:
    explicit DualEncoderUNet(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(mix_seed(seed, 0x5eedu));
        hier_.init(cfg_.hier, rng);
        if (cfg_.aux_mode == AuxMode::kDinov2Shape) {
            plain_.emplace();
            plain_->init(cfg_.plain, rng);
        } else if (cfg_.aux_mode == AuxMode::kConvStandIn) {
            aux_.emplace();
            aux_->init(cfg_.glue.aux_dim, rng);
        }
        glue_.init(cfg_.glue, cfg_.hier.stage_channels, cfg_.aux_mode != AuxMode::kNone, rng);
        decoder_.init(cfg_.glue.fused_channels, cfg_.decoder_channels, rng);

        hier_.reg(registry_, "hier");
        if (plain_) plain_->reg(registry_, "plain");
        if (aux_) aux_->reg(registry_, "aux");
        glue_.reg(registry_, "glue");
        decoder_.reg(registry_, "dec");
    }

    DualEncoderUNet(const DualEncoderUNet&) = delete;
    DualEncoderUNet& operator=(const DualEncoderUNet&) = delete;

    const ModelConfig& config() const { return cfg_; }
    ParamRegistry<T>& params() { return registry_; }
    const ParamRegistry<T>& params() const { return registry_; }

    ForwardVars<T> forward_detailed(Tape<T>& t, Var image_high, std::optional<Var> image_low,
                                    bool train) {
        const Shape4 hs = t.value(image_high).shape();
        require(hs.c == 3 && hs.h == cfg_.high_h && hs.w == cfg_.high_w,
                "high-res input " + hs.str() + " does not match configured " +
                    std::to_string(cfg_.high_h) + "x" + std::to_string(cfg_.high_w));
        ForwardVars<T> out;
        out.taps = hier_.apply(t, image_high);
        if (cfg_.aux_mode == AuxMode::kNone) {
            require(!image_low.has_value(),
                    "aux_mode=none takes no low-res input");
        } else {
            require(image_low.has_value(), "this configuration needs a low-res input");
            const Shape4 ls = t.value(*image_low).shape();
            require(ls.c == 3 && ls.h == cfg_.low_h && ls.w == cfg_.low_w,
                    "low-res input " + ls.str() + " does not match configured " +
                        std::to_string(cfg_.low_h) + "x" + std::to_string(cfg_.low_w));
            require(ls.n == hs.n, "branch batch sizes differ");
            out.aux = plain_ ? plain_->apply(t, *image_low) : aux_->apply(t, *image_low);
        }
        out.fused = glue_.apply(t, out.taps, out.aux);
        out.logits = decoder_.apply(t, out.fused, train);
        return out;
    }

    Var forward(Tape<T>& t, Var image_high, std::optional<Var> image_low, bool train) {
        return forward_detailed(t, image_high, image_low, train).logits;
    }

    // Inference on a raw RGB image (values in [0,1], any size): resize to the
    // configured resolutions, normalize, run the network in eval mode, and
    // return sigmoid probabilities resized back to the input size.
    Tensor<T> predict(const Tensor<T>& rgb, PredictStats* stats = nullptr) {
        const Shape4 s = rgb.shape();
        require(s.c == 3, "predict expects an RGB image, got " + s.str());
        PredictStats st;
        auto tracked_resize = [&st](const Tensor<T>& x, int64_t oh, int64_t ow) {
            if (x.shape().h != oh || x.shape().w != ow) ++st.resizes;
            return kernels::resize_bilinear(x, oh, ow);
        };

        Tensor<T> high = tracked_resize(rgb, cfg_.high_h, cfg_.high_w);
        normalize_image_inplace(high);
        Tape<T> tape;
        const Var vh = tape.leaf(std::move(high));
        std::optional<Var> vl;
        if (cfg_.aux_mode != AuxMode::kNone) {
            Tensor<T> low = tracked_resize(rgb, cfg_.low_h, cfg_.low_w);
            normalize_image_inplace(low);
            vl = tape.leaf(std::move(low));
        }
        const Var logits = forward(tape, vh, vl, false);
        Tensor<T> prob = sigmoid_map(tape.value(logits));
        prob = tracked_resize(prob, s.h, s.w);
        if (stats) *stats = st;
        return prob;
    }

private:
    static Tensor<T> sigmoid_map(const Tensor<T>& z) {
        Tensor<T> out(z.shape());
        for (int64_t i = 0; i < z.size(); ++i) {
            out[i] = static_cast<T>(kernels::sigmoid_scalar(static_cast<double>(z[i])));
        }
        return out;
    }

    ModelConfig cfg_;
    HierEncoder<T> hier_;
    std::optional<PlainEncoder<T>> plain_;
    std::optional<ConvStandInAux<T>> aux_;
    Glue<T> glue_;
    Decoder<T> decoder_;
    ParamRegistry<T> registry_;
};

} // namespace unext
