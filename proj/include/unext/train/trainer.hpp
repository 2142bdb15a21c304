#pragma once

// Training loop: per-epoch seeded shuffle, flip augmentation, forward,
// weighted loss, backward, AdamW with cosine decay. Writes one CSV log row
// per optimizer step and periodic + final checkpoints. Deterministic given
// (seed, dataset, config); resumable mid-run from any saved step.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "unext/autodiff/tape.hpp"
#include "unext/core/error.hpp"
#include "unext/core/rng.hpp"
#include "unext/data/dataset.hpp"
#include "unext/loss/weighted_loss.hpp"
#include "unext/model/network.hpp"
#include "unext/train/adamw.hpp"
#include "unext/train/checkpoint.hpp"
#include "unext/train/schedule.hpp"

namespace unext {

struct TrainConfig {
    double lr0 = 2e-4;
    int64_t epochs = 20;
    int64_t batch = 1;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    uint64_t seed = 0;
    int64_t checkpoint_every = 0; // 0 keeps only the final checkpoint

    void validate() const {
        require(lr0 > 0, "train.lr0 must be > 0");
        require(epochs >= 1, "train.epochs must be >= 1");
        require(batch >= 1, "train.batch must be >= 1");
        require(weight_decay >= 0, "train.weight_decay must be >= 0");
        require(checkpoint_every >= 0, "train.checkpoint_every must be >= 0");
        require(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1, "train betas must lie in (0,1)");
        require(eps > 0, "train.eps must be > 0");
    }
};

struct TrainLogRow {
    int64_t step = 0;  // 1-based count of completed optimizer steps
    int64_t epoch = 0; // 0-based epoch the step belongs to
    double lr = 0, wbce = 0, wiou = 0, total = 0;
};

inline std::string train_log_header() { return "step,epoch,lr,wbce,wiou,total"; }

inline std::string format_log_row(const TrainLogRow& r) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%lld,%lld,%.17g,%.17g,%.17g,%.17g",
                  static_cast<long long>(r.step), static_cast<long long>(r.epoch), r.lr, r.wbce,
                  r.wiou, r.total);
    return buf;
}

template <typename T>
class Trainer {
public:
    Trainer(DualEncoderUNet<T>& model, const TrainConfig& cfg)
        : model_(model), cfg_(cfg),
          opt_(AdamWConfig{cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.eps}) {
        cfg_.validate();
    }

    AdamW<T>& optimizer() { return opt_; }
    int64_t step() const { return step_; }

    CheckpointMeta resume_from(const std::string& ckpt_path) {
        const CheckpointMeta meta = load_checkpoint(ckpt_path, model_.params(), &opt_);
        step_ = meta.step;
        return meta;
    }

    // Runs from the current step to epochs x ceil(n/batch) steps, writing
    // train_log.csv and checkpoints into out_dir.
    std::vector<TrainLogRow> run(const std::vector<Sample>& data, const std::string& out_dir,
                                 const std::string& config_json) {
        namespace fs = std::filesystem;
        require(!data.empty(), "training dataset is empty");
        const int64_t n = static_cast<int64_t>(data.size());
        const int64_t steps_per_epoch = (n + cfg_.batch - 1) / cfg_.batch;
        const int64_t total = cfg_.epochs * steps_per_epoch;
        require(step_ <= total, "resume step " + std::to_string(step_) + " exceeds schedule of " +
                                    std::to_string(total) + " steps");
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        std::ofstream log(fs::path(out_dir) / "train_log.csv", std::ios::trunc);
        if (!log) throw IoError("cannot write training log under " + out_dir);
        log << train_log_header() << "\n";

        std::vector<TrainLogRow> rows;
        std::vector<int64_t> order(static_cast<size_t>(n));
        int64_t shuffled_epoch = -1;
        for (int64_t i = step_; i < total; ++i) {
            const int64_t epoch = i / steps_per_epoch;
            if (epoch != shuffled_epoch) {
                std::iota(order.begin(), order.end(), int64_t(0));
                Rng shuffle_rng(mix_seed(cfg_.seed, static_cast<uint64_t>(epoch)));
                shuffle_rng.shuffle(order);
                shuffled_epoch = epoch;
            }
            const int64_t pos = (i % steps_per_epoch) * cfg_.batch;
            const int64_t take = std::min<int64_t>(cfg_.batch, n - pos);

            Rng aug_rng(mix_seed(mix_seed(cfg_.seed, 0xA46u), static_cast<uint64_t>(i)));
            Tensor<T> high, low, gt;
            for (int64_t k = 0; k < take; ++k) {
                const Sample& s = data[static_cast<size_t>(order[static_cast<size_t>(pos + k)])];
                ModelInputs<T> in = to_model_inputs<T>(augment(s, aug_rng), model_.config());
                if (k == 0) {
                    Shape4 hs = in.image_high.shape(), ls = in.image_low.shape(),
                           gs = in.gt.shape();
                    hs.n = ls.n = gs.n = take;
                    high = Tensor<T>(hs);
                    low = Tensor<T>(ls);
                    gt = Tensor<T>(gs);
                }
                std::copy(in.image_high.data(), in.image_high.data() + in.image_high.size(),
                          high.data() + k * in.image_high.size());
                std::copy(in.image_low.data(), in.image_low.data() + in.image_low.size(),
                          low.data() + k * in.image_low.size());
                std::copy(in.gt.data(), in.gt.data() + in.gt.size(),
                          gt.data() + k * in.gt.size());
            }

            const double lr = cosine_lr(i, total, cfg_.lr0);
            for (auto& [name, p] : model_.params()) p->grad.reset();
            Tape<T> tape;
            const Var xh = tape.leaf(high);
            std::optional<Var> xl;
            if (model_.config().aux_mode != AuxMode::kNone) xl = tape.leaf(low);
            const Var logits = model_.forward(tape, xh, xl, true);
            const loss::LossVars<T> lv = loss::weighted_loss(tape, logits, gt);

            TrainLogRow row;
            row.step = i + 1;
            row.epoch = epoch;
            row.lr = lr;
            row.wbce = static_cast<double>(tape.value(lv.wbce)[0]);
            row.wiou = static_cast<double>(tape.value(lv.wiou)[0]);
            row.total = static_cast<double>(tape.value(lv.total)[0]);
            if (!std::isfinite(row.total)) {
                throw StateError("non-finite loss at step " + std::to_string(row.step) +
                                 " (wbce=" + std::to_string(row.wbce) +
                                 ", wiou=" + std::to_string(row.wiou) + ")");
            }
            tape.backward(lv.total);
            opt_.step(model_.params(), lr);
            step_ = i + 1;

            log << format_log_row(row) << "\n";
            rows.push_back(row);
            if (cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0 && step_ != total) {
                save_checkpoint(checkpoint_name(out_dir, step_), model_.params(), &opt_, step_,
                                config_json);
            }
        }
        log.flush();
        if (!log) throw IoError("short write on training log under " + out_dir);
        save_checkpoint((fs::path(out_dir) / "checkpoint_final.bin").string(), model_.params(),
                        &opt_, step_, config_json);
        return rows;
    }

    static std::string checkpoint_name(const std::string& out_dir, int64_t step) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "checkpoint_%06lld.bin", static_cast<long long>(step));
        return (std::filesystem::path(out_dir) / buf).string();
    }

private:
    DualEncoderUNet<T>& model_;
    TrainConfig cfg_;
    AdamW<T> opt_;
    int64_t step_ = 0;
};

} // namespace unext
