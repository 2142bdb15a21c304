// Release gate: eleven end-to-end checks over the assembled system, each
// printing one PASS/FAIL line with its runtime against a pinned budget.

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "metric_oracle.hpp"
#include "test_util.hpp"
#include "unext/data/dataset.hpp"
#include "unext/data/synth.hpp"
#include "unext/loss/weighted_loss.hpp"
#include "unext/metrics/metrics.hpp"
#include "unext/model/network.hpp"
#include "unext/pca/pca.hpp"
#include "unext/train/gradcheck.hpp"
#include "unext/train/schedule.hpp"
#include "unext/train/trainer.hpp"

namespace fs = std::filesystem;
using testutil::TempDir;
using unext::AuxMode;
using unext::DualEncoderUNet;
using unext::MetricValues;
using unext::ModelConfig;
using unext::Rng;
using unext::Sample;
using unext::Shape4;
using unext::Tensor;
using unext::TrainConfig;
using unext::Trainer;
using unext::Var;

namespace {

class Stopwatch {
public:
    Stopwatch(const char* tag, const char* label, double limit_s)
        : tag_(tag), label_(label), limit_(limit_s), t0_(std::chrono::steady_clock::now()) {}

    ~Stopwatch() {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        EXPECT_LT(secs, limit_) << tag_ << " exceeded its runtime budget";
        const bool ok = !::testing::Test::HasFailure();
        std::printf("[%s] %s %s (%.2fs, limit %.0fs)\n", tag_, ok ? "PASS" : "FAIL", label_,
                    secs, limit_);
        std::fflush(stdout);
    }

private:
    const char* tag_;
    const char* label_;
    double limit_;
    std::chrono::steady_clock::time_point t0_;
};

ModelConfig toy_config(int64_t high, int64_t low) {
    ModelConfig cfg;
    cfg.high_h = cfg.high_w = high;
    cfg.low_h = cfg.low_w = low;
    cfg.hier.stage_channels = {2, 4, 6, 8};
    cfg.hier.blocks_per_stage = 1;
    cfg.hier.adapter_bottleneck = 2;
    cfg.plain.embed_dim = 4;
    cfg.plain.patch_size = 14;
    cfg.plain.depth = 1;
    cfg.glue.aux_dim = 4;
    cfg.glue.fused_channels = 4;
    cfg.decoder_channels = 4;
    return cfg;
}

std::vector<Sample> synth_samples(const std::string& dir, int64_t n, int64_t size,
                                  uint64_t seed) {
    unext::SynthSpec spec;
    spec.n = n;
    spec.h = spec.w = size;
    spec.seed = seed;
    unext::generate_synthetic(spec, dir);
    return unext::load_dataset(dir + "/images", dir + "/masks");
}

template <typename T>
Tensor<T> rgb_of(const Sample& s) {
    Tensor<T> rgb(Shape4{1, 3, s.h, s.w});
    for (int64_t c = 0; c < 3; ++c) {
        for (int64_t y = 0; y < s.h; ++y) {
            for (int64_t x = 0; x < s.w; ++x) {
                rgb.at(0, c, y, x) = static_cast<T>(s.image.at(y, x, c)) / T(255);
            }
        }
    }
    return rgb;
}

template <typename T>
double train_set_miou(DualEncoderUNet<T>& model, const std::vector<Sample>& samples) {
    double sum = 0;
    for (const Sample& s : samples) {
        const Tensor<T> prob = model.predict(rgb_of<T>(s));
        Tensor<T> gt(Shape4{1, 1, s.h, s.w});
        for (int64_t i = 0; i < s.h * s.w; ++i) gt[i] = static_cast<T>(s.mask[size_t(i)]);
        sum += unext::compute_metrics(prob, gt).miou;
    }
    return sum / static_cast<double>(samples.size());
}

Tensor<double> to_tensor(const oracle::Map& m) {
    Tensor<double> t({1, 1, m.h, m.w});
    std::copy(m.v.begin(), m.v.end(), t.data());
    return t;
}

MetricValues oracle_all(const oracle::Map& pred, const oracle::Map& gt) {
    MetricValues m;
    m.mae = oracle::mae(pred, gt);
    m.miou = oracle::miou(pred, gt);
    m.s_measure = oracle::s_measure(pred, gt);
    m.e_mean = oracle::e_measure_mean(pred, gt);
    m.e_adaptive = oracle::e_measure_adaptive(pred, gt);
    m.f_weighted = oracle::f_weighted(pred, gt);
    const oracle::FTriple f = oracle::f_measures(pred, gt);
    m.f_adaptive = f.adaptive;
    m.f_mean = f.mean;
    m.f_max = f.max;
    return m;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(Acceptance, C01LogitsAtHalfInputResolution) {
    Stopwatch sw("C01", "logit grid is exactly half the detail input on 352 and 1024", 10);
    for (const int64_t high : {int64_t{352}, int64_t{1024}}) {
        DualEncoderUNet<float> model(toy_config(high, 28), 1);
        unext::Tape<float> tape;
        const Var xh = tape.leaf(Tensor<float>(Shape4{1, 3, high, high}));
        const Var xl = tape.leaf(Tensor<float>(Shape4{1, 3, 28, 28}));
        const Var logits = model.forward(tape, xh, xl, false);
        const Shape4 got = tape.value(logits).shape();
        EXPECT_EQ(got.n, 1);
        EXPECT_EQ(got.c, 1);
        EXPECT_EQ(got.h, high / 2);
        EXPECT_EQ(got.w, high / 2);
    }
}

TEST(Acceptance, C02FusionWidthsForFullScaleShapes) {
    Stopwatch sw("C02", "fusion concat widths [288,576,1152,2304] compress to 128", 10);
    // Route one: pure shape arithmetic on the full-scale configuration.
    ModelConfig cfg; // defaults: stages {144,288,576,1152}, aux 1024, fused 128
    const unext::ShapeTrace trace = unext::trace_shapes(cfg);
    const std::array<int64_t, 4> want = {288, 576, 1152, 2304};
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(trace.concat_widths[size_t(i)], want[size_t(i)]) << "stage " << i;
        EXPECT_EQ(trace.fused[size_t(i)].c, 128) << "stage " << i;
    }

    // Route two: the fusion stage built at those widths, probed on live
    // tensors at small spatial extents.
    Rng rng(3);
    unext::Glue<float> glue;
    const std::vector<int64_t> stages = {144, 288, 576, 1152};
    glue.init(unext::GlueConfig{1024, 128}, stages, true, rng);
    unext::ParamRegistry<float> reg;
    glue.reg(reg, "glue");
    for (int i = 0; i < 4; ++i) {
        const std::string name = "glue.compress" + std::to_string(i + 1) + ".w";
        const Shape4 w = reg.find(name)->values.shape();
        EXPECT_EQ(w.n, 128) << name;
        EXPECT_EQ(w.c, want[size_t(i)]) << name;
    }

    unext::Tape<float> tape;
    std::array<Var, 4> pyramid = {
        tape.leaf(Tensor<float>(Shape4{1, 144, 8, 8}, 0.1f)),
        tape.leaf(Tensor<float>(Shape4{1, 288, 4, 4}, 0.1f)),
        tape.leaf(Tensor<float>(Shape4{1, 576, 2, 2}, 0.1f)),
        tape.leaf(Tensor<float>(Shape4{1, 1152, 1, 1}, 0.1f)),
    };
    const Var aux = tape.leaf(Tensor<float>(Shape4{1, 1024, 2, 2}, 0.1f));
    const std::array<Var, 4> fused = glue.apply(tape, pyramid, aux);
    for (int i = 0; i < 4; ++i) {
        const Shape4 f = tape.value(fused[size_t(i)]).shape();
        EXPECT_EQ(f.c, 128) << "stage " << i;
        EXPECT_EQ(f.h, tape.value(pyramid[size_t(i)]).shape().h) << "stage " << i;
    }
}

TEST(Acceptance, C03IndependentDetailAndContextResolutions) {
    Stopwatch sw("C03", "four detail/context resolution pairs run with correct shapes", 60);
    const std::array<std::pair<int64_t, int64_t>, 4> grid = {
        std::make_pair(int64_t{352}, int64_t{352}), std::make_pair(int64_t{1024}, int64_t{224}),
        std::make_pair(int64_t{1024}, int64_t{672}), std::make_pair(int64_t{1024}, int64_t{448})};
    for (const auto& [high, low] : grid) {
        ModelConfig cfg = toy_config(high, low);
        cfg.plain.patch_size = 16; // every grid entry divides by 16
        DualEncoderUNet<float> model(cfg, 1);
        unext::Tape<float> tape;
        const Var xh = tape.leaf(Tensor<float>(Shape4{1, 3, high, high}));
        const Var xl = tape.leaf(Tensor<float>(Shape4{1, 3, low, low}));
        const auto fv = model.forward_detailed(tape, xh, std::optional<Var>(xl), false);
        const Shape4 got = tape.value(fv.logits).shape();
        EXPECT_EQ(got.h, high / 2) << high << "/" << low;
        EXPECT_EQ(got.w, high / 2) << high << "/" << low;
        ASSERT_TRUE(fv.aux.has_value());
        EXPECT_EQ(tape.value(*fv.aux).shape().h, low / 16) << high << "/" << low;
        const std::array<int64_t, 4> strides = {4, 8, 16, 32};
        for (int i = 0; i < 4; ++i) {
            EXPECT_EQ(tape.value(fv.fused[size_t(i)]).shape().h, high / strides[size_t(i)])
                << high << "/" << low << " stage " << i;
        }
    }
}

TEST(Acceptance, C04BackboneStaysFrozenWhileHeadsLearn) {
    Stopwatch sw("C04", "50 steps leave frozen tensors bit-identical, >=95% heads changed", 120);
    TempDir dir("accept_freeze");
    const auto samples = synth_samples(dir.str() + "/ds", 4, 64, 5);

    DualEncoderUNet<float> model(toy_config(64, 28), 13);
    std::vector<std::vector<float>> init;
    for (const auto& [name, p] : model.params()) {
        init.emplace_back(p->values.data(), p->values.data() + p->values.size());
    }

    TrainConfig tc;
    tc.batch = 2;
    tc.epochs = 25; // 4 samples / batch 2 -> exactly 50 steps
    tc.seed = 2;
    Trainer<float> trainer(model, tc);
    const auto rows = trainer.run(samples, dir.str() + "/run", "{}");
    ASSERT_EQ(rows.size(), 50u);

    int64_t trainable_total = 0, trainable_changed = 0;
    size_t k = 0;
    for (const auto& [name, p] : model.params()) {
        const auto& before = init[k++];
        bool changed = false;
        for (int64_t i = 0; i < p->values.size(); ++i) {
            if (p->values[i] != before[static_cast<size_t>(i)]) changed = true;
        }
        if (!p->trainable && !p->buffer) {
            EXPECT_FALSE(changed) << "frozen tensor drifted: " << name;
        }
        if (p->trainable && !p->buffer) {
            ++trainable_total;
            if (changed) ++trainable_changed;
        }
    }
    ASSERT_GT(trainable_total, 0);
    EXPECT_GE(static_cast<double>(trainable_changed) / static_cast<double>(trainable_total),
              0.95);
}

TEST(Acceptance, C05BackpropMatchesFiniteDifferences) {
    Stopwatch sw("C05", "all trainable groups within 1e-4 of central differences (f64)", 300);
    DualEncoderUNet<double> model(toy_config(64, 28), 29);
    const unext::GradcheckReport report = unext::gradcheck_model(model);
    EXPECT_TRUE(report.pass);
    ASSERT_GE(report.groups.size(), 3u);
    for (const auto& g : report.groups) {
        EXPECT_LE(g.max_rel_err, 1e-4) << g.name;
        EXPECT_GT(g.checked, 0) << g.name;
    }
}

TEST(Acceptance, C06LossClosedForms) {
    Stopwatch sw("C06", "region term 16/17 on all-wrong 4x4, ln 2 at zero logits, unit weights",
                 1);
    unext::Tape<double> t1;
    Tensor<double> gt_ones(Shape4{1, 1, 4, 4}, 1.0);
    const Var z_wrong = t1.leaf(Tensor<double>(Shape4{1, 1, 4, 4}, -40.0));
    const auto lv1 = unext::loss::weighted_loss(t1, z_wrong, gt_ones);
    EXPECT_NEAR(t1.value(lv1.wiou)[0], 16.0 / 17.0, 1e-9);

    unext::Tape<double> t2;
    Rng rng(17);
    Tensor<double> gt_mixed(Shape4{1, 1, 8, 8});
    for (int64_t i = 0; i < gt_mixed.size(); ++i) gt_mixed[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    const Var z_zero = t2.leaf(Tensor<double>(Shape4{1, 1, 8, 8}, 0.0));
    const auto lv2 = unext::loss::weighted_loss(t2, z_zero, gt_mixed);
    EXPECT_NEAR(t2.value(lv2.wbce)[0], std::log(2.0), 1e-9);

    const Tensor<double> w = unext::loss::pixel_weights(gt_ones);
    for (int64_t i = 0; i < w.size(); ++i) EXPECT_EQ(w[i], 1.0);
    const Tensor<double> w0 = unext::loss::pixel_weights(Tensor<double>(Shape4{1, 1, 4, 4}, 0.0));
    for (int64_t i = 0; i < w0.size(); ++i) EXPECT_EQ(w0[i], 1.0);
}

TEST(Acceptance, C07MetricsAgreeWithTranscriptionOracle) {
    Stopwatch sw("C07", "nine metrics within 1e-6 of the oracle on 50 pairs, fixed points hold",
                 30);
    for (uint64_t k = 0; k < 50; ++k) {
        oracle::Map pred, gt;
        oracle::lcg_pair(1000 + k, 16, 16, pred, gt);
        const MetricValues prod = unext::compute_metrics(to_tensor(pred), to_tensor(gt));
        const MetricValues ref = oracle_all(pred, gt);
        EXPECT_NEAR(prod.mae, ref.mae, 1e-6) << "seed " << 1000 + k;
        EXPECT_NEAR(prod.miou, ref.miou, 1e-6) << "seed " << 1000 + k;
        EXPECT_NEAR(prod.s_measure, ref.s_measure, 1e-6) << "seed " << 1000 + k;
        EXPECT_NEAR(prod.e_mean, ref.e_mean, 1e-6) << "seed " << 1000 + k;
        EXPECT_NEAR(prod.e_adaptive, ref.e_adaptive, 1e-6) << "seed " << 1000 + k;
        EXPECT_NEAR(prod.f_weighted, ref.f_weighted, 1e-6) << "seed " << 1000 + k;
        EXPECT_NEAR(prod.f_adaptive, ref.f_adaptive, 1e-6) << "seed " << 1000 + k;
        EXPECT_NEAR(prod.f_mean, ref.f_mean, 1e-6) << "seed " << 1000 + k;
        EXPECT_NEAR(prod.f_max, ref.f_max, 1e-6) << "seed " << 1000 + k;
    }

    oracle::Map pred, gt;
    oracle::lcg_pair(1000, 16, 16, pred, gt);
    const Tensor<double> g = to_tensor(gt);
    const MetricValues m = unext::compute_metrics(g, g);
    EXPECT_EQ(m.mae, 0.0);
    EXPECT_EQ(m.miou, 1.0);
    EXPECT_NEAR(m.s_measure, 1.0, 1e-12);
    EXPECT_NEAR(m.f_weighted, 1.0, 1e-12);
    EXPECT_NEAR(m.e_adaptive, 1.0, 1e-12);
    EXPECT_NEAR(m.f_adaptive, 1.0, 1e-12);
    EXPECT_NEAR(m.f_max, 1.0, 1e-12);
    EXPECT_NEAR(m.e_mean, 1.0, 1.0 / 256.0);
    EXPECT_GE(m.f_max, m.f_mean);
    EXPECT_GE(m.f_max, m.f_adaptive);
}

TEST(Acceptance, C08CosineScheduleEndpoints) {
    Stopwatch sw("C08", "schedule hits 2e-4, 1e-4, and 0 at start, middle, end", 1);
    EXPECT_EQ(unext::cosine_lr(0, 1000, 2e-4), 2e-4);
    EXPECT_NEAR(unext::cosine_lr(500, 1000, 2e-4), 1e-4, 1e-12);
    EXPECT_EQ(unext::cosine_lr(1000, 1000, 2e-4), 0.0);
}

TEST(Acceptance, C09OverfitsEightSyntheticImages) {
    Stopwatch sw("C09", "300 steps overfit: mIoU >= 0.95 with context branch, >= 0.90 without",
                 600);
    TempDir dir("accept_overfit");
    const auto samples = synth_samples(dir.str() + "/ds", 8, 64, 42);

    ModelConfig cfg;
    cfg.high_h = cfg.high_w = 128;
    cfg.low_h = cfg.low_w = 28;
    cfg.hier.stage_channels = {4, 8, 16, 32};
    cfg.hier.blocks_per_stage = 1;
    cfg.hier.adapter_bottleneck = 4;
    cfg.plain.embed_dim = 8;
    cfg.plain.patch_size = 14;
    cfg.plain.depth = 1;
    cfg.glue.aux_dim = 8;
    cfg.glue.fused_channels = 8;
    cfg.decoder_channels = 8;

    TrainConfig tc;
    tc.lr0 = 5e-3;
    tc.batch = 8;
    tc.epochs = 300; // batch == dataset, one step per epoch
    tc.seed = 7;

    {
        DualEncoderUNet<float> model(cfg, 7);
        Trainer<float> trainer(model, tc);
        const auto rows = trainer.run(samples, dir.str() + "/run_aux", "{}");
        ASSERT_EQ(rows.size(), 300u);
        EXPECT_GE(train_set_miou(model, samples), 0.95);
    }
    {
        ModelConfig plain_cfg = cfg;
        plain_cfg.aux_mode = AuxMode::kNone;
        DualEncoderUNet<float> model(plain_cfg, 7);
        Trainer<float> trainer(model, tc);
        const auto rows = trainer.run(samples, dir.str() + "/run_noaux", "{}");
        ASSERT_EQ(rows.size(), 300u);
        EXPECT_GE(train_set_miou(model, samples), 0.90);
    }
}

TEST(Acceptance, C10TrainingIsBitwiseDeterministic) {
    Stopwatch sw("C10", "same seed twice gives byte-identical float64 loss logs", 600);
    TempDir dir("accept_determinism");
    const auto samples = synth_samples(dir.str() + "/ds", 3, 64, 9);

    TrainConfig tc;
    tc.epochs = 2;
    tc.seed = 11;
    for (const char* run : {"a", "b"}) {
        DualEncoderUNet<double> model(toy_config(64, 28), 11);
        Trainer<double> trainer(model, tc);
        const auto rows = trainer.run(samples, dir.str() + "/" + run, "{}");
        ASSERT_EQ(rows.size(), 6u);
    }
    const std::string log_a = slurp(fs::path(dir.str()) / "a/train_log.csv");
    const std::string log_b = slurp(fs::path(dir.str()) / "b/train_log.csv");
    ASSERT_FALSE(log_a.empty());
    EXPECT_EQ(log_a, log_b);
}

TEST(Acceptance, C11ComponentProjectionMatchesDenseSolver) {
    Stopwatch sw("C11", "rank-1 variance >= 99.9%, eigenvalues within 1e-5 of dense solver", 5);
    // Rank-1 input: every channel is a scalar multiple of one spatial field.
    const int64_t c = 8, h = 16, w = 16;
    Tensor<double> rank1(Shape4{1, c, h, w});
    Rng rng(33);
    std::vector<double> u(static_cast<size_t>(c));
    for (auto& v : u) v = rng.uniform(-1.0, 1.0);
    std::vector<double> field(static_cast<size_t>(h * w));
    for (auto& v : field) v = rng.uniform(-2.0, 2.0);
    for (int64_t ch = 0; ch < c; ++ch) {
        for (int64_t i = 0; i < h * w; ++i) {
            rank1[ch * h * w + i] = u[size_t(ch)] * field[size_t(i)];
        }
    }
    const auto r1 = unext::pca_project(rank1, 3);
    EXPECT_GE(r1.explained_ratio(0), 0.999);

    // Full-rank input: all eight eigenvalues against an independent dense
    // eigensolver on the same 1/N channel covariance.
    Tensor<double> aux(Shape4{1, c, 12, 12});
    for (int64_t i = 0; i < aux.size(); ++i) aux[i] = rng.uniform(-1.0, 1.0);
    const auto proj = unext::pca_project(aux, static_cast<int>(c));
    ASSERT_EQ(proj.eigenvalues.size(), static_cast<size_t>(c));

    const int64_t npix = 12 * 12;
    Eigen::MatrixXd data(npix, c);
    for (int64_t ch = 0; ch < c; ++ch) {
        for (int64_t i = 0; i < npix; ++i) data(i, ch) = aux[ch * npix + i];
    }
    const Eigen::RowVectorXd mean = data.colwise().mean();
    const Eigen::MatrixXd centered = data.rowwise() - mean;
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(npix);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    ASSERT_EQ(solver.info(), Eigen::Success);
    const Eigen::VectorXd ev = solver.eigenvalues(); // ascending
    for (int64_t j = 0; j < c; ++j) {
        EXPECT_NEAR(proj.eigenvalues[size_t(j)], ev(c - 1 - j), 1e-5) << "component " << j;
    }
}
