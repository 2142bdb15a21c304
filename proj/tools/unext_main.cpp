// Command-line front end: synth, train, eval, predict, gradcheck, pca-vis.
// Exit codes: 0 success, 1 usage or config error, 2 I/O error, 3 verification
// or runtime failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "unext/cli/run_config.hpp"
#include "unext/data/dataset.hpp"
#include "unext/data/synth.hpp"
#include "unext/io/image_io.hpp"
#include "unext/metrics/report.hpp"
#include "unext/model/network.hpp"
#include "unext/pca/pca.hpp"
#include "unext/train/checkpoint.hpp"
#include "unext/train/gradcheck.hpp"
#include "unext/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace unext;

namespace {

template <typename T>
Tensor<T> rgb_tensor(const ImageU8& img) {
    Tensor<T> out(Shape4{1, 3, img.h, img.w});
    for (int64_t c = 0; c < 3; ++c) {
        for (int64_t y = 0; y < img.h; ++y) {
            for (int64_t x = 0; x < img.w; ++x) {
                const uint8_t v = img.channels == 1 ? img.at(y, x, 0) : img.at(y, x, c);
                out.at(0, c, y, x) = static_cast<T>(v) / T(255);
            }
        }
    }
    return out;
}

template <typename T>
void write_prob_png(const std::string& path, const Tensor<T>& prob) {
    const Shape4 s = prob.shape();
    ImageU8 img;
    img.h = s.h;
    img.w = s.w;
    img.channels = 1;
    img.pix.resize(static_cast<size_t>(s.h) * static_cast<size_t>(s.w));
    for (int64_t i = 0; i < prob.size(); ++i) {
        const double p = std::min(1.0, std::max(0.0, static_cast<double>(prob[i])));
        img.pix[size_t(i)] = static_cast<uint8_t>(std::lround(p * 255.0));
    }
    write_png(path, img);
}

RunConfig config_from_checkpoint(const CheckpointMeta& meta, const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(meta.config_json);
    } catch (const nlohmann::json::exception&) {
        throw IoError("checkpoint " + path + " carries an unreadable config echo");
    }
    return parse_run_config(doc);
}

// Small all-trainable-path model for the double-precision gradient check;
// big enough that every stage keeps train-mode batch norm viable.
ModelConfig gradcheck_toy_config() {
    ModelConfig cfg;
    cfg.high_h = cfg.high_w = 64;
    cfg.low_h = cfg.low_w = 28;
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

int run_synth(const std::string& out, int64_t n, uint64_t seed, int64_t size) {
    SynthSpec spec;
    spec.n = n;
    spec.h = spec.w = size;
    spec.seed = seed;
    generate_synthetic(spec, out);

    nlohmann::ordered_json j;
    j["synth"] = {{"out", out}, {"n", n}, {"seed", seed}, {"size", size}};
    std::ofstream echo(fs::path(out) / "config.resolved.json", std::ios::trunc);
    echo << j.dump(2) << "\n";
    echo.flush();
    if (!echo) throw IoError("cannot write config.resolved.json under " + out);

    std::printf("wrote %lld image/mask pairs under %s\n", static_cast<long long>(n),
                out.c_str());
    return 0;
}

std::vector<Sample> load_root(const std::string& root) {
    std::vector<std::string> warnings;
    auto samples = load_dataset((fs::path(root) / "images").string(),
                                (fs::path(root) / "masks").string(), &warnings);
    for (const std::string& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    return samples;
}

template <typename T>
int run_train_typed(const RunConfig& rc, const std::vector<Sample>& samples,
                    const std::string& out, const std::string& resume) {
    DualEncoderUNet<T> model(rc.model, rc.train.seed);
    Trainer<T> trainer(model, rc.train);
    if (!resume.empty()) trainer.resume_from(resume);
    const auto rows = trainer.run(samples, out, resolved_config_json(rc).dump(2));
    if (rows.empty()) {
        std::printf("nothing to do: run already at its final step\n");
    } else {
        std::printf("trained %zu steps (last total loss %.6f); artifacts under %s\n",
                    rows.size(), rows.back().total, out.c_str());
    }
    return 0;
}

int run_train(const std::string& config_path, const std::string& data,
              const std::string& out, const std::string& resume) {
    RunConfig rc = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (!data.empty()) rc.data_root = data;
    if (rc.data_root.empty()) {
        throw ConfigError("no dataset root: pass --data or set data.root in the config");
    }
    rc.model.validate();
    rc.train.validate();
    write_resolved_config(out, rc);
    const auto samples = load_root(rc.data_root);
    if (rc.precision == "f64") return run_train_typed<double>(rc, samples, out, resume);
    return run_train_typed<float>(rc, samples, out, resume);
}

template <typename T>
void predict_dataset(const RunConfig& rc, const std::string& ckpt,
                     const std::vector<Sample>& samples, const std::string& pred_dir) {
    DualEncoderUNet<T> model(rc.model, 0);
    load_checkpoint<T>(ckpt, model.params(), nullptr);
    fs::create_directories(pred_dir);
    for (const Sample& s : samples) {
        const Tensor<T> rgb = rgb_tensor<T>(s.image);
        const Tensor<T> prob = model.predict(rgb);
        write_prob_png((fs::path(pred_dir) / (s.id + ".png")).string(), prob);
    }
}

void print_report(const MetricReport& report) {
    for (const std::string& w : report.warnings) {
        std::fprintf(stderr, "warning: %s\n", w.c_str());
    }
    std::printf("%s\n%s\n", metric_csv_header().c_str(), metric_csv_row(report.means).c_str());
}

int run_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& ckpt,
             const std::string& data, const std::string& out) {
    const bool dir_mode = !pred_dir.empty() || !gt_dir.empty();
    const bool ckpt_mode = !ckpt.empty() || !data.empty();
    if (dir_mode == ckpt_mode || (dir_mode && (pred_dir.empty() || gt_dir.empty())) ||
        (ckpt_mode && (ckpt.empty() || data.empty()))) {
        throw ConfigError("eval needs either --pred-dir with --gt-dir, or --checkpoint with --data");
    }

    if (dir_mode) {
        const MetricReport report = evaluate_dataset(pred_dir, gt_dir);
        write_metric_files(out, report);
        nlohmann::ordered_json j;
        j["eval"] = {{"pred_dir", pred_dir}, {"gt_dir", gt_dir}};
        std::ofstream echo(fs::path(out) / "config.resolved.json", std::ios::trunc);
        echo << j.dump(2) << "\n";
        echo.flush();
        if (!echo) throw IoError("cannot write config.resolved.json under " + out);
        print_report(report);
        return 0;
    }

    const CheckpointMeta meta = read_checkpoint_meta(ckpt);
    RunConfig rc = config_from_checkpoint(meta, ckpt);
    rc.data_root = data;
    write_resolved_config(out, rc);
    const auto samples = load_root(data);
    const std::string pdir = (fs::path(out) / "predictions").string();
    if (meta.scalar_width == 8) {
        predict_dataset<double>(rc, ckpt, samples, pdir);
    } else {
        predict_dataset<float>(rc, ckpt, samples, pdir);
    }
    const MetricReport report = evaluate_dataset(pdir, (fs::path(data) / "masks").string());
    write_metric_files(out, report);
    print_report(report);
    return 0;
}

template <typename T>
int run_predict_typed(const RunConfig& rc, const std::string& ckpt, const std::string& image,
                      const std::string& out) {
    DualEncoderUNet<T> model(rc.model, 0);
    load_checkpoint<T>(ckpt, model.params(), nullptr);
    const ImageU8 img = read_image(image);
    const Tensor<T> prob = model.predict(rgb_tensor<T>(img));
    write_prob_png(out, prob);
    std::printf("wrote %s (%lldx%lld)\n", out.c_str(), static_cast<long long>(img.h),
                static_cast<long long>(img.w));
    return 0;
}

int run_predict(const std::string& ckpt, const std::string& image, const std::string& out) {
    const CheckpointMeta meta = read_checkpoint_meta(ckpt);
    const RunConfig rc = config_from_checkpoint(meta, ckpt);
    if (meta.scalar_width == 8) return run_predict_typed<double>(rc, ckpt, image, out);
    return run_predict_typed<float>(rc, ckpt, image, out);
}

int run_gradcheck(const std::string& config_path, uint64_t seed, double delta, int64_t probes,
                  const std::string& corrupt_group) {
    const ModelConfig mc =
        config_path.empty() ? gradcheck_toy_config() : load_run_config(config_path).model;
    DualEncoderUNet<double> model(mc, seed);
    GradcheckOptions opt;
    opt.seed = seed;
    if (delta > 0) opt.delta = delta;
    if (probes > 0) opt.probes_per_tensor = probes;
    opt.corrupt_group = corrupt_group;
    const GradcheckReport report = gradcheck_model(model, opt);

    std::printf("%-10s %10s %8s %14s  %s\n", "group", "params", "probed", "max_rel_err",
                "status");
    for (const auto& g : report.groups) {
        std::printf("%-10s %10lld %8lld %14.3e  %s\n", g.name.c_str(),
                    static_cast<long long>(g.scalars), static_cast<long long>(g.checked),
                    g.max_rel_err, g.max_rel_err <= report.tol ? "ok" : "FAIL");
    }
    if (!report.pass) {
        for (const auto& g : report.groups) {
            if (g.max_rel_err > report.tol) {
                std::fprintf(stderr,
                             "gradient check failed for group '%s' (max rel err %.3e > %.0e)\n",
                             g.name.c_str(), g.max_rel_err, report.tol);
            }
        }
        return 3;
    }
    std::printf("all groups within %.0e\n", report.tol);
    return 0;
}

template <typename T>
int run_pca_typed(const RunConfig& rc, const std::string& ckpt, const std::string& image,
                  const std::string& out) {
    if (rc.model.aux_mode == AuxMode::kNone) {
        throw ConfigError("aux_mode=none has no auxiliary features to visualize");
    }
    DualEncoderUNet<T> model(rc.model, 0);
    load_checkpoint<T>(ckpt, model.params(), nullptr);

    const ImageU8 img = read_image(image);
    const Tensor<T> rgb = rgb_tensor<T>(img);
    Tensor<T> high = kernels::resize_bilinear(rgb, rc.model.high_h, rc.model.high_w);
    normalize_image_inplace(high);
    Tape<T> tape;
    const Var vh = tape.leaf(std::move(high));
    std::optional<Var> vl;
    if (rc.model.aux_mode == AuxMode::kDinov2Shape) {
        Tensor<T> low = kernels::resize_bilinear(rgb, rc.model.low_h, rc.model.low_w);
        normalize_image_inplace(low);
        vl = tape.leaf(std::move(low));
    }
    const auto fv = model.forward_detailed(tape, vh, vl, false);
    const Tensor<T>& aux = tape.value(*fv.aux);

    const PcaProjection<T> proj = pca_project(aux, 3);
    const Tensor<T> up =
        kernels::resize_nearest(proj.image, rgb.shape().h, rgb.shape().w);
    ImageU8 vis;
    vis.h = up.shape().h;
    vis.w = up.shape().w;
    vis.channels = 3;
    vis.pix.resize(static_cast<size_t>(vis.h) * static_cast<size_t>(vis.w) * 3);
    for (int64_t y = 0; y < vis.h; ++y) {
        for (int64_t x = 0; x < vis.w; ++x) {
            for (int64_t c = 0; c < 3; ++c) {
                const double v = static_cast<double>(up.at(0, c, y, x));
                vis.at(y, x, c) = static_cast<uint8_t>(std::lround(std::min(1.0, std::max(0.0, v)) * 255.0));
            }
        }
    }
    write_png(out, vis);
    std::printf("wrote %s (aux grid %lldx%lld; explained variance %.4f %.4f %.4f)\n",
                out.c_str(), static_cast<long long>(aux.shape().h),
                static_cast<long long>(aux.shape().w), proj.explained_ratio(0),
                proj.explained_ratio(1), proj.explained_ratio(2));
    return 0;
}

int run_pca_vis(const std::string& ckpt, const std::string& image, const std::string& out) {
    const CheckpointMeta meta = read_checkpoint_meta(ckpt);
    const RunConfig rc = config_from_checkpoint(meta, ckpt);
    if (meta.scalar_width == 8) return run_pca_typed<double>(rc, ckpt, image, out);
    return run_pca_typed<float>(rc, ckpt, image, out);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-resolution dual-encoder binary segmentation toolkit"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic shape dataset");
    std::string synth_out;
    int64_t synth_n = 8, synth_size = 64;
    uint64_t synth_seed = 42;
    synth->add_option("--out", synth_out, "Output dataset root")->required();
    synth->add_option("--n", synth_n, "Number of image/mask pairs");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--size", synth_size, "Square canvas side in pixels");

    auto* train = app.add_subcommand("train", "Train on an images/masks dataset");
    std::string train_config, train_data, train_out, train_resume;
    train->add_option("--config", train_config, "JSON run config (defaults when omitted)");
    train->add_option("--data", train_data, "Dataset root with images/ and masks/");
    train->add_option("--out", train_out, "Run output directory")->required();
    train->add_option("--resume", train_resume, "Checkpoint to continue from");

    auto* eval = app.add_subcommand("eval", "Score predictions against ground-truth masks");
    std::string eval_pred, eval_gt, eval_ckpt, eval_data, eval_out;
    eval->add_option("--pred-dir", eval_pred, "Directory of prediction PNGs");
    eval->add_option("--gt-dir", eval_gt, "Directory of ground-truth PNGs");
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint to predict with first");
    eval->add_option("--data", eval_data, "Dataset root for checkpoint mode");
    eval->add_option("--out", eval_out, "Report output directory")->required();

    auto* predict = app.add_subcommand("predict", "Predict a mask for one image");
    std::string pred_ckpt, pred_image, pred_out;
    predict->add_option("--checkpoint", pred_ckpt, "Trained checkpoint")->required();
    predict->add_option("--image", pred_image, "Input PNG or JPEG")->required();
    predict->add_option("--out", pred_out, "Output PNG path")->required();

    auto* gradcheck = app.add_subcommand(
        "gradcheck", "Compare backprop gradients with finite differences (float64)");
    std::string gc_config, gc_corrupt;
    uint64_t gc_seed = 7;
    double gc_delta = 0;
    int64_t gc_probes = 0;
    gradcheck->add_option("--config", gc_config,
                          "JSON run config; a built-in small trainable model when omitted");
    gradcheck->add_option("--seed", gc_seed, "Init and probe seed");
    gradcheck->add_option("--delta", gc_delta, "Finite-difference step");
    gradcheck->add_option("--probes", gc_probes, "Probes per tensor");
    gradcheck->add_option("--corrupt-group", gc_corrupt, "")->group("");

    auto* pca = app.add_subcommand("pca-vis",
                                   "Visualize auxiliary features as a top-3 component RGB map");
    std::string pca_ckpt, pca_image, pca_out;
    pca->add_option("--checkpoint", pca_ckpt, "Trained checkpoint")->required();
    pca->add_option("--image", pca_image, "Input PNG or JPEG")->required();
    pca->add_option("--out", pca_out, "Output PNG path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    }

    try {
        if (*synth) return run_synth(synth_out, synth_n, synth_seed, synth_size);
        if (*train) return run_train(train_config, train_data, train_out, train_resume);
        if (*eval) return run_eval(eval_pred, eval_gt, eval_ckpt, eval_data, eval_out);
        if (*predict) return run_predict(pred_ckpt, pred_image, pred_out);
        if (*gradcheck) return run_gradcheck(gc_config, gc_seed, gc_delta, gc_probes, gc_corrupt);
        if (*pca) return run_pca_vis(pca_ckpt, pca_image, pca_out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const ValueError& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return 1;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 2;
    } catch (const StateError& e) {
        std::fprintf(stderr, "runtime failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
