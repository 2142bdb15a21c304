#pragma once

// Directory-level evaluation: pairs prediction and ground-truth masks by file
// stem, scores each pair independently (parallel across images, capped by the
// UNEXT_THREADS environment variable), and aggregates arithmetic means in
// lexicographic stem order regardless of completion order. Serializes to a
// one-row CSV (3 decimals) and a full-precision JSON report.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "unext/core/error.hpp"
#include "unext/core/tensor.hpp"
#include "unext/io/image_io.hpp"
#include "unext/metrics/metrics.hpp"

namespace unext {

struct ImageMetrics {
    std::string id;
    MetricValues values;
};

struct MetricReport {
    std::vector<ImageMetrics> images;
    MetricValues means;
    std::vector<std::string> warnings;
};

namespace report_detail {

namespace fs = std::filesystem;

inline std::map<std::string, fs::path> png_by_stem(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::map<std::string, fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file() || e.path().extension() != ".png") continue;
        out[e.path().stem().string()] = e.path();
    }
    return out;
}

// 8-bit grayscale values of a mask file; rejects colored pixels so a stray
// RGB visualization cannot silently enter an evaluation.
inline std::vector<uint8_t> gray_values(const fs::path& path) {
    const ImageU8 img = read_png(path.string());
    std::vector<uint8_t> out(static_cast<size_t>(img.h) * static_cast<size_t>(img.w));
    if (img.channels == 1) {
        out.assign(img.pix.begin(), img.pix.end());
        return out;
    }
    for (int64_t i = 0; i < img.h * img.w; ++i) {
        const uint8_t r = img.pix[size_t(3 * i)];
        if (img.pix[size_t(3 * i + 1)] != r || img.pix[size_t(3 * i + 2)] != r) {
            throw ValueError("mask is not grayscale: " + path.string());
        }
        out[size_t(i)] = r;
    }
    return out;
}

inline int64_t thread_cap() {
    const char* env = std::getenv("UNEXT_THREADS");
    if (env == nullptr || *env == '\0') {
        const unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int64_t>(hw);
    }
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
        throw ConfigError("UNEXT_THREADS must be a positive integer, got '" +
                          std::string(env) + "'");
    }
    return static_cast<int64_t>(v);
}

inline MetricValues score_pair(const fs::path& pred_path, const fs::path& gt_path) {
    const ImageU8 pred_img = read_png(pred_path.string());
    const ImageU8 gt_img = read_png(gt_path.string());
    if (pred_img.h != gt_img.h || pred_img.w != gt_img.w) {
        throw ValueError("size mismatch: " + pred_path.string() + " is " +
                         std::to_string(pred_img.h) + "x" + std::to_string(pred_img.w) +
                         " but " + gt_path.string() + " is " + std::to_string(gt_img.h) +
                         "x" + std::to_string(gt_img.w));
    }
    const std::vector<uint8_t> pv = gray_values(pred_path);
    const std::vector<uint8_t> gv = gray_values(gt_path);
    Tensor<double> pred(Shape4{1, 1, pred_img.h, pred_img.w});
    Tensor<double> gt(Shape4{1, 1, gt_img.h, gt_img.w});
    for (size_t i = 0; i < pv.size(); ++i) {
        pred.data()[i] = static_cast<double>(pv[i]) / 255.0;
        gt.data()[i] = gv[i] >= 128 ? 1.0 : 0.0;
    }
    return compute_metrics(pred, gt);
}

} // namespace report_detail

inline MetricReport evaluate_dataset(const std::string& pred_dir, const std::string& gt_dir) {
    namespace fs = std::filesystem;
    const auto preds = report_detail::png_by_stem(pred_dir);
    const auto gts = report_detail::png_by_stem(gt_dir);

    MetricReport report;
    std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> pairs;
    for (const auto& [stem, path] : preds) {
        const auto it = gts.find(stem);
        if (it == gts.end()) {
            report.warnings.push_back("prediction without ground truth: " + path.string());
        } else {
            pairs.emplace_back(stem, std::make_pair(path, it->second));
        }
    }
    for (const auto& [stem, path] : gts) {
        if (preds.find(stem) == preds.end()) {
            report.warnings.push_back("ground truth without prediction: " + path.string());
        }
    }
    if (pairs.empty()) {
        throw IoError("no matching mask stems between " + pred_dir + " and " + gt_dir);
    }

    report.images.resize(pairs.size());
    const int64_t workers =
        std::min<int64_t>(report_detail::thread_cap(), static_cast<int64_t>(pairs.size()));
    std::atomic<size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= pairs.size()) return;
            try {
                report.images[i].id = pairs[i].first;
                report.images[i].values =
                    report_detail::score_pair(pairs[i].second.first, pairs[i].second.second);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int64_t t = 0; t < workers; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    const double n = static_cast<double>(report.images.size());
    for (const ImageMetrics& im : report.images) {
        report.means.mae += im.values.mae / n;
        report.means.miou += im.values.miou / n;
        report.means.s_measure += im.values.s_measure / n;
        report.means.e_mean += im.values.e_mean / n;
        report.means.e_adaptive += im.values.e_adaptive / n;
        report.means.f_weighted += im.values.f_weighted / n;
        report.means.f_adaptive += im.values.f_adaptive / n;
        report.means.f_mean += im.values.f_mean / n;
        report.means.f_max += im.values.f_max / n;
    }
    return report;
}

inline std::string metric_csv_header() {
    return "S,Fw,E,MAE,mIoU,Eadp,Fadp,Fmean,Fmax";
}

inline std::string metric_csv_row(const MetricValues& v) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%.3f,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f",
                  v.s_measure, v.f_weighted, v.e_mean, v.mae, v.miou, v.e_adaptive,
                  v.f_adaptive, v.f_mean, v.f_max);
    return buf;
}

namespace report_detail {

inline nlohmann::json values_json(const MetricValues& v) {
    return nlohmann::json{{"mae", v.mae},
                          {"miou", v.miou},
                          {"s_measure", v.s_measure},
                          {"e_mean", v.e_mean},
                          {"e_adaptive", v.e_adaptive},
                          {"f_weighted", v.f_weighted},
                          {"f_adaptive", v.f_adaptive},
                          {"f_mean", v.f_mean},
                          {"f_max", v.f_max}};
}

} // namespace report_detail

// Writes metrics.csv (header plus one 3-decimal dataset row) and metrics.json
// (full precision, per image and aggregate) into out_dir.
inline void write_metric_files(const std::string& out_dir, const MetricReport& report) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);

    {
        std::ofstream csv(fs::path(out_dir) / "metrics.csv", std::ios::trunc);
        csv << metric_csv_header() << "\n" << metric_csv_row(report.means) << "\n";
        csv.flush();
        if (!csv) throw IoError("cannot write metrics.csv under " + out_dir);
    }

    nlohmann::json j;
    j["count"] = report.images.size();
    j["means"] = report_detail::values_json(report.means);
    j["images"] = nlohmann::json::array();
    for (const ImageMetrics& im : report.images) {
        nlohmann::json entry = report_detail::values_json(im.values);
        entry["id"] = im.id;
        j["images"].push_back(std::move(entry));
    }
    j["warnings"] = report.warnings;
    std::ofstream js(fs::path(out_dir) / "metrics.json", std::ios::trunc);
    js << j.dump(2) << "\n";
    js.flush();
    if (!js) throw IoError("cannot write metrics.json under " + out_dir);
}

} // namespace unext
