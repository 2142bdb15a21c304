#pragma once

// Strict JSON run configuration: three sections (model, train, data), defaults
// applied first and overridden per key, unknown keys rejected by name. The
// fully resolved form is echoed into every output directory so a run can be
// reproduced from its artifacts alone.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "unext/core/error.hpp"
#include "unext/model/config.hpp"
#include "unext/train/trainer.hpp"

namespace unext {

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    std::string precision = "f32"; // f32 | f64
    std::string data_root;
};

namespace cfg_detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::vector<std::string>& allowed,
                       const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const std::string& a : allowed) {
            if (key == a) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ConfigError("unknown config key '" + key + "' in " + where);
    }
}

inline void take_i64(const json& obj, const char* key, const std::string& where, int64_t& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) {
        throw ConfigError(where + "." + key + " must be an integer");
    }
    out = v.get<int64_t>();
}

inline void take_u64(const json& obj, const char* key, const std::string& where, uint64_t& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_number_integer() || v.get<int64_t>() < 0) {
        throw ConfigError(where + "." + key + " must be a non-negative integer");
    }
    out = v.get<uint64_t>();
}

inline void take_f64(const json& obj, const char* key, const std::string& where, double& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
    out = v.get<double>();
}

inline void take_str(const json& obj, const char* key, const std::string& where,
                     std::string& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_string()) throw ConfigError(where + "." + key + " must be a string");
    out = v.get<std::string>();
}

inline void parse_model(const json& obj, ModelConfig& m) {
    check_keys(obj,
               {"high_h", "high_w", "low_h", "low_w", "hier", "plain", "glue",
                "decoder_channels", "aux_mode"},
               "model");
    take_i64(obj, "high_h", "model", m.high_h);
    take_i64(obj, "high_w", "model", m.high_w);
    take_i64(obj, "low_h", "model", m.low_h);
    take_i64(obj, "low_w", "model", m.low_w);
    take_i64(obj, "decoder_channels", "model", m.decoder_channels);
    if (obj.contains("aux_mode")) {
        std::string mode;
        take_str(obj, "aux_mode", "model", mode);
        m.aux_mode = aux_mode_from_name(mode);
    }
    if (obj.contains("hier")) {
        const json& h = obj.at("hier");
        check_keys(h, {"stage_channels", "blocks_per_stage", "adapter_bottleneck"}, "model.hier");
        if (h.contains("stage_channels")) {
            const json& sc = h.at("stage_channels");
            if (!sc.is_array()) {
                throw ConfigError("model.hier.stage_channels must be an array of integers");
            }
            m.hier.stage_channels.clear();
            for (const json& v : sc) {
                if (!v.is_number_integer()) {
                    throw ConfigError("model.hier.stage_channels must be an array of integers");
                }
                m.hier.stage_channels.push_back(v.get<int64_t>());
            }
        }
        take_i64(h, "blocks_per_stage", "model.hier", m.hier.blocks_per_stage);
        take_i64(h, "adapter_bottleneck", "model.hier", m.hier.adapter_bottleneck);
    }
    if (obj.contains("plain")) {
        const json& p = obj.at("plain");
        check_keys(p, {"embed_dim", "patch_size", "depth"}, "model.plain");
        take_i64(p, "embed_dim", "model.plain", m.plain.embed_dim);
        take_i64(p, "patch_size", "model.plain", m.plain.patch_size);
        take_i64(p, "depth", "model.plain", m.plain.depth);
    }
    if (obj.contains("glue")) {
        const json& g = obj.at("glue");
        check_keys(g, {"aux_dim", "fused_channels"}, "model.glue");
        take_i64(g, "aux_dim", "model.glue", m.glue.aux_dim);
        take_i64(g, "fused_channels", "model.glue", m.glue.fused_channels);
    }
}

inline void parse_train(const json& obj, TrainConfig& t, std::string& precision) {
    check_keys(obj,
               {"lr0", "epochs", "batch", "weight_decay", "beta1", "beta2", "eps", "seed",
                "checkpoint_every", "precision"},
               "train");
    take_f64(obj, "lr0", "train", t.lr0);
    take_i64(obj, "epochs", "train", t.epochs);
    take_i64(obj, "batch", "train", t.batch);
    take_f64(obj, "weight_decay", "train", t.weight_decay);
    take_f64(obj, "beta1", "train", t.beta1);
    take_f64(obj, "beta2", "train", t.beta2);
    take_f64(obj, "eps", "train", t.eps);
    take_u64(obj, "seed", "train", t.seed);
    take_i64(obj, "checkpoint_every", "train", t.checkpoint_every);
    take_str(obj, "precision", "train", precision);
    if (precision != "f32" && precision != "f64") {
        throw ConfigError("train.precision must be 'f32' or 'f64', got '" + precision + "'");
    }
}

} // namespace cfg_detail

inline RunConfig parse_run_config(const nlohmann::json& doc) {
    RunConfig rc;
    cfg_detail::check_keys(doc, {"model", "train", "data"}, "config root");
    if (doc.contains("model")) cfg_detail::parse_model(doc.at("model"), rc.model);
    if (doc.contains("train")) cfg_detail::parse_train(doc.at("train"), rc.train, rc.precision);
    if (doc.contains("data")) {
        cfg_detail::check_keys(doc.at("data"), {"root"}, "data");
        cfg_detail::take_str(doc.at("data"), "root", "data", rc.data_root);
    }
    rc.model.validate();
    rc.train.validate();
    return rc;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return parse_run_config(doc);
}

inline nlohmann::ordered_json resolved_config_json(const RunConfig& rc) {
    nlohmann::ordered_json j;
    j["model"] = {
        {"high_h", rc.model.high_h},
        {"high_w", rc.model.high_w},
        {"low_h", rc.model.low_h},
        {"low_w", rc.model.low_w},
        {"hier",
         {{"stage_channels", rc.model.hier.stage_channels},
          {"blocks_per_stage", rc.model.hier.blocks_per_stage},
          {"adapter_bottleneck", rc.model.hier.adapter_bottleneck}}},
        {"plain",
         {{"embed_dim", rc.model.plain.embed_dim},
          {"patch_size", rc.model.plain.patch_size},
          {"depth", rc.model.plain.depth}}},
        {"glue",
         {{"aux_dim", rc.model.glue.aux_dim}, {"fused_channels", rc.model.glue.fused_channels}}},
        {"decoder_channels", rc.model.decoder_channels},
        {"aux_mode", aux_mode_name(rc.model.aux_mode)},
    };
    j["train"] = {
        {"lr0", rc.train.lr0},
        {"epochs", rc.train.epochs},
        {"batch", rc.train.batch},
        {"weight_decay", rc.train.weight_decay},
        {"beta1", rc.train.beta1},
        {"beta2", rc.train.beta2},
        {"eps", rc.train.eps},
        {"seed", rc.train.seed},
        {"checkpoint_every", rc.train.checkpoint_every},
        {"precision", rc.precision},
    };
    j["data"] = {{"root", rc.data_root}};
    return j;
}

// Echoes the resolved configuration into an output directory.
inline void write_resolved_config(const std::string& out_dir, const RunConfig& rc) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    std::ofstream out(fs::path(out_dir) / "config.resolved.json", std::ios::trunc);
    out << resolved_config_json(rc).dump(2) << "\n";
    out.flush();
    if (!out) throw IoError("cannot write config.resolved.json under " + out_dir);
}

} // namespace unext
