#pragma once

// Seeded synthetic dataset generator: 1-3 disjoint filled shapes per image
// over a noise background, exact integer rasterization, and a manifest that
// is sufficient to reproduce every mask pixel for pixel.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "unext/core/error.hpp"
#include "unext/core/rng.hpp"
#include "unext/io/image_io.hpp"

namespace unext {

struct SynthShape {
    // ellipse:   center (cy,cx), radii p1=ry, p2=rx
    // rectangle: corners (cy,cx)=(y0,x0) .. (p1,p2)=(y1,x1), inclusive
    // annulus:   center (cy,cx), p1=outer radius, p2=inner radius (excluded)
    std::string type;
    int64_t cy = 0, cx = 0, p1 = 0, p2 = 0;
    std::array<int, 3> color = {0, 0, 0};
};

struct SynthSpec {
    int64_t n = 8;
    int64_t h = 64, w = 64;
    uint64_t seed = 42;
    std::vector<std::string> allowed = {"ellipse", "rectangle", "annulus"};
};

inline bool shape_contains(const SynthShape& s, int64_t y, int64_t x) {
    if (s.type == "rectangle") {
        return y >= s.cy && y <= s.p1 && x >= s.cx && x <= s.p2;
    }
    const int64_t dy = y - s.cy;
    const int64_t dx = x - s.cx;
    if (s.type == "ellipse") {
        return dy * dy * s.p2 * s.p2 + dx * dx * s.p1 * s.p1 <= s.p1 * s.p1 * s.p2 * s.p2;
    }
    if (s.type == "annulus") {
        const int64_t d2 = dy * dy + dx * dx;
        return d2 > s.p2 * s.p2 && d2 <= s.p1 * s.p1;
    }
    throw ConfigError("unknown shape type: " + s.type);
}

inline void rasterize_mask(const std::vector<SynthShape>& shapes, int64_t h, int64_t w,
                           std::vector<uint8_t>& mask) {
    mask.assign(static_cast<size_t>(h * w), 0);
    for (const SynthShape& s : shapes) {
        for (int64_t y = 0; y < h; ++y) {
            for (int64_t x = 0; x < w; ++x) {
                if (shape_contains(s, y, x)) mask[static_cast<size_t>(y * w + x)] = 1;
            }
        }
    }
}

namespace synth_detail {

struct Box {
    int64_t y0, x0, y1, x1;
};

inline Box bounds(const SynthShape& s) {
    if (s.type == "rectangle") return {s.cy, s.cx, s.p1, s.p2};
    const int64_t r = s.p1 > s.p2 ? s.p1 : s.p2;
    const int64_t ry = s.type == "ellipse" ? s.p1 : r;
    const int64_t rx = s.type == "ellipse" ? s.p2 : r;
    return {s.cy - ry, s.cx - rx, s.cy + ry, s.cx + rx};
}

// True when the tight boxes are separated by at least two empty rows or
// columns, which keeps rasterized shapes in distinct 8-connected components.
inline bool well_separated(const Box& a, const Box& b) {
    return a.y1 + 3 <= b.y0 || b.y1 + 3 <= a.y0 || a.x1 + 3 <= b.x0 || b.x1 + 3 <= a.x0;
}

inline constexpr std::array<std::array<int, 3>, 6> kPalette = {{{220, 50, 47},
                                                                {38, 160, 70},
                                                                {38, 90, 210},
                                                                {235, 200, 50},
                                                                {200, 60, 190},
                                                                {45, 200, 200}}};

inline std::vector<SynthShape> sample_shapes(const SynthSpec& spec, Rng& rng) {
    const int64_t s = spec.h < spec.w ? spec.h : spec.w;
    const int64_t rmin = std::max<int64_t>(4, s / 7);
    const int64_t rmax = std::max<int64_t>(rmin + 2, s / 4);
    for (int attempt = 0; attempt < 200; ++attempt) {
        const int64_t count = rng.range(1, 3);
        std::vector<SynthShape> shapes;
        std::vector<Box> boxes;
        bool ok = true;
        for (int64_t k = 0; k < count && ok; ++k) {
            bool placed = false;
            for (int tries = 0; tries < 40 && !placed; ++tries) {
                SynthShape sh;
                sh.type = spec.allowed[static_cast<size_t>(rng.below(spec.allowed.size()))];
                if (sh.type == "rectangle") {
                    const int64_t hh = rng.range(rmin, rmax);
                    const int64_t hw = rng.range(rmin, rmax);
                    sh.cy = rng.range(1, spec.h - 2 - 2 * hh);
                    sh.cx = rng.range(1, spec.w - 2 - 2 * hw);
                    sh.p1 = sh.cy + 2 * hh;
                    sh.p2 = sh.cx + 2 * hw;
                } else {
                    const int64_t ry = rng.range(rmin, rmax);
                    const int64_t rx = sh.type == "annulus" ? ry : rng.range(rmin, rmax);
                    sh.cy = rng.range(ry + 1, spec.h - 2 - ry);
                    sh.cx = rng.range(rx + 1, spec.w - 2 - rx);
                    if (sh.type == "annulus") {
                        sh.p1 = ry;
                        sh.p2 = std::max<int64_t>(2, ry / 3);
                    } else {
                        sh.p1 = ry;
                        sh.p2 = rx;
                    }
                }
                const Box box = bounds(sh);
                bool clear = true;
                for (const Box& other : boxes) {
                    if (!well_separated(box, other)) clear = false;
                }
                if (clear) {
                    shapes.push_back(sh);
                    boxes.push_back(box);
                    placed = true;
                }
            }
            ok = placed;
        }
        if (!ok) continue;
        std::vector<uint8_t> mask;
        rasterize_mask(shapes, spec.h, spec.w, mask);
        int64_t fg = 0;
        for (uint8_t v : mask) fg += v;
        const double frac = static_cast<double>(fg) / static_cast<double>(spec.h * spec.w);
        if (frac < 0.05 || frac > 0.6) continue;
        std::vector<size_t> palette_ids(kPalette.size());
        for (size_t i = 0; i < palette_ids.size(); ++i) palette_ids[i] = i;
        rng.shuffle(palette_ids);
        for (size_t i = 0; i < shapes.size(); ++i) {
            shapes[i].color = kPalette[palette_ids[i]];
        }
        return shapes;
    }
    throw StateError("synthetic generator failed to place shapes within the foreground budget");
}

} // namespace synth_detail

// Writes <out>/images/NNNN.png, <out>/masks/NNNN.png and <out>/manifest.json.
// Identical specs produce byte-identical trees.
inline void generate_synthetic(const SynthSpec& spec, const std::string& out_dir) {
    namespace fs = std::filesystem;
    require(spec.n >= 1, "synthetic dataset needs n >= 1");
    require(spec.h >= 16 && spec.w >= 16, "synthetic canvas must be at least 16x16");
    require(!spec.allowed.empty(), "synthetic shape list must not be empty");
    for (const std::string& t : spec.allowed) {
        require(t == "ellipse" || t == "rectangle" || t == "annulus",
                "unknown synthetic shape type: " + t);
    }
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "images", ec);
    fs::create_directories(fs::path(out_dir) / "masks", ec);
    if (!fs::is_directory(fs::path(out_dir) / "images") ||
        !fs::is_directory(fs::path(out_dir) / "masks")) {
        throw IoError("cannot create dataset directories under " + out_dir);
    }

    nlohmann::json manifest;
    manifest["n"] = spec.n;
    manifest["canvas"] = {spec.h, spec.w};
    manifest["seed"] = spec.seed;
    manifest["allowed"] = spec.allowed;
    manifest["images"] = nlohmann::json::array();

    for (int64_t i = 0; i < spec.n; ++i) {
        Rng rng(mix_seed(spec.seed, static_cast<uint64_t>(i)));
        const std::vector<SynthShape> shapes = synth_detail::sample_shapes(spec, rng);
        std::vector<uint8_t> mask;
        rasterize_mask(shapes, spec.h, spec.w, mask);

        ImageU8 img;
        img.h = spec.h;
        img.w = spec.w;
        img.channels = 3;
        img.pix.resize(static_cast<size_t>(spec.h * spec.w * 3));
        for (int64_t p = 0; p < spec.h * spec.w; ++p) {
            const uint8_t noise = static_cast<uint8_t>(rng.below(256));
            img.pix[static_cast<size_t>(3 * p)] = noise;
            img.pix[static_cast<size_t>(3 * p + 1)] = noise;
            img.pix[static_cast<size_t>(3 * p + 2)] = noise;
        }
        for (const SynthShape& sh : shapes) {
            for (int64_t y = 0; y < spec.h; ++y) {
                for (int64_t x = 0; x < spec.w; ++x) {
                    if (!shape_contains(sh, y, x)) continue;
                    for (int64_t c = 0; c < 3; ++c) {
                        img.at(y, x, c) = static_cast<uint8_t>(sh.color[static_cast<size_t>(c)]);
                    }
                }
            }
        }

        ImageU8 mask_img;
        mask_img.h = spec.h;
        mask_img.w = spec.w;
        mask_img.channels = 1;
        mask_img.pix.resize(mask.size());
        for (size_t p = 0; p < mask.size(); ++p) mask_img.pix[p] = mask[p] ? 255 : 0;

        char name[32];
        std::snprintf(name, sizeof(name), "%04lld", static_cast<long long>(i));
        write_png((fs::path(out_dir) / "images" / (std::string(name) + ".png")).string(), img);
        write_png((fs::path(out_dir) / "masks" / (std::string(name) + ".png")).string(), mask_img);

        nlohmann::json entry;
        entry["id"] = name;
        entry["shapes"] = nlohmann::json::array();
        for (const SynthShape& sh : shapes) {
            entry["shapes"].push_back({{"type", sh.type},
                                       {"cy", sh.cy},
                                       {"cx", sh.cx},
                                       {"p1", sh.p1},
                                       {"p2", sh.p2},
                                       {"color", sh.color}});
        }
        manifest["images"].push_back(std::move(entry));
    }

    std::ofstream mf(fs::path(out_dir) / "manifest.json");
    if (!mf) throw IoError("cannot write manifest under " + out_dir);
    mf << manifest.dump(2) << "\n";
}

struct SynthManifest {
    SynthSpec spec;
    std::vector<std::pair<std::string, std::vector<SynthShape>>> images;
};

inline SynthManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("cannot parse manifest " + path + ": " + e.what());
    }
    SynthManifest m;
    m.spec.n = j.at("n").get<int64_t>();
    m.spec.h = j.at("canvas").at(0).get<int64_t>();
    m.spec.w = j.at("canvas").at(1).get<int64_t>();
    m.spec.seed = j.at("seed").get<uint64_t>();
    m.spec.allowed = j.at("allowed").get<std::vector<std::string>>();
    for (const auto& entry : j.at("images")) {
        std::vector<SynthShape> shapes;
        for (const auto& sj : entry.at("shapes")) {
            SynthShape sh;
            sh.type = sj.at("type").get<std::string>();
            sh.cy = sj.at("cy").get<int64_t>();
            sh.cx = sj.at("cx").get<int64_t>();
            sh.p1 = sj.at("p1").get<int64_t>();
            sh.p2 = sj.at("p2").get<int64_t>();
            auto col = sj.at("color").get<std::vector<int>>();
            require(col.size() == 3, "manifest shape color must have 3 entries");
            sh.color = {col[0], col[1], col[2]};
            shapes.push_back(std::move(sh));
        }
        m.images.emplace_back(entry.at("id").get<std::string>(), std::move(shapes));
    }
    return m;
}

} // namespace unext
