#pragma once

// Image/mask pair ingestion, flip augmentation, and conversion to the
// dual-resolution tensors the network consumes.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "unext/core/error.hpp"
#include "unext/core/rng.hpp"
#include "unext/core/tensor.hpp"
#include "unext/io/image_io.hpp"
#include "unext/kernels/resize.hpp"
#include "unext/model/config.hpp"
#include "unext/model/encoders.hpp"

namespace unext {

struct Sample {
    std::string id;
    ImageU8 image;             // (h,w,3)
    std::vector<uint8_t> mask; // (h,w) values in {0,1}
    int64_t h = 0, w = 0;
};

namespace data_detail {

inline bool has_ext(const std::filesystem::path& p, std::initializer_list<const char*> exts) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (const char* want : exts) {
        if (e == want) return true;
    }
    return false;
}

} // namespace data_detail

// Pairs images/<stem>.{png,jpg,jpeg} with masks/<stem>.png by stem, in
// lexicographic stem order. Unmatched files and rejected pairs are appended
// to `log` when given. Gray mask values are binarized at 128.
inline std::vector<Sample> load_dataset(const std::string& images_dir,
                                        const std::string& masks_dir,
                                        std::vector<std::string>* log = nullptr) {
    namespace fs = std::filesystem;
    auto note = [&](const std::string& msg) {
        if (log) log->push_back(msg);
    };
    if (!fs::is_directory(images_dir)) throw IoError("not a directory: " + images_dir);
    if (!fs::is_directory(masks_dir)) throw IoError("not a directory: " + masks_dir);

    std::map<std::string, fs::path> images, masks;
    for (const auto& entry : fs::directory_iterator(images_dir)) {
        if (!entry.is_regular_file()) continue;
        if (!data_detail::has_ext(entry.path(), {".png", ".jpg", ".jpeg"})) continue;
        images[entry.path().stem().string()] = entry.path();
    }
    for (const auto& entry : fs::directory_iterator(masks_dir)) {
        if (!entry.is_regular_file()) continue;
        if (!data_detail::has_ext(entry.path(), {".png"})) continue;
        masks[entry.path().stem().string()] = entry.path();
    }
    for (const auto& [stem, path] : images) {
        if (!masks.count(stem)) note("unmatched image (no mask): " + path.string());
    }
    for (const auto& [stem, path] : masks) {
        if (!images.count(stem)) note("unmatched mask (no image): " + path.string());
    }

    std::vector<Sample> out;
    for (const auto& [stem, img_path] : images) {
        auto mit = masks.find(stem);
        if (mit == masks.end()) continue;
        ImageU8 img = read_image(img_path.string());
        ImageU8 msk = read_png(mit->second.string());
        if (img.channels == 1) {
            ImageU8 rgb;
            rgb.h = img.h;
            rgb.w = img.w;
            rgb.channels = 3;
            rgb.pix.resize(static_cast<size_t>(img.h * img.w * 3));
            for (int64_t i = 0; i < img.h * img.w; ++i) {
                rgb.pix[static_cast<size_t>(3 * i)] = img.pix[static_cast<size_t>(i)];
                rgb.pix[static_cast<size_t>(3 * i + 1)] = img.pix[static_cast<size_t>(i)];
                rgb.pix[static_cast<size_t>(3 * i + 2)] = img.pix[static_cast<size_t>(i)];
            }
            img = std::move(rgb);
        }
        if (msk.channels != 1) {
            note("rejected " + stem + ": mask is not grayscale");
            continue;
        }
        if (img.h != msk.h || img.w != msk.w) {
            note("rejected " + stem + ": image " + std::to_string(img.h) + "x" +
                 std::to_string(img.w) + " vs mask " + std::to_string(msk.h) + "x" +
                 std::to_string(msk.w));
            continue;
        }
        Sample s;
        s.id = stem;
        s.h = img.h;
        s.w = img.w;
        s.mask.resize(static_cast<size_t>(msk.h * msk.w));
        int64_t nonbinary = 0;
        for (size_t i = 0; i < msk.pix.size(); ++i) {
            const uint8_t v = msk.pix[i];
            if (v != 0 && v != 255) ++nonbinary;
            s.mask[i] = v >= 128 ? 1 : 0;
        }
        if (nonbinary > 0) {
            note("mask " + stem + ": binarized " + std::to_string(nonbinary) + " gray pixels at 128");
        }
        s.image = std::move(img);
        out.push_back(std::move(s));
    }
    if (out.empty()) throw IoError("no image/mask pairs under " + images_dir + " and " + masks_dir);
    return out;
}

namespace data_detail {

inline void flip_h(ImageU8& img) {
    for (int64_t y = 0; y < img.h; ++y) {
        for (int64_t x = 0; x < img.w / 2; ++x) {
            for (int64_t c = 0; c < img.channels; ++c) {
                std::swap(img.at(y, x, c), img.at(y, img.w - 1 - x, c));
            }
        }
    }
}

inline void flip_v(ImageU8& img) {
    for (int64_t y = 0; y < img.h / 2; ++y) {
        for (int64_t x = 0; x < img.w; ++x) {
            for (int64_t c = 0; c < img.channels; ++c) {
                std::swap(img.at(y, x, c), img.at(img.h - 1 - y, x, c));
            }
        }
    }
}

inline void flip_h_mask(std::vector<uint8_t>& m, int64_t h, int64_t w) {
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w / 2; ++x) {
            std::swap(m[static_cast<size_t>(y * w + x)], m[static_cast<size_t>(y * w + (w - 1 - x))]);
        }
    }
}

inline void flip_v_mask(std::vector<uint8_t>& m, int64_t h, int64_t w) {
    for (int64_t y = 0; y < h / 2; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            std::swap(m[static_cast<size_t>(y * w + x)], m[static_cast<size_t>((h - 1 - y) * w + x)]);
        }
    }
}

} // namespace data_detail

// Independent 50% horizontal and vertical flips, applied identically to
// image and mask. Draw order is fixed: horizontal first, then vertical.
inline Sample augment(Sample s, Rng& rng) {
    const bool do_h = rng.uniform() < 0.5;
    const bool do_v = rng.uniform() < 0.5;
    if (do_h) {
        data_detail::flip_h(s.image);
        data_detail::flip_h_mask(s.mask, s.h, s.w);
    }
    if (do_v) {
        data_detail::flip_v(s.image);
        data_detail::flip_v_mask(s.mask, s.h, s.w);
    }
    return s;
}

template <typename T>
struct ModelInputs {
    Tensor<T> image_high; // (1,3,H_h,W_h) normalized
    Tensor<T> image_low;  // (1,3,H_l,W_l) normalized
    Tensor<T> gt;         // (1,1,H_h,W_h) in {0,1}
};

// Image scaled to [0,1], resized bilinearly to each working resolution, then
// channel-normalized; ground truth resized with nearest-neighbor so labels
// stay exactly binary.
template <typename T>
ModelInputs<T> to_model_inputs(const Sample& s, const ModelConfig& cfg) {
    require(s.image.channels == 3, "to_model_inputs expects an RGB sample");
    Tensor<T> img({1, 3, s.h, s.w});
    for (int64_t c = 0; c < 3; ++c) {
        for (int64_t y = 0; y < s.h; ++y) {
            for (int64_t x = 0; x < s.w; ++x) {
                img.at(0, c, y, x) = static_cast<T>(s.image.at(y, x, c)) / T(255);
            }
        }
    }
    Tensor<T> gt({1, 1, s.h, s.w});
    for (int64_t i = 0; i < s.h * s.w; ++i) {
        gt[i] = static_cast<T>(s.mask[static_cast<size_t>(i)]);
    }
    ModelInputs<T> out;
    out.image_high = kernels::resize_bilinear(img, cfg.high_h, cfg.high_w);
    normalize_image_inplace(out.image_high);
    out.image_low = kernels::resize_bilinear(img, cfg.low_h, cfg.low_w);
    normalize_image_inplace(out.image_low);
    out.gt = kernels::resize_nearest(gt, cfg.high_h, cfg.high_w);
    return out;
}

} // namespace unext
