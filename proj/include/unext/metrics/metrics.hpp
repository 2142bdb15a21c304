#pragma once

// Binary segmentation quality metrics over a probability map and a binary
// ground-truth mask. All internal arithmetic is double precision regardless
// of the input scalar type.
//
// Thresholded metrics (E, F families) sweep the 256 thresholds k/255 using
// cumulative histograms: each prediction value is assigned the largest
// bucket k with value >= k/255, so "value >= threshold" reduces to a suffix
// count. The weighted F-measure uses an exact integer squared-distance
// transform (column pass + row-wise lower-envelope pass).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "unext/core/error.hpp"
#include "unext/core/tensor.hpp"

namespace unext {

struct MetricValues {
    double mae = 0;
    double miou = 0;
    double s_measure = 0;
    double e_mean = 0;
    double e_adaptive = 0;
    double f_weighted = 0;
    double f_adaptive = 0;
    double f_mean = 0;
    double f_max = 0;
    bool fw_degenerate = false; // ground truth had no foreground
};

namespace metric_detail {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

struct View {
    const double* p;
    int64_t h, w;
    double at(int64_t r, int64_t c) const { return p[r * w + c]; }
    int64_t size() const { return h * w; }
};

inline const std::array<double, 256>& thresholds() {
    static const std::array<double, 256> thr = [] {
        std::array<double, 256> t{};
        for (int k = 0; k < 256; ++k) t[size_t(k)] = k / 255.0;
        return t;
    }();
    return thr;
}

// Largest k with v >= k/255. Uses the same comparison against the same
// double constants as a direct per-threshold test would.
inline int bucket_of(double v) {
    const auto& thr = thresholds();
    const auto it = std::upper_bound(thr.begin(), thr.end(), v);
    return static_cast<int>(it - thr.begin()) - 1;
}

inline double mean_of(View m) {
    double s = 0;
    for (int64_t i = 0; i < m.size(); ++i) s += m.p[i];
    return s / static_cast<double>(m.size());
}

// ---- simple metrics ----

inline double mae(View pred, View gt) {
    double s = 0;
    for (int64_t i = 0; i < pred.size(); ++i) s += std::abs(pred.p[i] - gt.p[i]);
    return s / static_cast<double>(pred.size());
}

inline double miou(View pred, View gt) {
    int64_t inter = 0, uni = 0;
    for (int64_t i = 0; i < pred.size(); ++i) {
        const bool p = pred.p[i] >= 0.5;
        const bool g = gt.p[i] > 0.5;
        inter += static_cast<int64_t>(p && g);
        uni += static_cast<int64_t>(p || g);
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

// ---- structure measure ----

inline double object_score(View pred, View gt, bool fg) {
    int64_t n = 0;
    double sum = 0;
    for (int64_t i = 0; i < pred.size(); ++i) {
        if ((gt.p[i] > 0.5) == fg) {
            sum += fg ? pred.p[i] : 1.0 - pred.p[i];
            ++n;
        }
    }
    if (n == 0) return 0.0;
    const double x = sum / static_cast<double>(n);
    double sigma = 0.0;
    if (n > 1) {
        double acc = 0;
        for (int64_t i = 0; i < pred.size(); ++i) {
            if ((gt.p[i] > 0.5) == fg) {
                const double v = (fg ? pred.p[i] : 1.0 - pred.p[i]) - x;
                acc += v * v;
            }
        }
        sigma = std::sqrt(acc / static_cast<double>(n - 1));
    }
    return 2.0 * x / (x * x + 1.0 + sigma + kEps);
}

inline double ssim_region(View pred, View gt, int64_t r0, int64_t r1, int64_t c0, int64_t c1) {
    const int64_t n = (r1 - r0) * (c1 - c0);
    double mx = 0, my = 0;
    for (int64_t r = r0; r < r1; ++r) {
        for (int64_t c = c0; c < c1; ++c) {
            mx += pred.at(r, c);
            my += gt.at(r, c);
        }
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double vx = 0, vy = 0, cov = 0;
    for (int64_t r = r0; r < r1; ++r) {
        for (int64_t c = c0; c < c1; ++c) {
            const double dx = pred.at(r, c) - mx;
            const double dy = gt.at(r, c) - my;
            vx += dx * dx;
            vy += dy * dy;
            cov += dx * dy;
        }
    }
    const double div = static_cast<double>(n - 1) + kEps;
    vx /= div;
    vy /= div;
    cov /= div;
    const double alpha = 4.0 * mx * my * cov;
    const double beta = (mx * mx + my * my) * (vx + vy);
    if (alpha != 0.0) return alpha / (beta + kEps);
    return beta == 0.0 ? 1.0 : 0.0;
}

inline double region_score(View pred, View gt) {
    // Centroid of the mask, 1-based, rounded half away from zero.
    double total = 0, sx = 0, sy = 0;
    for (int64_t r = 0; r < gt.h; ++r) {
        for (int64_t c = 0; c < gt.w; ++c) {
            total += gt.at(r, c);
            sx += gt.at(r, c) * static_cast<double>(c + 1);
            sy += gt.at(r, c) * static_cast<double>(r + 1);
        }
    }
    int64_t X, Y;
    if (total == 0.0) {
        X = static_cast<int64_t>(std::floor(static_cast<double>(gt.w) / 2.0 + 0.5));
        Y = static_cast<int64_t>(std::floor(static_cast<double>(gt.h) / 2.0 + 0.5));
    } else {
        X = static_cast<int64_t>(std::floor(sx / total + 0.5));
        Y = static_cast<int64_t>(std::floor(sy / total + 0.5));
    }
    const double area = static_cast<double>(gt.h * gt.w);
    const double w1 = static_cast<double>(X * Y) / area;
    const double w2 = static_cast<double>((gt.w - X) * Y) / area;
    const double w3 = static_cast<double>(X * (gt.h - Y)) / area;
    const double w4 = 1.0 - w1 - w2 - w3;
    double q = 0;
    if (Y > 0 && X > 0) q += w1 * ssim_region(pred, gt, 0, Y, 0, X);
    if (Y > 0 && X < gt.w) q += w2 * ssim_region(pred, gt, 0, Y, X, gt.w);
    if (Y < gt.h && X > 0) q += w3 * ssim_region(pred, gt, Y, gt.h, 0, X);
    if (Y < gt.h && X < gt.w) q += w4 * ssim_region(pred, gt, Y, gt.h, X, gt.w);
    return q;
}

inline double s_measure(View pred, View gt) {
    const double y = mean_of(gt);
    if (y == 0.0) return 1.0 - mean_of(pred);
    if (y == 1.0) return mean_of(pred);
    const double u = mean_of(gt);
    const double so = u * object_score(pred, gt, true) + (1.0 - u) * object_score(pred, gt, false);
    const double q = 0.5 * so + 0.5 * region_score(pred, gt);
    return std::max(q, 0.0);
}

// ---- enhanced alignment / F from binarization counts ----

// tp, fp: foreground/background pixels at or above the threshold.
inline double e_from_counts(int64_t tp, int64_t fp, int64_t nfg, int64_t n) {
    const double dn = static_cast<double>(n);
    if (nfg == 0) return static_cast<double>(n - tp - fp) / dn;
    if (nfg == n) return static_cast<double>(tp) / dn;
    const double mu_b = static_cast<double>(tp + fp) / dn;
    const double mu_g = static_cast<double>(nfg) / dn;
    const int64_t counts[4] = {tp, nfg - tp, fp, n - nfg - fp};
    const double bvals[4] = {1, 0, 1, 0};
    const double gvals[4] = {1, 1, 0, 0};
    double acc = 0;
    for (int k = 0; k < 4; ++k) {
        if (counts[k] == 0) continue;
        const double pb = bvals[k] - mu_b;
        const double pg = gvals[k] - mu_g;
        const double xi = 2.0 * pb * pg / (pb * pb + pg * pg + kEps);
        const double enh = (xi + 1.0) * (xi + 1.0) / 4.0;
        acc += static_cast<double>(counts[k]) * enh;
    }
    return acc / dn;
}

inline double f_from_counts(int64_t tp, int64_t fp, int64_t nfg, double beta2) {
    const double prec = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double rec = nfg > 0 ? static_cast<double>(tp) / static_cast<double>(nfg) : 0.0;
    const double denom = beta2 * prec + rec;
    return denom > 0 ? (1.0 + beta2) * prec * rec / denom : 0.0;
}

// ---- exact squared euclidean distance transform ----

// For every pixel: squared distance to the nearest foreground pixel and that
// pixel's coordinates. Ties resolve to the smallest (column, row) pair.
// Column pass finds the nearest foreground row per column (tie: smaller row),
// then a lower-envelope pass per row combines columns; the winning column is
// recovered by scanning candidate columns in ascending order.
struct Edt {
    std::vector<int64_t> dist_sq;
    std::vector<int32_t> near_row, near_col;
};

inline Edt edt_nearest_fg(View gt) {
    const int64_t h = gt.h, w = gt.w;
    const int64_t kInf = std::numeric_limits<int64_t>::max() / 4;
    std::vector<int64_t> colmin_sq(static_cast<size_t>(h * w), kInf);
    std::vector<int32_t> colrow(static_cast<size_t>(h * w), -1);
    for (int64_t c = 0; c < w; ++c) {
        int64_t last = -1;
        for (int64_t r = 0; r < h; ++r) {
            if (gt.at(r, c) > 0.5) last = r;
            if (last >= 0) {
                const int64_t d = r - last;
                colmin_sq[static_cast<size_t>(r * w + c)] = d * d;
                colrow[static_cast<size_t>(r * w + c)] = static_cast<int32_t>(last);
            }
        }
        int64_t next = -1;
        for (int64_t r = h - 1; r >= 0; --r) {
            if (gt.at(r, c) > 0.5) next = r;
            if (next >= 0) {
                const int64_t d = next - r;
                const size_t i = static_cast<size_t>(r * w + c);
                // Strict: on equal distance the upward (smaller row) match wins.
                if (d * d < colmin_sq[i]) {
                    colmin_sq[i] = d * d;
                    colrow[i] = static_cast<int32_t>(next);
                }
            }
        }
    }

    Edt out;
    out.dist_sq.assign(static_cast<size_t>(h * w), 0);
    out.near_row.assign(static_cast<size_t>(h * w), -1);
    out.near_col.assign(static_cast<size_t>(h * w), -1);

    std::vector<int64_t> vcol(static_cast<size_t>(w));
    std::vector<double> z(static_cast<size_t>(w) + 1);
    for (int64_t r = 0; r < h; ++r) {
        const int64_t* f = &colmin_sq[static_cast<size_t>(r * w)];
        int k = -1;
        for (int64_t q = 0; q < w; ++q) {
            if (f[q] >= kInf) continue;
            while (k >= 0) {
                const int64_t vq = vcol[static_cast<size_t>(k)];
                const double s = (static_cast<double>(f[q] + q * q) -
                                  static_cast<double>(f[vq] + vq * vq)) /
                                 (2.0 * static_cast<double>(q - vq));
                if (s <= z[static_cast<size_t>(k)]) {
                    --k;
                } else {
                    ++k;
                    vcol[static_cast<size_t>(k)] = q;
                    z[static_cast<size_t>(k)] = s;
                    z[static_cast<size_t>(k) + 1] = std::numeric_limits<double>::infinity();
                    break;
                }
            }
            if (k < 0) {
                k = 0;
                vcol[0] = q;
                z[0] = -std::numeric_limits<double>::infinity();
                z[1] = std::numeric_limits<double>::infinity();
            }
        }
        require(k >= 0, "distance transform needs at least one foreground pixel");
        int j = 0;
        for (int64_t x = 0; x < w; ++x) {
            while (z[static_cast<size_t>(j) + 1] < static_cast<double>(x)) ++j;
            const int64_t vq = vcol[static_cast<size_t>(j)];
            const int64_t s = (x - vq) * (x - vq) + f[vq];
            out.dist_sq[static_cast<size_t>(r * w + x)] = s;
        }
    }

    for (int64_t r = 0; r < h; ++r) {
        for (int64_t x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(r * w + x);
            const int64_t s = out.dist_sq[i];
            int64_t rad = static_cast<int64_t>(std::sqrt(static_cast<double>(s)));
            while ((rad + 1) * (rad + 1) <= s) ++rad;
            while (rad * rad > s) --rad;
            bool found = false;
            for (int64_t xc = x - rad; xc <= x + rad && !found; ++xc) {
                if (xc < 0 || xc >= w) continue;
                const int64_t rem = s - (x - xc) * (x - xc);
                if (colmin_sq[static_cast<size_t>(r * w + xc)] == rem) {
                    out.near_col[i] = static_cast<int32_t>(xc);
                    out.near_row[i] = colrow[static_cast<size_t>(r * w + xc)];
                    found = true;
                }
            }
            require(found, "distance transform index recovery failed");
        }
    }
    return out;
}

inline double f_weighted(View pred, View gt, bool* degenerate) {
    const int64_t h = gt.h, w = gt.w;
    int64_t nfg = 0;
    for (int64_t i = 0; i < h * w; ++i) nfg += static_cast<int64_t>(gt.p[i] > 0.5);
    if (nfg == 0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    if (degenerate) *degenerate = false;

    const Edt edt = edt_nearest_fg(gt);

    std::vector<double> err(static_cast<size_t>(h * w));
    for (int64_t i = 0; i < h * w; ++i) err[size_t(i)] = std::abs(pred.p[i] - gt.p[i]);

    // Background error replaced by the error at the nearest foreground pixel.
    std::vector<double> err_t = err;
    for (int64_t i = 0; i < h * w; ++i) {
        if (gt.p[i] <= 0.5) {
            err_t[size_t(i)] = err[static_cast<size_t>(
                static_cast<int64_t>(edt.near_row[size_t(i)]) * w + edt.near_col[size_t(i)])];
        }
    }

    // 7x7 Gaussian (sigma 5), zero padded, applied separably.
    double g1[7];
    double s1 = 0;
    for (int j = 0; j < 7; ++j) {
        g1[j] = std::exp(-static_cast<double>((j - 3) * (j - 3)) / 50.0);
        s1 += g1[j];
    }
    for (int j = 0; j < 7; ++j) g1[j] /= s1;
    std::vector<double> tmp(static_cast<size_t>(h * w), 0.0);
    for (int64_t r = 0; r < h; ++r) {
        for (int64_t c = 0; c < w; ++c) {
            double acc = 0;
            for (int j = 0; j < 7; ++j) {
                const int64_t cc = c + j - 3;
                if (cc >= 0 && cc < w) acc += err_t[static_cast<size_t>(r * w + cc)] * g1[j];
            }
            tmp[static_cast<size_t>(r * w + c)] = acc;
        }
    }
    std::vector<double> blur(static_cast<size_t>(h * w), 0.0);
    for (int64_t r = 0; r < h; ++r) {
        for (int64_t c = 0; c < w; ++c) {
            double acc = 0;
            for (int j = 0; j < 7; ++j) {
                const int64_t rr = r + j - 3;
                if (rr >= 0 && rr < h) acc += tmp[static_cast<size_t>(rr * w + c)] * g1[j];
            }
            blur[static_cast<size_t>(r * w + c)] = acc;
        }
    }

    const double decay = std::log(0.5) / 5.0;
    double tpw = static_cast<double>(nfg), fpw = 0, fg_err = 0;
    for (int64_t i = 0; i < h * w; ++i) {
        const bool fg = gt.p[i] > 0.5;
        double e = err[size_t(i)];
        if (fg && blur[size_t(i)] < e) e = blur[size_t(i)];
        const double b =
            fg ? 1.0 : 2.0 - std::exp(decay * std::sqrt(static_cast<double>(edt.dist_sq[size_t(i)])));
        const double ew = e * b;
        if (fg) {
            tpw -= ew;
            fg_err += ew;
        } else {
            fpw += ew;
        }
    }
    const double recall = 1.0 - fg_err / static_cast<double>(nfg);
    const double precision = tpw / (kEps + tpw + fpw);
    return 2.0 * recall * precision / (kEps + recall + precision);
}

} // namespace metric_detail

template <typename T>
MetricValues compute_metrics(const Tensor<T>& pred, const Tensor<T>& gt) {
    require_shape(pred.shape(), gt.shape(), "compute_metrics");
    require(pred.shape().n == 1 && pred.shape().c == 1,
            "compute_metrics expects single-channel maps, got " + pred.shape().str());

    const int64_t hw = pred.shape().h * pred.shape().w;
    std::vector<double> p(static_cast<size_t>(hw)), g(static_cast<size_t>(hw));
    for (int64_t i = 0; i < hw; ++i) {
        const double pv = static_cast<double>(pred.data()[size_t(i)]);
        const double gv = static_cast<double>(gt.data()[size_t(i)]);
        if (!(pv >= 0.0 && pv <= 1.0)) {
            throw ValueError("prediction values must lie in [0, 1]");
        }
        if (gv != 0.0 && gv != 1.0) {
            throw ValueError("ground truth mask must be binary 0/1");
        }
        p[size_t(i)] = pv;
        g[size_t(i)] = gv;
    }
    metric_detail::View pv{p.data(), pred.shape().h, pred.shape().w};
    metric_detail::View gv{g.data(), gt.shape().h, gt.shape().w};

    MetricValues out;
    out.mae = metric_detail::mae(pv, gv);
    out.miou = metric_detail::miou(pv, gv);
    out.s_measure = metric_detail::s_measure(pv, gv);
    out.f_weighted = metric_detail::f_weighted(pv, gv, &out.fw_degenerate);

    // Histograms over threshold buckets, then suffix counts so that
    // ge_fg[k] = number of foreground pixels with value >= k/255.
    int64_t hist_fg[256] = {0}, hist_bg[256] = {0};
    int64_t nfg = 0;
    for (int64_t i = 0; i < hw; ++i) {
        const int b = metric_detail::bucket_of(p[size_t(i)]);
        if (g[size_t(i)] > 0.5) {
            ++hist_fg[b];
            ++nfg;
        } else {
            ++hist_bg[b];
        }
    }
    int64_t ge_fg[256], ge_bg[256];
    ge_fg[255] = hist_fg[255];
    ge_bg[255] = hist_bg[255];
    for (int k = 254; k >= 0; --k) {
        ge_fg[k] = ge_fg[k + 1] + hist_fg[k];
        ge_bg[k] = ge_bg[k + 1] + hist_bg[k];
    }

    double e_sum = 0, f_sum = 0, f_best = 0;
    for (int k = 0; k < 256; ++k) {
        e_sum += metric_detail::e_from_counts(ge_fg[k], ge_bg[k], nfg, hw);
        const double f = metric_detail::f_from_counts(ge_fg[k], ge_bg[k], nfg, 0.3);
        f_sum += f;
        f_best = std::max(f_best, f);
    }
    out.e_mean = e_sum / 256.0;
    out.f_mean = f_sum / 256.0;
    out.f_max = f_best;

    const double ta = std::min(1.0, 2.0 * metric_detail::mean_of(pv));
    int64_t tp_a = 0, fp_a = 0;
    for (int64_t i = 0; i < hw; ++i) {
        if (p[size_t(i)] >= ta) {
            if (g[size_t(i)] > 0.5) {
                ++tp_a;
            } else {
                ++fp_a;
            }
        }
    }
    out.e_adaptive = metric_detail::e_from_counts(tp_a, fp_a, nfg, hw);
    out.f_adaptive = metric_detail::f_from_counts(tp_a, fp_a, nfg, 0.3);
    return out;
}

} // namespace unext
