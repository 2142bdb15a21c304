#pragma once

// Reference implementations of the nine mask metrics, written as direct
// brute-force transcriptions (per-threshold pixel loops, all-pairs nearest
// foreground search). Shares no code with the production metrics module.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

inline constexpr double kEps = 2.220446049250313e-16;

struct Map {
    int64_t h = 0, w = 0;
    std::vector<double> v;
    Map() = default;
    Map(int64_t hh, int64_t ww) : h(hh), w(ww), v(static_cast<size_t>(hh * ww), 0.0) {}
    double& at(int64_t r, int64_t c) { return v[static_cast<size_t>(r * w + c)]; }
    double at(int64_t r, int64_t c) const { return v[static_cast<size_t>(r * w + c)]; }
    int64_t size() const { return h * w; }
    double mean() const {
        double s = 0;
        for (double x : v) s += x;
        return s / static_cast<double>(size());
    }
    double sum() const {
        double s = 0;
        for (double x : v) s += x;
        return s;
    }
};

// Portable LCG pair generator, reproduced bit-identically from the pinned
// recurrence: s <- 6364136223846793005*s + 1442695040888963407 (mod 2^64),
// u = (s >> 11) / 2^53. Row-major: u1 -> pred, u2 -> gt = (u2 < 0.45).
inline void lcg_pair(uint64_t seed, int64_t h, int64_t w, Map& pred, Map& gt) {
    pred = Map(h, w);
    gt = Map(h, w);
    uint64_t s = seed;
    for (int64_t r = 0; r < h; ++r) {
        for (int64_t c = 0; c < w; ++c) {
            s = 6364136223846793005ull * s + 1442695040888963407ull;
            const double u1 = static_cast<double>(s >> 11) / 9007199254740992.0;
            s = 6364136223846793005ull * s + 1442695040888963407ull;
            const double u2 = static_cast<double>(s >> 11) / 9007199254740992.0;
            pred.at(r, c) = u1;
            gt.at(r, c) = u2 < 0.45 ? 1.0 : 0.0;
        }
    }
}

inline double mae(const Map& pred, const Map& gt) {
    double s = 0;
    for (int64_t i = 0; i < pred.size(); ++i) s += std::abs(pred.v[size_t(i)] - gt.v[size_t(i)]);
    return s / static_cast<double>(pred.size());
}

inline double miou(const Map& pred, const Map& gt) {
    int64_t inter = 0, uni = 0;
    for (int64_t i = 0; i < pred.size(); ++i) {
        const bool p = pred.v[size_t(i)] >= 0.5, g = gt.v[size_t(i)] > 0.5;
        inter += p && g;
        uni += p || g;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// ---- S-measure ----

inline double s_object_term(const std::vector<double>& vals) {
    const size_t n = vals.size();
    if (n == 0) return 0.0;
    double x = 0;
    for (double v : vals) x += v;
    x /= static_cast<double>(n);
    double sigma = 0.0;
    if (n > 1) {
        double acc = 0;
        for (double v : vals) acc += (v - x) * (v - x);
        sigma = std::sqrt(acc / static_cast<double>(n - 1));
    }
    return 2.0 * x / (x * x + 1.0 + sigma + kEps);
}

inline double s_object(const Map& pred, const Map& gt) {
    std::vector<double> fg, bg;
    for (int64_t i = 0; i < pred.size(); ++i) {
        if (gt.v[size_t(i)] > 0.5) {
            fg.push_back(pred.v[size_t(i)]);
        } else {
            bg.push_back(1.0 - pred.v[size_t(i)]);
        }
    }
    const double u = gt.mean();
    return u * s_object_term(fg) + (1.0 - u) * s_object_term(bg);
}

// 1-based centroid with MATLAB-style round (half away from zero).
inline void s_centroid(const Map& gt, int64_t* X, int64_t* Y) {
    const double total = gt.sum();
    if (total == 0.0) {
        *X = static_cast<int64_t>(std::floor(gt.w / 2.0 + 0.5));
        *Y = static_cast<int64_t>(std::floor(gt.h / 2.0 + 0.5));
        return;
    }
    double sx = 0, sy = 0;
    for (int64_t r = 0; r < gt.h; ++r) {
        for (int64_t c = 0; c < gt.w; ++c) {
            sx += gt.at(r, c) * static_cast<double>(c + 1);
            sy += gt.at(r, c) * static_cast<double>(r + 1);
        }
    }
    *X = static_cast<int64_t>(std::floor(sx / total + 0.5));
    *Y = static_cast<int64_t>(std::floor(sy / total + 0.5));
}

inline double ssim_block(const Map& pred, const Map& gt, int64_t r0, int64_t r1, int64_t c0,
                         int64_t c1) {
    const int64_t N = (r1 - r0) * (c1 - c0);
    double x = 0, y = 0;
    for (int64_t r = r0; r < r1; ++r) {
        for (int64_t c = c0; c < c1; ++c) {
            x += pred.at(r, c);
            y += gt.at(r, c);
        }
    }
    x /= static_cast<double>(N);
    y /= static_cast<double>(N);
    double sx2 = 0, sy2 = 0, sxy = 0;
    for (int64_t r = r0; r < r1; ++r) {
        for (int64_t c = c0; c < c1; ++c) {
            sx2 += (pred.at(r, c) - x) * (pred.at(r, c) - x);
            sy2 += (gt.at(r, c) - y) * (gt.at(r, c) - y);
            sxy += (pred.at(r, c) - x) * (gt.at(r, c) - y);
        }
    }
    const double div = static_cast<double>(N - 1) + kEps;
    sx2 /= div;
    sy2 /= div;
    sxy /= div;
    const double alpha = 4.0 * x * y * sxy;
    const double beta = (x * x + y * y) * (sx2 + sy2);
    if (alpha != 0.0) return alpha / (beta + kEps);
    if (beta == 0.0) return 1.0;
    return 0.0;
}

inline double s_region(const Map& pred, const Map& gt) {
    int64_t X, Y;
    s_centroid(gt, &X, &Y);
    const double area = static_cast<double>(gt.h * gt.w);
    const double w1 = static_cast<double>(X * Y) / area;
    const double w2 = static_cast<double>((gt.w - X) * Y) / area;
    const double w3 = static_cast<double>(X * (gt.h - Y)) / area;
    const double w4 = 1.0 - w1 - w2 - w3;
    double q = 0;
    if (Y > 0 && X > 0) q += w1 * ssim_block(pred, gt, 0, Y, 0, X);
    if (Y > 0 && X < gt.w) q += w2 * ssim_block(pred, gt, 0, Y, X, gt.w);
    if (Y < gt.h && X > 0) q += w3 * ssim_block(pred, gt, Y, gt.h, 0, X);
    if (Y < gt.h && X < gt.w) q += w4 * ssim_block(pred, gt, Y, gt.h, X, gt.w);
    return q;
}

inline double s_measure(const Map& pred, const Map& gt) {
    const double y = gt.mean();
    if (y == 0.0) return 1.0 - pred.mean();
    if (y == 1.0) return pred.mean();
    const double q = 0.5 * s_object(pred, gt) + 0.5 * s_region(pred, gt);
    return std::max(q, 0.0);
}

// ---- E-measure ----

inline double e_at_threshold(const Map& pred, const Map& gt, double t) {
    const int64_t N = pred.size();
    Map fm(pred.h, pred.w);
    for (int64_t i = 0; i < N; ++i) fm.v[size_t(i)] = pred.v[size_t(i)] >= t ? 1.0 : 0.0;
    const double gsum = gt.sum();
    double acc = 0;
    if (gsum == 0.0) {
        for (int64_t i = 0; i < N; ++i) acc += 1.0 - fm.v[size_t(i)];
    } else if (gsum == static_cast<double>(N)) {
        for (int64_t i = 0; i < N; ++i) acc += fm.v[size_t(i)];
    } else {
        const double mu_f = fm.mean(), mu_g = gt.mean();
        for (int64_t i = 0; i < N; ++i) {
            const double pf = fm.v[size_t(i)] - mu_f;
            const double pg = gt.v[size_t(i)] - mu_g;
            const double xi = 2.0 * pf * pg / (pf * pf + pg * pg + kEps);
            acc += (xi + 1.0) * (xi + 1.0) / 4.0;
        }
    }
    return acc / static_cast<double>(N);
}

inline double e_measure_mean(const Map& pred, const Map& gt) {
    double acc = 0;
    for (int k = 0; k < 256; ++k) acc += e_at_threshold(pred, gt, k / 255.0);
    return acc / 256.0;
}

inline double e_measure_adaptive(const Map& pred, const Map& gt) {
    return e_at_threshold(pred, gt, std::min(1.0, 2.0 * pred.mean()));
}

// ---- F-measures ----

inline double f_at_threshold(const Map& pred, const Map& gt, double t, double beta2) {
    double tp = 0, fp = 0, fn = 0;
    for (int64_t i = 0; i < pred.size(); ++i) {
        const bool p = pred.v[size_t(i)] >= t, g = gt.v[size_t(i)] > 0.5;
        tp += p && g;
        fp += p && !g;
        fn += !p && g;
    }
    const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double denom = beta2 * prec + rec;
    return denom > 0 ? (1.0 + beta2) * prec * rec / denom : 0.0;
}

struct FTriple {
    double adaptive, mean, max;
};

inline FTriple f_measures(const Map& pred, const Map& gt, double beta2 = 0.3) {
    FTriple out{0, 0, 0};
    for (int k = 0; k < 256; ++k) {
        const double f = f_at_threshold(pred, gt, k / 255.0, beta2);
        out.mean += f;
        out.max = std::max(out.max, f);
    }
    out.mean /= 256.0;
    out.adaptive = f_at_threshold(pred, gt, std::min(1.0, 2.0 * pred.mean()), beta2);
    return out;
}

// ---- weighted F ----

inline double f_weighted(const Map& pred, const Map& gt) {
    const int64_t h = gt.h, w = gt.w;
    std::vector<std::pair<int64_t, int64_t>> fgs; // (col, row), lexicographic order
    for (int64_t c = 0; c < w; ++c) {
        for (int64_t r = 0; r < h; ++r) {
            if (gt.at(r, c) > 0.5) fgs.push_back({c, r});
        }
    }
    if (fgs.empty()) return 0.0;

    Map D(h, w);
    std::vector<int64_t> ir(static_cast<size_t>(h * w)), ic(static_cast<size_t>(h * w));
    for (int64_t r = 0; r < h; ++r) {
        for (int64_t c = 0; c < w; ++c) {
            int64_t bestd = std::numeric_limits<int64_t>::max();
            int64_t br = 0, bc = 0;
            for (auto [fc, fr] : fgs) {
                const int64_t d = (fr - r) * (fr - r) + (fc - c) * (fc - c);
                if (d < bestd) {
                    bestd = d;
                    br = fr;
                    bc = fc;
                }
            }
            D.at(r, c) = std::sqrt(static_cast<double>(bestd));
            ir[static_cast<size_t>(r * w + c)] = br;
            ic[static_cast<size_t>(r * w + c)] = bc;
        }
    }

    Map E(h, w);
    for (int64_t i = 0; i < h * w; ++i) E.v[size_t(i)] = std::abs(pred.v[size_t(i)] - gt.v[size_t(i)]);
    Map Et = E;
    for (int64_t r = 0; r < h; ++r) {
        for (int64_t c = 0; c < w; ++c) {
            if (gt.at(r, c) <= 0.5) {
                Et.at(r, c) = E.at(ir[static_cast<size_t>(r * w + c)],
                                   ic[static_cast<size_t>(r * w + c)]);
            }
        }
    }

    double kern[7][7];
    double ksum = 0;
    for (int i = 0; i < 7; ++i) {
        for (int j = 0; j < 7; ++j) {
            kern[i][j] = std::exp(-((i - 3) * (i - 3) + (j - 3) * (j - 3)) / 50.0);
            ksum += kern[i][j];
        }
    }
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) kern[i][j] /= ksum;

    Map EA(h, w);
    for (int64_t r = 0; r < h; ++r) {
        for (int64_t c = 0; c < w; ++c) {
            double acc = 0;
            for (int i = 0; i < 7; ++i) {
                for (int j = 0; j < 7; ++j) {
                    const int64_t rr = r + i - 3, cc = c + j - 3;
                    if (rr >= 0 && rr < h && cc >= 0 && cc < w) acc += Et.at(rr, cc) * kern[i][j];
                }
            }
            EA.at(r, c) = acc;
        }
    }

    Map MinE = E;
    for (int64_t i = 0; i < h * w; ++i) {
        if (gt.v[size_t(i)] > 0.5 && EA.v[size_t(i)] < E.v[size_t(i)]) {
            MinE.v[size_t(i)] = EA.v[size_t(i)];
        }
    }
    Map B(h, w);
    for (int64_t i = 0; i < h * w; ++i) {
        B.v[size_t(i)] = gt.v[size_t(i)] > 0.5
                             ? 1.0
                             : 2.0 - std::exp(std::log(0.5) / 5.0 * D.v[size_t(i)]);
    }
    double tpw = gt.sum(), fpw = 0, ew_fg = 0;
    int64_t nfg = 0;
    for (int64_t i = 0; i < h * w; ++i) {
        const double ew = MinE.v[size_t(i)] * B.v[size_t(i)];
        if (gt.v[size_t(i)] > 0.5) {
            tpw -= ew;
            ew_fg += ew;
            ++nfg;
        } else {
            fpw += ew;
        }
    }
    const double R = 1.0 - ew_fg / static_cast<double>(nfg);
    const double P = tpw / (kEps + tpw + fpw);
    return 2.0 * R * P / (kEps + R + P);
}

} // namespace oracle
