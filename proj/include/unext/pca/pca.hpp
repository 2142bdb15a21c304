#pragma once

// Principal component projection of a feature map for visualization. Each
// spatial position is one sample with `channels` features. Components come
// from power iteration with deflation on the channel covariance (1/N
// normalization), 100 iterations, convergence tolerance 1e-7, all in double.

#include <cmath>
#include <vector>

#include "unext/core/error.hpp"
#include "unext/core/rng.hpp"
#include "unext/core/tensor.hpp"

namespace unext {

template <typename T>
struct PcaProjection {
    Tensor<T> image;                              // (1,k,h,w) min-max normalized to [0,1]
    Tensor<double> scores;                        // (1,k,h,w) raw component coordinates
    std::vector<std::vector<double>> components;  // k unit vectors of length channels
    std::vector<double> eigenvalues;              // descending, 1/N covariance scale
    double total_variance = 0;                    // trace of the covariance

    double explained_ratio(size_t j) const {
        return total_variance > 0 ? eigenvalues[j] / total_variance : 0.0;
    }
};

template <typename T>
PcaProjection<T> pca_project(const Tensor<T>& aux, int k = 3) {
    const Shape4 s = aux.shape();
    require(s.n == 1, "pca_project expects a single image, got " + s.str());
    require(k >= 1 && static_cast<int64_t>(k) <= s.c,
            "pca_project component count must be in [1, channels]");
    const int64_t c = s.c;
    const int64_t npix = s.h * s.w;

    // Mean-center per channel.
    std::vector<double> mean(static_cast<size_t>(c), 0.0);
    for (int64_t ch = 0; ch < c; ++ch) {
        double acc = 0;
        for (int64_t i = 0; i < npix; ++i) acc += static_cast<double>(aux[ch * npix + i]);
        mean[static_cast<size_t>(ch)] = acc / static_cast<double>(npix);
    }
    std::vector<double> x(static_cast<size_t>(c * npix));
    for (int64_t ch = 0; ch < c; ++ch) {
        for (int64_t i = 0; i < npix; ++i) {
            x[static_cast<size_t>(ch * npix + i)] =
                static_cast<double>(aux[ch * npix + i]) - mean[static_cast<size_t>(ch)];
        }
    }

    std::vector<double> cov(static_cast<size_t>(c * c), 0.0);
    for (int64_t a = 0; a < c; ++a) {
        for (int64_t b = a; b < c; ++b) {
            double acc = 0;
            for (int64_t i = 0; i < npix; ++i) {
                acc += x[static_cast<size_t>(a * npix + i)] * x[static_cast<size_t>(b * npix + i)];
            }
            acc /= static_cast<double>(npix);
            cov[static_cast<size_t>(a * c + b)] = acc;
            cov[static_cast<size_t>(b * c + a)] = acc;
        }
    }

    PcaProjection<T> out;
    out.image = Tensor<T>({1, k, s.h, s.w});
    out.scores = Tensor<double>({1, k, s.h, s.w});
    for (int64_t ch = 0; ch < c; ++ch) out.total_variance += cov[static_cast<size_t>(ch * c + ch)];

    std::vector<double> work(static_cast<size_t>(c * c));
    std::copy(cov.begin(), cov.end(), work.begin());
    constexpr double kTol = 1e-7;
    constexpr int kIters = 100;

    auto matmul = [c](const std::vector<double>& a, const std::vector<double>& b,
                      std::vector<double>& dst) {
        for (int64_t i = 0; i < c; ++i) {
            for (int64_t j2 = 0; j2 < c; ++j2) {
                double acc = 0;
                for (int64_t m = 0; m < c; ++m) {
                    acc += a[static_cast<size_t>(i * c + m)] * b[static_cast<size_t>(m * c + j2)];
                }
                dst[static_cast<size_t>(i * c + j2)] = acc;
            }
        }
    };

    for (int j = 0; j < k; ++j) {
        Rng rng(mix_seed(0x9ca, static_cast<uint64_t>(j)));
        std::vector<double> v(static_cast<size_t>(c));
        for (double& e : v) e = rng.normal();
        auto orthogonalize = [&](std::vector<double>& u) {
            for (const auto& prev : out.components) {
                double dot = 0;
                for (int64_t a = 0; a < c; ++a) dot += u[size_t(a)] * prev[size_t(a)];
                for (int64_t a = 0; a < c; ++a) u[size_t(a)] -= dot * prev[size_t(a)];
            }
        };
        auto normalize = [&](std::vector<double>& u) {
            double nrm = 0;
            for (double e : u) nrm += e * e;
            nrm = std::sqrt(nrm);
            if (nrm > 0) {
                for (double& e : u) e /= nrm;
            }
            return nrm;
        };
        orthogonalize(v);
        normalize(v);

        // Iterate on a repeatedly squared, trace-scaled copy of the deflated
        // matrix. Same fixed points and deflation as plain power iteration,
        // but convergence stays fast when leading eigenvalues are close.
        double trace = 0;
        for (int64_t a = 0; a < c; ++a) trace += work[static_cast<size_t>(a * c + a)];
        if (trace > 0) {
            std::vector<double> pw(static_cast<size_t>(c * c));
            for (size_t i = 0; i < pw.size(); ++i) pw[i] = work[i] / trace;
            std::vector<double> sq(static_cast<size_t>(c * c));
            for (int rep = 0; rep < 5; ++rep) {
                matmul(pw, pw, sq);
                pw.swap(sq);
            }
            std::vector<double> w(static_cast<size_t>(c));
            for (int it = 0; it < kIters; ++it) {
                for (int64_t a = 0; a < c; ++a) {
                    double acc = 0;
                    for (int64_t b = 0; b < c; ++b) {
                        acc += pw[static_cast<size_t>(a * c + b)] * v[size_t(b)];
                    }
                    w[size_t(a)] = acc;
                }
                orthogonalize(w);
                const double nrm = normalize(w);
                if (nrm == 0.0) break; // null space reached, eigenvalue 0
                double delta = 0;
                for (int64_t a = 0; a < c; ++a) {
                    delta = std::max(delta, std::abs(w[size_t(a)] - v[size_t(a)]));
                }
                v = w;
                if (delta < kTol) break;
            }
        }

        double lambda = 0;
        for (int64_t a = 0; a < c; ++a) {
            double acc = 0;
            for (int64_t b = 0; b < c; ++b) acc += work[static_cast<size_t>(a * c + b)] * v[size_t(b)];
            lambda += v[size_t(a)] * acc;
        }
        if (lambda < 0) lambda = 0;
        for (int64_t a = 0; a < c; ++a) {
            for (int64_t b = 0; b < c; ++b) {
                work[static_cast<size_t>(a * c + b)] -= lambda * v[size_t(a)] * v[size_t(b)];
            }
        }
        out.components.push_back(v);
        out.eigenvalues.push_back(lambda);

        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (int64_t i = 0; i < npix; ++i) {
            double sc = 0;
            for (int64_t a = 0; a < c; ++a) sc += x[static_cast<size_t>(a * npix + i)] * v[size_t(a)];
            out.scores[static_cast<int64_t>(j) * npix + i] = sc;
            lo = std::min(lo, sc);
            hi = std::max(hi, sc);
        }
        const double span = hi - lo;
        for (int64_t i = 0; i < npix; ++i) {
            const double sc = out.scores[static_cast<int64_t>(j) * npix + i];
            out.image[static_cast<int64_t>(j) * npix + i] =
                span > 0 ? static_cast<T>((sc - lo) / span) : T(0);
        }
    }
    return out;
}

} // namespace unext
