#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "unext/core/rng.hpp"
#include "unext/core/tensor.hpp"

namespace testutil {

// Fresh directory under the system temp root, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("unext_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }
};

using unext::Shape4;
using unext::Tensor;

template <typename T>
Tensor<T> random_tensor(Shape4 s, unext::Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<T> t(s);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

template <typename T>
Tensor<T> random_binary(Shape4 s, unext::Rng& rng, double p_fg = 0.45) {
    Tensor<T> t(s);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform() < p_fg ? T(1) : T(0);
    return t;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

template <typename T>
double max_rel_err(const Tensor<T>& a, const Tensor<T>& b) {
    double m = 0;
    for (int64_t i = 0; i < a.size(); ++i) {
        m = std::max(m, rel_err(static_cast<double>(a[i]), static_cast<double>(b[i])));
    }
    return m;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    double m = 0;
    for (int64_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    }
    return m;
}

// Central finite differences of f() w.r.t. every element of x, mutating x in
// place and restoring it.
template <typename F>
Tensor<double> fd_grad(Tensor<double>& x, F f, double delta = 1e-5) {
    Tensor<double> g(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) {
        const double old = x[i];
        x[i] = old + delta;
        const double fp = f();
        x[i] = old - delta;
        const double fm = f();
        x[i] = old;
        g[i] = (fp - fm) / (2.0 * delta);
    }
    return g;
}

// Reference convolution: direct six-loop cross-correlation with zero
// padding. Shares no code with the production kernel.
template <typename T>
Tensor<T> conv_naive(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b, int64_t stride,
                     int64_t pad) {
    const int64_t n = x.shape().n, c_in = x.shape().c, h = x.shape().h, wd = x.shape().w;
    const int64_t c_out = w.shape().n, kh = w.shape().h, kw = w.shape().w;
    const int64_t oh = (h + 2 * pad - kh) / stride + 1;
    const int64_t ow = (wd + 2 * pad - kw) / stride + 1;
    Tensor<T> y(Shape4{n, c_out, oh, ow});
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t co = 0; co < c_out; ++co) {
            for (int64_t oy = 0; oy < oh; ++oy) {
                for (int64_t ox = 0; ox < ow; ++ox) {
                    double acc = b ? static_cast<double>(b->at(0, co, 0, 0)) : 0.0;
                    for (int64_t ci = 0; ci < c_in; ++ci) {
                        for (int64_t ky = 0; ky < kh; ++ky) {
                            for (int64_t kx = 0; kx < kw; ++kx) {
                                const int64_t iy = oy * stride - pad + ky;
                                const int64_t ix = ox * stride - pad + kx;
                                if (iy >= 0 && iy < h && ix >= 0 && ix < wd) {
                                    acc += static_cast<double>(x.at(i, ci, iy, ix)) *
                                           static_cast<double>(w.at(co, ci, ky, kx));
                                }
                            }
                        }
                    }
                    y.at(i, co, oy, ox) = static_cast<T>(acc);
                }
            }
        }
    }
    return y;
}

// Reference stride-1 box mean dividing by the in-bounds window size.
template <typename T>
Tensor<T> box_mean_naive(const Tensor<T>& x, int64_t k) {
    const int64_t pad = k / 2;
    const Shape4 s = x.shape();
    Tensor<T> y(s);
    for (int64_t n = 0; n < s.n; ++n) {
        for (int64_t c = 0; c < s.c; ++c) {
            for (int64_t i = 0; i < s.h; ++i) {
                for (int64_t j = 0; j < s.w; ++j) {
                    double acc = 0;
                    int64_t count = 0;
                    for (int64_t dy = -pad; dy <= pad; ++dy) {
                        for (int64_t dx = -pad; dx <= pad; ++dx) {
                            const int64_t y2 = i + dy, x2 = j + dx;
                            if (y2 >= 0 && y2 < s.h && x2 >= 0 && x2 < s.w) {
                                acc += static_cast<double>(x.at(n, c, y2, x2));
                                ++count;
                            }
                        }
                    }
                    y.at(n, c, i, j) = static_cast<T>(acc / static_cast<double>(count));
                }
            }
        }
    }
    return y;
}

} // namespace testutil
