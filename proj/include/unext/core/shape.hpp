#pragma once

#include <cstdint>
#include <string>

#include "unext/core/error.hpp"

namespace unext {

// Dense rank-4 extent in (n, c, h, w) order. All tensors in the library are
// rank 4; vectors and scalars use size-1 axes.
struct Shape4 {
    int64_t n = 0;
    int64_t c = 0;
    int64_t h = 0;
    int64_t w = 0;

    constexpr int64_t numel() const { return n * c * h * w; }

    constexpr bool operator==(const Shape4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    constexpr bool operator!=(const Shape4& o) const { return !(*this == o); }

    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

inline void require_shape(const Shape4& got, const Shape4& want, const char* where) {
    if (got != want) {
        throw ConfigError(std::string(where) + ": shape mismatch, got " + got.str() +
                          ", want " + want.str());
    }
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ConfigError(msg);
}

} // namespace unext
