#pragma once

// Cosine learning-rate decay with exact endpoints: full rate at step 0,
// exactly zero at the final step, no floor.

#include <cmath>
#include <cstdint>

#include "unext/core/error.hpp"

namespace unext {

inline double cosine_lr(int64_t step, int64_t total_steps, double lr0) {
    require(total_steps >= 1, "cosine_lr needs total_steps >= 1");
    require(step >= 0 && step <= total_steps, "cosine_lr step out of [0, total_steps]");
    if (step == 0) return lr0;
    if (step == total_steps) return 0.0;
    const double lr =
        lr0 * 0.5 * (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(step) /
                                    static_cast<double>(total_steps)));
    return lr > 0.0 ? lr : 0.0;
}

} // namespace unext
