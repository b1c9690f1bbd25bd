#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace qkd {

struct Interval {
    double estimate = 0.0;
    double low = 0.0;
    double high = 0.0;
};

// Two-sided 99% normal quantile.
inline constexpr double kZ99 = 2.5758293035489008;

// Wilson score interval; behaves well near 0.
inline Interval wilson_interval(std::uint64_t successes, std::uint64_t trials,
                                double z = kZ99) {
    Interval iv;
    if (trials == 0) return iv;
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    iv.estimate = p;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half =
        z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    iv.low = std::max(0.0, center - half);
    iv.high = std::min(1.0, center + half);
    return iv;
}

}  // namespace qkd
