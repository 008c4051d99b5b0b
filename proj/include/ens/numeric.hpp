#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace ens {

/// Pairwise (tree) summation; fixed association order for a given length.
inline double pairwise_sum(std::span<const double> v) {
    constexpr std::size_t kBlock = 8;
    if (v.size() <= kBlock) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

/// Arithmetic mean of the non-NaN entries; NaN when there are none.
inline double nan_mean(std::span<const double> v) {
    std::vector<double> kept;
    kept.reserve(v.size());
    for (double x : v) {
        if (!std::isnan(x)) kept.push_back(x);
    }
    if (kept.empty()) return std::nan("");
    return pairwise_sum(kept) / double(kept.size());
}

/// Median with the midpoint convention for even counts. Reorders `v`.
inline double median_inplace(std::vector<double>& v) {
    const std::size_t n = v.size();
    const std::size_t k = n / 2;
    std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(k), v.end());
    const double hi = v[k];
    if (n % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + std::ptrdiff_t(k));
    return (lo + hi) / 2.0;
}

/// Harmonic mean of the non-NaN entries. Zero if any kept entry is zero, NaN if
/// nothing is kept.
inline double harmonic_mean_ignoring_nan(std::span<const double> v) {
    std::size_t k = 0;
    double inv = 0.0;
    for (double x : v) {
        if (std::isnan(x)) continue;
        if (x == 0.0) return 0.0;
        inv += 1.0 / x;
        ++k;
    }
    if (k == 0) return std::nan("");
    return double(k) / inv;
}

} // namespace ens
