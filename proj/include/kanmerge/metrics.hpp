#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "errors.hpp"

namespace kanmerge {

/// Pearson correlation of `a` and `b`, in percent. Two-pass: means first,
/// then centred sums.
inline double pearson_pct(std::span<const double> a, std::span<const double> b) {
    detail::require_dim(b.size(), a.size(), "pearson_pct second vector");
    if (a.size() < 2) throw InputError("pearson_pct needs at least 2 samples");
    const double n = static_cast<double>(a.size());
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= n;
    mean_b /= n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa == 0.0 || sbb == 0.0)
        throw UndefinedCorrelation("Pearson correlation undefined for a constant vector");
    const double r = sab / std::sqrt(saa * sbb);
    return 100.0 * std::clamp(r, -1.0, 1.0);
}

} // namespace kanmerge
