#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "errors.hpp"

namespace kanmerge {

/// Uniform node placement over [y_min, y_max].
class Grid {
public:
    Grid(double y_min, double y_max, std::size_t node_count)
        : y_min_(y_min), y_max_(y_max), node_count_(node_count) {
        if (!std::isfinite(y_min) || !std::isfinite(y_max) || !(y_max > y_min))
            throw InputError("grid range must satisfy y_min < y_max, got [" + std::to_string(y_min) +
                             ", " + std::to_string(y_max) + "]");
        if (node_count < 2)
            throw InputError("grid needs at least 2 nodes, got " + std::to_string(node_count));
        delta_ = (y_max - y_min) / static_cast<double>(node_count - 1);
        inv_delta_ = 1.0 / delta_;
    }

    double y_min() const noexcept { return y_min_; }
    double y_max() const noexcept { return y_max_; }
    std::size_t node_count() const noexcept { return node_count_; }
    std::size_t segment_count() const noexcept { return node_count_ - 1; }
    double delta() const noexcept { return delta_; }
    double inv_delta() const noexcept { return inv_delta_; }

    double node(std::size_t k) const noexcept {
        return k + 1 == node_count_ ? y_max_ : y_min_ + static_cast<double>(k) * delta_;
    }

    friend bool operator==(const Grid& a, const Grid& b) noexcept {
        return a.y_min_ == b.y_min_ && a.y_max_ == b.y_max_ && a.node_count_ == b.node_count_;
    }

private:
    double y_min_;
    double y_max_;
    std::size_t node_count_;
    double delta_;
    double inv_delta_;
};

/// Active segment for an argument: left node index (0-based) and the relative
/// offset from that node, in [0, 1].
struct Located {
    std::size_t left = 0;
    double frac = 0.0;

    friend bool operator==(const Located&, const Located&) = default;
};

/// Segment lookup without the finiteness check. Arguments outside the grid
/// are clamped; y_max maps to the last segment with frac = 1.
inline Located locate_unchecked(const Grid& grid, double y) noexcept {
    if (y <= grid.y_min()) return {0, 0.0};
    const std::size_t last = grid.node_count() - 2;
    if (y >= grid.y_max()) return {last, 1.0};
    const double s = (y - grid.y_min()) * grid.inv_delta();
    auto k = static_cast<std::size_t>(s);
    if (k > last) return {last, 1.0};
    return {k, s - static_cast<double>(k)};
}

inline Located locate(const Grid& grid, double y) {
    if (!std::isfinite(y)) throw InputError("cannot locate non-finite argument");
    return locate_unchecked(grid, y);
}

inline double interpolate(std::span<const double> values, Located at) noexcept {
    return (1.0 - at.frac) * values[at.left] + at.frac * values[at.left + 1];
}

/// Value of the piecewise-linear function with node values `values` at y.
inline double eval_plf(std::span<const double> values, const Grid& grid, double y) {
    detail::require_dim(values.size(), grid.node_count(), "eval_plf node values");
    return interpolate(values, locate(grid, y));
}

} // namespace kanmerge
