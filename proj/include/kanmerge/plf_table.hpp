#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"

namespace kanmerge {

/// One KAN layer: m x n piecewise-linear functions g_{i,j}. Column j shares a
/// single grid across all rows. Node values are stored contiguously in
/// (i, j, k) order.
class PlfTable {
public:
    PlfTable(std::size_t out_dim, std::vector<Grid> grids)
        : out_dim_(out_dim), grids_(std::move(grids)) {
        if (out_dim_ == 0) throw InputError("layer out_dim must be positive");
        if (grids_.empty()) throw InputError("layer in_dim must be positive");
        col_offset_.reserve(grids_.size());
        for (const auto& g : grids_) {
            col_offset_.push_back(row_stride_);
            row_stride_ += g.node_count();
        }
        values_.assign(out_dim_ * row_stride_, 0.0);
    }

    std::size_t out_dim() const noexcept { return out_dim_; }
    std::size_t in_dim() const noexcept { return grids_.size(); }
    const Grid& grid(std::size_t j) const noexcept { return grids_[j]; }
    const std::vector<Grid>& grids() const noexcept { return grids_; }
    std::size_t parameter_count() const noexcept { return values_.size(); }
    std::size_t row_stride() const noexcept { return row_stride_; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    std::span<double> function(std::size_t i, std::size_t j) noexcept {
        return {values_.data() + offset(i, j), grids_[j].node_count()};
    }
    std::span<const double> function(std::size_t i, std::size_t j) const noexcept {
        return {values_.data() + offset(i, j), grids_[j].node_count()};
    }

    std::size_t offset(std::size_t i, std::size_t j) const noexcept {
        return i * row_stride_ + col_offset_[j];
    }

    bool same_structure(const PlfTable& other) const noexcept {
        return out_dim_ == other.out_dim_ && grids_ == other.grids_;
    }

    friend bool operator==(const PlfTable& a, const PlfTable& b) noexcept {
        return a.same_structure(b) && a.values_ == b.values_;
    }

private:
    std::size_t out_dim_;
    std::vector<Grid> grids_;
    std::vector<std::size_t> col_offset_;
    std::size_t row_stride_ = 0;
    std::vector<double> values_;
};

/// Locates every input column of `layer` once; the result is shared by all rows.
inline void locate_columns(const PlfTable& layer, std::span<const double> y,
                           std::span<Located> located) {
    for (std::size_t j = 0; j < layer.in_dim(); ++j) located[j] = locate(layer.grid(j), y[j]);
}

/// Layer output for pre-located columns.
inline void eval_located(const PlfTable& layer, std::span<const Located> located,
                         std::span<double> out) noexcept {
    const std::size_t n = layer.in_dim();
    const double* row = layer.values().data();
    for (std::size_t i = 0; i < layer.out_dim(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double* g = row + layer.offset(0, j);
            const Located at = located[j];
            sum += (1.0 - at.frac) * g[at.left] + at.frac * g[at.left + 1];
        }
        out[i] = sum;
        row += layer.row_stride();
    }
}

struct LayerOutput {
    std::vector<double> z;
    std::vector<Located> located;
};

/// z_i = sum_j g_{i,j}(y_j).
inline LayerOutput eval_layer(const PlfTable& layer, std::span<const double> y) {
    detail::require_dim(y.size(), layer.in_dim(), "eval_layer input");
    LayerOutput out{std::vector<double>(layer.out_dim()), std::vector<Located>(layer.in_dim())};
    locate_columns(layer, y, out.located);
    eval_located(layer, out.located, out.z);
    return out;
}

/// Dense m x n row-major matrix of active-segment slopes dg_{i,j}/dy_j.
inline std::vector<double> layer_jacobian(const PlfTable& layer, std::span<const Located> located) {
    detail::require_dim(located.size(), layer.in_dim(), "layer_jacobian located");
    const std::size_t m = layer.out_dim();
    const std::size_t n = layer.in_dim();
    std::vector<double> jac(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            auto g = layer.function(i, j);
            const std::size_t k = located[j].left;
            jac[i * n + j] = (g[k + 1] - g[k]) / layer.grid(j).delta();
        }
    return jac;
}

} // namespace kanmerge
