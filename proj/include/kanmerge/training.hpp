#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace kanmerge {

struct LayerSpec {
    std::size_t out_dim;
    std::size_t node_count;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Layer shapes of a model: input width plus (out_dim, nodes per function)
/// for every layer.
struct Architecture {
    std::size_t input_dim = 0;
    std::vector<LayerSpec> layers;

    std::size_t output_dim() const noexcept { return layers.empty() ? 0 : layers.back().out_dim; }

    std::size_t parameter_count() const noexcept {
        std::size_t total = 0;
        std::size_t in = input_dim;
        for (const auto& l : layers) {
            total += l.out_dim * in * l.node_count;
            in = l.out_dim;
        }
        return total;
    }

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct Range {
    double lo;
    double hi;
};

struct TrainConfig {
    double mu = 0.5;
    std::size_t epochs = 1;
    std::uint64_t seed = 0;
    bool shuffle_each_epoch = true;

    void validate() const {
        if (!(mu > 0.0 && mu <= 1.0)) throw InputError("mu must lie in (0, 1]");
        if (epochs < 1) throw InputError("epochs must be at least 1");
    }
};

/// Random model whose every layer stays inside the next layer's grid.
///
/// With h the half-span of `target_range`, a layer with n inputs draws its node
/// values uniformly from [-h/n, h/n], so its outputs lie within [-h, h]; that
/// interval is the grid range of the following layer. The last layer is
/// centred on the target midpoint, so the initial output range is exactly
/// `target_range`. The first layer's grids span `input_range`.
inline KanModel init_model(const Architecture& arch, Range input_range, Range target_range,
                           std::uint64_t seed) {
    if (arch.input_dim == 0 || arch.layers.empty()) throw InputError("architecture is empty");
    if (!(input_range.lo < input_range.hi)) throw InputError("input range must satisfy lo < hi");
    if (!(target_range.lo < target_range.hi)) throw InputError("target range must satisfy lo < hi");
    for (const auto& l : arch.layers)
        if (l.out_dim == 0) throw InputError("layer out_dim must be positive");

    const double half = 0.5 * (target_range.hi - target_range.lo);
    const double mid = 0.5 * (target_range.lo + target_range.hi);

    Xoshiro256ss rng(derive_seed(seed, 0x494E4954ULL));
    std::vector<PlfTable> layers;
    layers.reserve(arch.layers.size());
    Range grid_range = input_range;
    std::size_t in = arch.input_dim;
    for (std::size_t l = 0; l < arch.layers.size(); ++l) {
        const auto& spec = arch.layers[l];
        std::vector<Grid> grids(in, Grid(grid_range.lo, grid_range.hi, spec.node_count));
        PlfTable table(spec.out_dim, std::move(grids));
        const double n = static_cast<double>(in);
        const double bound = half / n;
        const double centre = l + 1 == arch.layers.size() ? mid / n : 0.0;
        for (double& v : table.values()) v = centre + rng.uniform(-bound, bound);
        layers.push_back(std::move(table));
        grid_range = {-half, half};
        in = spec.out_dim;
    }
    return KanModel(std::move(layers));
}

/// Per-function value bound used by init_model for a layer with `in_dim` inputs.
inline double init_value_bound(Range target_range, std::size_t in_dim) {
    return 0.5 * (target_range.hi - target_range.lo) / static_cast<double>(in_dim);
}

/// Damped Kaczmarz step on one layer: both active nodes of every g_{i,j} move
/// by (mu / n) * residual_i, split as (1 - f) and f.
inline void update_layer(PlfTable& layer, std::span<const Located> located,
                         std::span<const double> residual, double mu) {
    detail::require_dim(located.size(), layer.in_dim(), "update_layer located");
    detail::require_dim(residual.size(), layer.out_dim(), "update_layer residual");
    const std::size_t n = layer.in_dim();
    const double mu_eff = mu / static_cast<double>(n);
    double* row = layer.values().data();
    for (std::size_t i = 0; i < layer.out_dim(); ++i, row += layer.row_stride()) {
        const double step = mu_eff * residual[i];
        if (step == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) {
            double* g = row + layer.offset(0, j);
            const Located at = located[j];
            g[at.left] += step * (1.0 - at.frac);
            g[at.left + 1] += step * at.frac;
        }
    }
}

/// Residual for the preceding layer, dy = J^T dz, J being the active-segment
/// slopes. Must be called before the layer is updated.
inline void backprop_targets_into(const PlfTable& layer, std::span<const Located> located,
                                  std::span<const double> residual, std::span<double> out) {
    detail::require_dim(located.size(), layer.in_dim(), "backprop_targets located");
    detail::require_dim(residual.size(), layer.out_dim(), "backprop_targets residual");
    detail::require_dim(out.size(), layer.in_dim(), "backprop_targets output");
    const std::size_t n = layer.in_dim();
    std::fill(out.begin(), out.end(), 0.0);
    const double* row = layer.values().data();
    for (std::size_t i = 0; i < layer.out_dim(); ++i, row += layer.row_stride()) {
        const double dz = residual[i];
        for (std::size_t j = 0; j < n; ++j) {
            const double* g = row + layer.offset(0, j);
            const std::size_t k = located[j].left;
            out[j] += (g[k + 1] - g[k]) / layer.grid(j).delta() * dz;
        }
    }
}

inline std::vector<double> backprop_targets(const PlfTable& layer, std::span<const Located> located,
                                            std::span<const double> residual) {
    std::vector<double> out(layer.in_dim());
    backprop_targets_into(layer, located, residual, out);
    return out;
}

/// Per-model scratch buffers for record-by-record training.
class Trainer {
public:
    explicit Trainer(const KanModel& model) : trace_(model) {
        residuals_.resize(model.layer_count());
        for (std::size_t l = 0; l < model.layer_count(); ++l)
            residuals_[l].resize(model.layer(l).out_dim());
    }

    /// One record: forward, residuals for every layer from the pre-update
    /// parameters, then the update of every layer. Returns |z - z_hat| before
    /// the update.
    double train_record(KanModel& model, std::span<const double> x, std::span<const double> z,
                        double mu) {
        detail::require_dim(z.size(), model.output_dim(), "train_record target");
        forward_into(model, x, trace_);
        const std::size_t depth = model.layer_count();
        auto& top = residuals_[depth - 1];
        double norm2 = 0.0;
        for (std::size_t i = 0; i < top.size(); ++i) {
            top[i] = z[i] - trace_.outputs[depth - 1][i];
            norm2 += top[i] * top[i];
        }
        for (std::size_t l = depth - 1; l > 0; --l)
            backprop_targets_into(model.layer(l), trace_.located[l], residuals_[l], residuals_[l - 1]);
        if (mu != 0.0)
            for (std::size_t l = 0; l < depth; ++l)
                update_layer(model.layer(l), trace_.located[l], residuals_[l], mu);
        return std::sqrt(norm2);
    }

    const ForwardTrace& trace() const noexcept { return trace_; }
    std::span<const double> residual(std::size_t layer) const noexcept { return residuals_[layer]; }

private:
    ForwardTrace trace_;
    std::vector<std::vector<double>> residuals_;
};

/// Single-record update of `model`. See Trainer::train_record.
inline double train_record(KanModel& model, std::span<const double> x, std::span<const double> z,
                           double mu) {
    for (double v : x)
        if (!std::isfinite(v)) throw InputError("non-finite record input");
    for (double v : z)
        if (!std::isfinite(v)) throw InputError("non-finite record target");
    Trainer trainer(model);
    return trainer.train_record(model, x, z, mu);
}

/// Thrown by train_records when the cancel flag is raised mid-pass.
class Cancelled : public Error {
public:
    Cancelled() : Error("training cancelled") {}
};

/// One pass over `order`; returns the mean prior residual norm.
inline double train_records(KanModel& model, const Dataset& data, std::span<const std::size_t> order,
                            double mu, const std::atomic<bool>* cancel = nullptr) {
    detail::require_dim(data.input_dim(), model.input_dim(), "dataset input dim");
    detail::require_dim(data.output_dim(), model.output_dim(), "dataset output dim");
    Trainer trainer(model);
    double total = 0.0;
    for (std::size_t r : order) {
        if (cancel && cancel->load(std::memory_order_relaxed)) throw Cancelled();
        if (r >= data.size())
            throw InputError("record index " + std::to_string(r) + " out of range");
        total += trainer.train_record(model, data.input(r), data.target(r), mu);
    }
    return order.empty() ? 0.0 : total / static_cast<double>(order.size());
}

struct EpochStats {
    double mean_prior_residual;
    double seconds;
};

/// Record order of pass `epoch`: seeded shuffle or natural order.
inline std::vector<std::size_t> epoch_order(std::size_t records, const TrainConfig& cfg,
                                            std::size_t epoch) {
    if (cfg.shuffle_each_epoch) return record_order(records, cfg.seed, epoch, records);
    std::vector<std::size_t> order(records);
    for (std::size_t i = 0; i < records; ++i) order[i] = i;
    return order;
}

inline EpochStats train_epoch(KanModel& model, const Dataset& data, const TrainConfig& cfg,
                              std::size_t epoch = 0, const std::atomic<bool>* cancel = nullptr) {
    if (data.empty()) throw InputError("cannot train on an empty dataset");
    const auto order = epoch_order(data.size(), cfg, epoch);
    const auto start = std::chrono::steady_clock::now();
    const double mean = train_records(model, data, order, cfg.mu, cancel);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    return {mean, elapsed.count()};
}

/// cfg.epochs consecutive passes (epoch indices 0..epochs-1).
inline std::vector<EpochStats> train(KanModel& model, const Dataset& data, const TrainConfig& cfg) {
    std::vector<EpochStats> stats;
    for (std::size_t e = 0; e < cfg.epochs; ++e) stats.push_back(train_epoch(model, data, cfg, e));
    return stats;
}

/// Model predictions for every record, one vector per output column.
inline std::vector<std::vector<double>> predict_columns(const KanModel& model, const Dataset& data) {
    detail::require_dim(data.input_dim(), model.input_dim(), "dataset input dim");
    std::vector<std::vector<double>> cols(model.output_dim(), std::vector<double>(data.size()));
    ForwardTrace trace(model);
    for (std::size_t r = 0; r < data.size(); ++r) {
        auto out = predict(model, data.input(r), trace);
        for (std::size_t c = 0; c < out.size(); ++c) cols[c][r] = out[c];
    }
    return cols;
}

/// Pearson % between targets and predictions, per output column.
inline std::vector<double> evaluate_pearson(const KanModel& model, const Dataset& data) {
    detail::require_dim(data.output_dim(), model.output_dim(), "dataset output dim");
    const auto predicted = predict_columns(model, data);
    std::vector<double> out;
    for (std::size_t c = 0; c < predicted.size(); ++c)
        out.push_back(pearson_pct(data.target_column(c), predicted[c]));
    return out;
}

/// Mean over output columns of evaluate_pearson.
inline double mean_pearson(const KanModel& model, const Dataset& data) {
    const auto per = evaluate_pearson(model, data);
    double s = 0.0;
    for (double v : per) s += v;
    return s / static_cast<double>(per.size());
}

} // namespace kanmerge
