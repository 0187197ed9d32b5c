#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "plf_table.hpp"

namespace kanmerge {

/// Chain of layers; layer l's out_dim is layer l+1's in_dim.
class KanModel {
public:
    explicit KanModel(std::vector<PlfTable> layers) : layers_(std::move(layers)) {
        if (layers_.empty()) throw InputError("model needs at least one layer");
        for (std::size_t l = 0; l + 1 < layers_.size(); ++l)
            if (layers_[l].out_dim() != layers_[l + 1].in_dim())
                throw DimensionError("layer " + std::to_string(l) + " out_dim " +
                                     std::to_string(layers_[l].out_dim()) + " != layer " +
                                     std::to_string(l + 1) + " in_dim " +
                                     std::to_string(layers_[l + 1].in_dim()));
    }

    std::size_t layer_count() const noexcept { return layers_.size(); }
    std::size_t input_dim() const noexcept { return layers_.front().in_dim(); }
    std::size_t output_dim() const noexcept { return layers_.back().out_dim(); }

    PlfTable& layer(std::size_t l) noexcept { return layers_[l]; }
    const PlfTable& layer(std::size_t l) const noexcept { return layers_[l]; }
    std::span<PlfTable> layers() noexcept { return layers_; }
    std::span<const PlfTable> layers() const noexcept { return layers_; }

    std::size_t parameter_count() const noexcept {
        std::size_t total = 0;
        for (const auto& l : layers_) total += l.parameter_count();
        return total;
    }

    bool same_structure(const KanModel& other) const noexcept {
        if (layers_.size() != other.layers_.size()) return false;
        for (std::size_t l = 0; l < layers_.size(); ++l)
            if (!layers_[l].same_structure(other.layers_[l])) return false;
        return true;
    }

    bool all_finite() const noexcept {
        for (const auto& l : layers_)
            for (double v : l.values())
                if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const KanModel&, const KanModel&) = default;

private:
    std::vector<PlfTable> layers_;
};

/// Intermediates of one forward pass. inputs[l] feeds layer l, outputs[l] is
/// its result, located[l] holds the active segment per input column of layer l.
struct ForwardTrace {
    std::vector<std::vector<double>> inputs;
    std::vector<std::vector<double>> outputs;
    std::vector<std::vector<Located>> located;

    explicit ForwardTrace(const KanModel& model) {
        const std::size_t depth = model.layer_count();
        inputs.resize(depth);
        outputs.resize(depth);
        located.resize(depth);
        for (std::size_t l = 0; l < depth; ++l) {
            inputs[l].resize(model.layer(l).in_dim());
            outputs[l].resize(model.layer(l).out_dim());
            located[l].resize(model.layer(l).in_dim());
        }
    }

    std::span<const double> output() const noexcept { return outputs.back(); }
};

/// Forward pass into a preallocated trace (sized for `model`).
inline void forward_into(const KanModel& model, std::span<const double> x, ForwardTrace& trace) {
    detail::require_dim(x.size(), model.input_dim(), "forward input");
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        std::span<const double> in = l == 0 ? x : std::span<const double>(trace.outputs[l - 1]);
        if (l > 0)
            for (double v : in)
                if (!std::isfinite(v))
                    throw NumericalError("non-finite activation entering layer " + std::to_string(l), 0);
        std::copy(in.begin(), in.end(), trace.inputs[l].begin());
        locate_columns(model.layer(l), in, trace.located[l]);
        eval_located(model.layer(l), trace.located[l], trace.outputs[l]);
    }
}

struct ForwardResult {
    std::vector<double> output;
    ForwardTrace trace;
};

inline ForwardResult forward(const KanModel& model, std::span<const double> x) {
    ForwardTrace trace(model);
    forward_into(model, x, trace);
    std::vector<double> out(trace.output().begin(), trace.output().end());
    return {std::move(out), std::move(trace)};
}

/// Model output only, reusing `trace` as scratch.
inline std::span<const double> predict(const KanModel& model, std::span<const double> x,
                                       ForwardTrace& trace) {
    forward_into(model, x, trace);
    return trace.output();
}

/// Parameter-wise arithmetic mean of structurally identical models.
inline KanModel average_models(std::span<const KanModel> models) {
    if (models.empty()) throw MergeError("cannot average an empty model list");
    const KanModel& first = models.front();
    for (std::size_t t = 1; t < models.size(); ++t) {
        const KanModel& other = models[t];
        if (other.layer_count() != first.layer_count())
            throw MergeError("model " + std::to_string(t) + " has " +
                             std::to_string(other.layer_count()) + " layers, expected " +
                             std::to_string(first.layer_count()));
        for (std::size_t l = 0; l < first.layer_count(); ++l) {
            const PlfTable& a = first.layer(l);
            const PlfTable& b = other.layer(l);
            if (a.out_dim() != b.out_dim() || a.in_dim() != b.in_dim())
                throw MergeError("model " + std::to_string(t) + " layer " + std::to_string(l) +
                                 " has shape " + std::to_string(b.out_dim()) + "x" +
                                 std::to_string(b.in_dim()) + ", expected " +
                                 std::to_string(a.out_dim()) + "x" + std::to_string(a.in_dim()));
            for (std::size_t j = 0; j < a.in_dim(); ++j)
                if (!(a.grid(j) == b.grid(j)))
                    throw MergeError("model " + std::to_string(t) + " layer " + std::to_string(l) +
                                     " column " + std::to_string(j) + " has a different grid");
        }
    }

    KanModel merged = first;
    if (models.size() == 1) return merged;
    // Each parameter is summed in ascending order (compensated) so the result does
    // not depend on the order of `models` and stays within one rounding unit of the
    // true mean; a parameter equal across all models is kept as is.
    const double count = static_cast<double>(models.size());
    std::vector<double> column(models.size());
    for (std::size_t l = 0; l < merged.layer_count(); ++l) {
        auto out = merged.layer(l).values();
        for (std::size_t p = 0; p < out.size(); ++p) {
            for (std::size_t t = 0; t < models.size(); ++t) column[t] = models[t].layer(l).values()[p];
            std::sort(column.begin(), column.end());
            if (column.front() == column.back()) {
                out[p] = column.front();
                continue;
            }
            double sum = 0.0, comp = 0.0;
            for (double v : column) {
                const double t = sum + v;
                comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
                sum = t;
            }
            out[p] = (sum + comp) / count;
        }
    }
    return merged;
}

} // namespace kanmerge
