#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "training.hpp"

namespace kanmerge {

/// Contiguous block of addends trained together toward share * z.
struct AddendGroup {
    std::size_t index = 0;
    std::size_t first = 0;
    std::size_t count = 0;
    double share = 0.0;

    friend bool operator==(const AddendGroup&, const AddendGroup&) = default;
};

/// Near-equal contiguous partition of n addends; earlier groups take the
/// extra member when n is not divisible.
inline std::vector<AddendGroup> split_addends(std::size_t n, std::size_t groups) {
    if (groups < 1 || groups > n)
        throw InputError("group count must lie in [1, " + std::to_string(n) + "], got " +
                         std::to_string(groups));
    std::vector<AddendGroup> out;
    out.reserve(groups);
    const std::size_t base = n / groups;
    const std::size_t extra = n % groups;
    std::size_t first = 0;
    for (std::size_t g = 0; g < groups; ++g) {
        const std::size_t count = base + (g < extra ? 1 : 0);
        out.push_back({g, first, count, static_cast<double>(count) / static_cast<double>(n)});
        first += count;
    }
    return out;
}

namespace detail {

inline void require_addend_structure(const KanModel& model) {
    if (model.layer_count() != 2 || model.output_dim() != 1)
        throw InputError("pretraining needs a two-layer model with a scalar output, got " +
                         std::to_string(model.layer_count()) + " layers and " +
                         std::to_string(model.output_dim()) + " outputs");
}

/// Two-layer model made of addends [first, first + count).
inline KanModel extract_group(const KanModel& model, const AddendGroup& g) {
    const PlfTable& inner = model.layer(0);
    const PlfTable& outer = model.layer(1);
    PlfTable sub_inner(g.count, inner.grids());
    for (std::size_t i = 0; i < g.count; ++i)
        for (std::size_t j = 0; j < inner.in_dim(); ++j) {
            auto src = inner.function(g.first + i, j);
            std::copy(src.begin(), src.end(), sub_inner.function(i, j).begin());
        }
    std::vector<Grid> outer_grids(outer.grids().begin() + static_cast<std::ptrdiff_t>(g.first),
                                  outer.grids().begin() + static_cast<std::ptrdiff_t>(g.first + g.count));
    PlfTable sub_outer(1, std::move(outer_grids));
    for (std::size_t j = 0; j < g.count; ++j) {
        auto src = outer.function(0, g.first + j);
        std::copy(src.begin(), src.end(), sub_outer.function(0, j).begin());
    }
    std::vector<PlfTable> layers;
    layers.push_back(std::move(sub_inner));
    layers.push_back(std::move(sub_outer));
    return KanModel(std::move(layers));
}

inline void write_back_group(KanModel& model, const KanModel& sub, const AddendGroup& g) {
    PlfTable& inner = model.layer(0);
    PlfTable& outer = model.layer(1);
    for (std::size_t i = 0; i < g.count; ++i)
        for (std::size_t j = 0; j < inner.in_dim(); ++j) {
            auto src = sub.layer(0).function(i, j);
            std::copy(src.begin(), src.end(), inner.function(g.first + i, j).begin());
        }
    for (std::size_t j = 0; j < g.count; ++j) {
        auto src = sub.layer(1).function(0, j);
        std::copy(src.begin(), src.end(), outer.function(0, g.first + j).begin());
    }
}

inline void train_group(KanModel& sub, const Dataset& data, const TrainConfig& cfg, double share) {
    Trainer trainer(sub);
    double target = 0.0;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        const auto order = epoch_order(data.size(), cfg, e);
        for (std::size_t r : order) {
            target = share * data.target(r)[0];
            trainer.train_record(sub, data.input(r), std::span<const double>(&target, 1), cfg.mu);
        }
    }
}

} // namespace detail

/// Trains each addend group as an independent two-layer sub-model toward
/// share * z for cfg.epochs passes over the full dataset, then reassembles the
/// groups into a copy of `model`. Groups run on up to `threads` workers.
inline KanModel pretrain(const KanModel& model, const Dataset& data, std::size_t groups,
                         const TrainConfig& cfg, std::size_t threads = 1) {
    detail::require_addend_structure(model);
    detail::require_dim(data.input_dim(), model.input_dim(), "dataset input dim");
    detail::require_dim(data.output_dim(), 1, "dataset output dim");
    if (data.empty()) throw InputError("cannot pretrain on an empty dataset");
    const auto plan = split_addends(model.layer(1).in_dim(), groups);

    std::vector<KanModel> subs;
    subs.reserve(plan.size());
    for (const auto& g : plan) subs.push_back(detail::extract_group(model, g));

    std::vector<std::exception_ptr> failures(plan.size());
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, plan.size());
    auto work = [&](std::size_t w) {
        for (std::size_t g = w; g < plan.size(); g += workers) {
            try {
                detail::train_group(subs[g], data, cfg, plan[g].share);
            } catch (...) {
                failures[g] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    }
    for (auto& f : failures)
        if (f) std::rethrow_exception(f);

    KanModel out = model;
    for (std::size_t g = 0; g < plan.size(); ++g) detail::write_back_group(out, subs[g], plan[g]);
    return out;
}

} // namespace kanmerge
