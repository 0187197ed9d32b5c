#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "training.hpp"

namespace kanmerge {

/// threads * batch_size * rounds records are processed in total.
struct ParallelPlan {
    std::size_t threads = 1;
    std::size_t rounds = 1;
    std::size_t batch_size = 1;
    std::uint64_t seed = 0;
    double mu = 0.5;

    std::size_t total_records() const noexcept { return threads * rounds * batch_size; }

    void validate(std::size_t records) const {
        if (threads < 1 || rounds < 1 || batch_size < 1)
            throw InputError("threads, rounds and batch size must all be at least 1");
        if (!(mu >= 0.0 && mu <= 1.0)) throw InputError("mu must lie in [0, 1]");
        if (threads * batch_size > records)
            throw InputError("plan needs " + std::to_string(threads * batch_size) +
                             " records per round but the dataset has " + std::to_string(records));
    }
};

/// `threads` disjoint batches of exactly `batch_size` record indices: a prefix
/// of the seeded shuffle for this round, cut into contiguous pieces. With one
/// thread and batch_size = records this is the epoch order train_epoch uses
/// for epoch `round` under the same seed.
inline std::vector<std::vector<std::size_t>> partition(std::size_t records, std::size_t threads,
                                                       std::size_t batch_size, std::size_t round,
                                                       std::uint64_t seed) {
    if (threads < 1 || batch_size < 1) throw InputError("threads and batch size must be positive");
    if (threads * batch_size > records)
        throw InputError("insufficient records: need " + std::to_string(threads * batch_size) +
                         ", have " + std::to_string(records));
    const auto sample = record_order(records, seed, round, threads * batch_size);
    std::vector<std::vector<std::size_t>> batches(threads);
    for (std::size_t t = 0; t < threads; ++t)
        batches[t].assign(sample.begin() + static_cast<std::ptrdiff_t>(t * batch_size),
                          sample.begin() + static_cast<std::ptrdiff_t>((t + 1) * batch_size));
    return batches;
}

inline std::vector<std::vector<std::size_t>> partition(const Dataset& data, std::size_t threads,
                                                       std::size_t batch_size, std::size_t round,
                                                       std::uint64_t seed) {
    return partition(data.size(), threads, batch_size, round, seed);
}

/// A worker threw while training its clone.
class WorkerError : public Error {
public:
    WorkerError(std::size_t worker, const std::string& what)
        : Error("worker " + std::to_string(worker) + " failed: " + what), worker_(worker) {}

    std::size_t worker() const noexcept { return worker_; }

private:
    std::size_t worker_;
};

struct RoundOptions {
    const std::atomic<bool>* cancel = nullptr;
    /// When set, receives the trained clones before they are merged.
    std::vector<KanModel>* retained_clones = nullptr;
};

/// One round: a private copy of `model` per batch, each trained for one pass
/// over its batch on its own thread, then averaged once every worker has
/// finished. `model` is left untouched.
inline KanModel run_round(const KanModel& model, const Dataset& data,
                          const std::vector<std::vector<std::size_t>>& batches, double mu,
                          const RoundOptions& options = {}) {
    if (batches.empty()) throw InputError("run_round needs at least one batch");
    detail::require_dim(data.input_dim(), model.input_dim(), "dataset input dim");
    detail::require_dim(data.output_dim(), model.output_dim(), "dataset output dim");

    std::vector<KanModel> clones(batches.size(), model);
    std::vector<std::exception_ptr> failures(batches.size());
    auto work = [&](std::size_t w) {
        try {
            train_records(clones[w], data, batches[w], mu, options.cancel);
        } catch (...) {
            failures[w] = std::current_exception();
        }
    };
    if (batches.size() == 1) {
        work(0);
    } else {
        std::vector<std::jthread> workers;
        workers.reserve(batches.size());
        for (std::size_t w = 0; w < batches.size(); ++w) workers.emplace_back(work, w);
    }

    for (std::size_t w = 0; w < failures.size(); ++w) {
        if (!failures[w]) continue;
        try {
            std::rethrow_exception(failures[w]);
        } catch (const Cancelled&) {
            throw;
        } catch (const NumericalError& e) {
            throw NumericalError("worker " + std::to_string(w) + ": " + e.what(), e.round());
        } catch (const std::exception& e) {
            throw WorkerError(w, e.what());
        }
    }
    KanModel merged = average_models(clones);
    if (options.retained_clones) *options.retained_clones = std::move(clones);
    return merged;
}

struct RoundReport {
    std::size_t round = 0;
    std::vector<std::size_t> batch_records;
    double pearson_pct = 0.0;
    std::vector<double> pearson_per_output;
    double seconds = 0.0;
};

struct ParallelResult {
    KanModel model;
    std::vector<RoundReport> rounds;
    /// False when cancelled; `model` then holds the last fully merged round.
    bool completed = true;

    double training_seconds() const noexcept {
        double s = 0.0;
        for (const auto& r : rounds) s += r.seconds;
        return s;
    }
};

struct ParallelOptions {
    const std::atomic<bool>* cancel = nullptr;
    /// Skip validation between rounds; only the final model is evaluated.
    bool validate_each_round = true;
};

/// plan.rounds rounds of partition + run_round starting from `model`.
/// Round timing covers cloning, training and merging; validation is excluded.
inline ParallelResult train_parallel(const KanModel& model, const Dataset& data, const Dataset& val,
                                     const ParallelPlan& plan, const ParallelOptions& options = {}) {
    plan.validate(data.size());
    if (!model.all_finite()) throw NumericalError("initial model has non-finite parameters", 0);
    ParallelResult result{model, {}, true};
    for (std::size_t round = 0; round < plan.rounds; ++round) {
        const auto batches = partition(data, plan.threads, plan.batch_size, round, plan.seed);
        const auto start = std::chrono::steady_clock::now();
        KanModel merged = result.model;
        try {
            merged = run_round(result.model, data, batches, plan.mu, {options.cancel, nullptr});
        } catch (const Cancelled&) {
            result.completed = false;
            return result;
        } catch (const NumericalError& e) {
            throw NumericalError(e.what(), round);
        }
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        if (!merged.all_finite())
            throw NumericalError("non-finite parameters after round " + std::to_string(round), round);
        result.model = std::move(merged);

        RoundReport report;
        report.round = round;
        for (const auto& b : batches) report.batch_records.push_back(b.size());
        report.seconds = elapsed.count();
        if (options.validate_each_round || round + 1 == plan.rounds) {
            report.pearson_per_output = evaluate_pearson(result.model, val);
            double s = 0.0;
            for (double v : report.pearson_per_output) s += v;
            report.pearson_pct = s / static_cast<double>(report.pearson_per_output.size());
        }
        result.rounds.push_back(std::move(report));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Scaling experiments.

/// One CSV row. `ratio` is the speedup (strong) or efficiency (weak) against
/// the 1-thread row.
struct ScalingRow {
    std::size_t threads = 1;
    std::size_t rounds = 1;
    std::size_t batch_size = 1;
    double pearson_pct = 0.0;
    double time_s = 0.0;
    double ratio = 1.0;

    friend bool operator==(const ScalingRow&, const ScalingRow&) = default;
};

struct ScalingCell {
    std::size_t threads;
    std::size_t rounds;
    std::size_t batch_size;
};

using LogFn = std::function<void(const std::string&)>;

namespace detail {

/// Empty when cancelled.
inline std::optional<ScalingRow> run_cell(const KanModel& init, const Dataset& data, const Dataset& val,
                                          const ScalingCell& cell, double mu, std::uint64_t seed,
                                          const std::atomic<bool>* cancel) {
    ParallelPlan plan{cell.threads, cell.rounds, cell.batch_size, seed, mu};
    ParallelOptions opts;
    opts.cancel = cancel;
    opts.validate_each_round = false;
    const auto result = train_parallel(init, data, val, plan, opts);
    if (!result.completed) return std::nullopt;
    return ScalingRow{cell.threads, cell.rounds, cell.batch_size, result.rounds.back().pearson_pct,
                      result.training_seconds(), 1.0};
}

inline void require_reference(std::span<const std::size_t> threads) {
    for (auto t : threads)
        if (t == 1) return;
    throw InputError("scaling grid needs a 1-thread cell as the reference");
}

/// Ratios against the 1-thread row; 0 when that row is missing (cancelled run).
inline void fill_ratios(std::vector<ScalingRow>& rows) {
    const ScalingRow* base = nullptr;
    for (const auto& r : rows)
        if (r.threads == 1) {
            base = &r;
            break;
        }
    const double t1 = base ? base->time_s : 0.0;
    for (auto& r : rows) r.ratio = base && r.time_s > 0.0 ? t1 / r.time_s : 0.0;
}

} // namespace detail

/// Fixed total work split over threads: every cell must process the same
/// threads * rounds * batch_size records. Cells needing more records per round
/// than the dataset holds are skipped and reported through `log`.
/// Speedup S = t(1) / t(n).
inline std::vector<ScalingRow> measure_strong_scaling(const KanModel& init, const Dataset& data,
                                                      const Dataset& val,
                                                      const std::vector<ScalingCell>& cells,
                                                      double mu, std::uint64_t seed,
                                                      const LogFn& log = {},
                                                      const std::atomic<bool>* cancel = nullptr) {
    if (cells.empty()) throw InputError("strong scaling grid is empty");
    const std::size_t work = cells.front().threads * cells.front().rounds * cells.front().batch_size;
    for (const auto& c : cells)
        if (c.threads * c.rounds * c.batch_size != work)
            throw InputError("strong scaling cell " + std::to_string(c.threads) + "x" +
                             std::to_string(c.rounds) + "x" + std::to_string(c.batch_size) +
                             " processes " + std::to_string(c.threads * c.rounds * c.batch_size) +
                             " records, expected " + std::to_string(work));
    {
        std::vector<std::size_t> threads;
        for (const auto& c : cells)
            if (c.threads * c.batch_size <= data.size()) threads.push_back(c.threads);
        detail::require_reference(threads);
    }
    std::vector<ScalingRow> rows;
    for (const auto& c : cells) {
        if (c.threads < 1 || c.rounds < 1 || c.batch_size < 1 || c.threads * c.batch_size > data.size()) {
            if (log)
                log("skipping cell threads=" + std::to_string(c.threads) + " batch=" +
                    std::to_string(c.batch_size) + ": needs " + std::to_string(c.threads * c.batch_size) +
                    " records per round, dataset has " + std::to_string(data.size()));
            continue;
        }
        auto row = detail::run_cell(init, data, val, c, mu, seed, cancel);
        if (!row) break;
        rows.push_back(*row);
    }
    detail::fill_ratios(rows);
    return rows;
}

/// Per-thread work fixed at rounds * batch_size; total work grows with the
/// thread count. Efficiency E = t(1) / t(n).
inline std::vector<ScalingRow> measure_weak_scaling(const KanModel& init, const Dataset& data,
                                                    const Dataset& val,
                                                    const std::vector<std::size_t>& thread_counts,
                                                    std::size_t rounds, std::size_t batch_size,
                                                    double mu, std::uint64_t seed,
                                                    const LogFn& log = {},
                                                    const std::atomic<bool>* cancel = nullptr) {
    if (thread_counts.empty()) throw InputError("weak scaling thread list is empty");
    {
        std::vector<std::size_t> feasible;
        for (auto t : thread_counts)
            if (t >= 1 && t * batch_size <= data.size()) feasible.push_back(t);
        detail::require_reference(feasible);
    }
    std::vector<ScalingRow> rows;
    for (std::size_t t : thread_counts) {
        if (t < 1 || t * batch_size > data.size()) {
            if (log)
                log("skipping threads=" + std::to_string(t) + ": needs " +
                    std::to_string(t * batch_size) + " records per round, dataset has " +
                    std::to_string(data.size()));
            continue;
        }
        auto row = detail::run_cell(init, data, val, {t, rounds, batch_size}, mu, seed, cancel);
        if (!row) break;
        rows.push_back(*row);
    }
    detail::fill_ratios(rows);
    return rows;
}

inline constexpr const char* kScalingCsvHeader =
    "threads,rounds,batch_size,pearson_pct,time_s,speedup_or_efficiency";

inline void write_scaling_csv(std::ostream& os, const std::vector<ScalingRow>& rows) {
    os << kScalingCsvHeader << '\n';
    for (const auto& r : rows)
        os << r.threads << ',' << r.rounds << ',' << r.batch_size << ',' << format_real(r.pearson_pct)
           << ',' << format_real(r.time_s) << ',' << format_real(r.ratio) << '\n';
}

inline std::vector<ScalingRow> read_scaling_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || detail::trim(line) != kScalingCsvHeader)
        throw DataError("expected scaling CSV header", 1);
    std::vector<ScalingRow> rows;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        auto t = detail::trim(line);
        if (t.empty()) continue;
        auto f = detail::split_commas(t);
        if (f.size() != 6) throw DataError("expected 6 fields", line_no);
        ScalingRow r;
        auto as_size = [&](std::string_view s, std::size_t& out) {
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
            if (ec != std::errc() || p != s.data() + s.size())
                throw DataError("bad integer '" + std::string(s) + "'", line_no);
        };
        auto as_real = [&](std::string_view s, double& out) {
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
            if (ec != std::errc() || p != s.data() + s.size())
                throw DataError("bad number '" + std::string(s) + "'", line_no);
        };
        as_size(f[0], r.threads);
        as_size(f[1], r.rounds);
        as_size(f[2], r.batch_size);
        as_real(f[3], r.pearson_pct);
        as_real(f[4], r.time_s);
        as_real(f[5], r.ratio);
        rows.push_back(r);
    }
    return rows;
}

/// Per-round CSV emitted by train-par.
inline void write_round_csv(std::ostream& os, const std::vector<RoundReport>& rounds,
                            std::size_t outputs) {
    os << "round,workers,records,pearson_pct";
    for (std::size_t c = 1; c <= outputs; ++c) os << ",pearson_z" << c;
    os << ",time_s\n";
    for (const auto& r : rounds) {
        std::size_t records = 0;
        for (auto b : r.batch_records) records += b;
        os << r.round << ',' << r.batch_records.size() << ',' << records << ','
           << format_real(r.pearson_pct);
        for (double v : r.pearson_per_output) os << ',' << format_real(v);
        os << ',' << format_real(r.seconds) << '\n';
    }
}

} // namespace kanmerge
