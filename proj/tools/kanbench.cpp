// kanbench: dataset generation, sequential and parallel KAN training,
// evaluation and scaling benchmarks.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure,
// 130 interrupted (partial outputs are flagged incomplete in the manifest).

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kanmerge.hpp"

#ifndef KANMERGE_VERSION
#define KANMERGE_VERSION "dev"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace kanmerge;

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_interrupt(int) { g_interrupted.store(true); }

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4, kInterrupted = 130 };

class UsageError : public Error {
public:
    using Error::Error;
};

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json dataset_info(const Dataset& d) {
    return {{"records", d.size()},
            {"inputs", d.input_dim()},
            {"outputs", d.output_dim()},
            {"fingerprint", hex64(d.fingerprint())}};
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write '" + path.string() + "'");
    os << j.dump(2) << '\n';
}

std::string manifest_path(const std::string& output) { return output + ".manifest.json"; }

// Options shared by the training and benchmark commands.
struct DataArgs {
    std::string task;
    std::size_t train_count = 100'000;
    std::size_t val_count = 20'000;
    std::string data_path;
    std::string val_path;
    double lo = 0.0;
    double hi = 1.0;
};

void add_data_options(CLI::App* cmd, DataArgs& a) {
    cmd->add_option("--task", a.task, "Generate data in memory: det4, det5 or tetra");
    cmd->add_option("--train", a.train_count, "Training records when generating")->capture_default_str();
    cmd->add_option("--val", a.val_count, "Validation records when generating")->capture_default_str();
    cmd->add_option("--data", a.data_path, "Training set file (.csv or .bin)");
    cmd->add_option("--val-data", a.val_path, "Validation set file (.csv or .bin)");
    cmd->add_option("--lo", a.lo, "Lower bound of input values")->capture_default_str();
    cmd->add_option("--hi", a.hi, "Upper bound of input values")->capture_default_str();
}

Dataset read_any(const std::string& path) {
    if (fs::path(path).extension() == ".bin") return load_dataset_binary(path);
    return load_dataset(path);
}

struct Data {
    Dataset train;
    Dataset val;
    json info;
};

Data obtain_data(const DataArgs& a, std::uint64_t seed) {
    if (!a.data_path.empty()) {
        if (a.val_path.empty()) throw UsageError("--data requires --val-data");
        Data d{read_any(a.data_path), read_any(a.val_path), {}};
        if (d.train.input_dim() != d.val.input_dim() || d.train.output_dim() != d.val.output_dim())
            throw DataError("training and validation files have different columns");
        d.info = {{"source", "files"},
                  {"train_path", a.data_path},
                  {"val_path", a.val_path},
                  {"train", dataset_info(d.train)},
                  {"val", dataset_info(d.val)}};
        return d;
    }
    if (a.task.empty()) throw UsageError("either --task or --data/--val-data is required");
    TaskSpec spec;
    spec.kind = parse_task(a.task);
    spec.train_count = a.train_count;
    spec.val_count = a.val_count;
    spec.seed = seed;
    spec.lo = a.lo;
    spec.hi = a.hi;
    if (spec.train_count < 1 || spec.val_count < 2) throw UsageError("need at least 1 train and 2 val records");
    auto [train, val] = generate_task(spec);
    Data d{std::move(train), std::move(val), {}};
    d.info = {{"source", "generated"},
              {"task", a.task},
              {"train", dataset_info(d.train)},
              {"val", dataset_info(d.val)}};
    return d;
}

struct ModelArgs {
    std::string arch;
    std::optional<double> mu;
    std::uint64_t seed = 1;
};

void add_model_options(CLI::App* cmd, ModelArgs& m) {
    cmd->add_option("--arch", m.arch, "Preset (det4, det5, tetra) or custom p:m/nodes,m/nodes,...");
    cmd->add_option("--mu", m.mu, "Damping factor in [0, 1] (default: preset recommendation, else 0.5)");
    cmd->add_option("--seed", m.seed, "Seed for every random choice")->capture_default_str();
}

std::string resolve_arch_name(const ModelArgs& m, const DataArgs& d) {
    if (!m.arch.empty()) return m.arch;
    if (!d.task.empty()) return d.task;
    throw UsageError("--arch is required when training from files");
}

double resolve_mu(const ModelArgs& m, const std::string& arch_name) {
    if (m.mu) {
        if (!(*m.mu >= 0.0 && *m.mu <= 1.0)) throw UsageError("--mu must lie in [0, 1]");
        return *m.mu;
    }
    for (const auto& p : {det4_preset(), det5_preset(), tetra_preset()})
        if (p.name == arch_name) return p.recommended_mu;
    return 0.5;
}

KanModel build_model(const std::string& arch_name, const Dataset& train, const DataArgs& d,
                     std::uint64_t seed) {
    const Architecture arch = parse_architecture(arch_name);
    if (arch.input_dim != train.input_dim() || arch.output_dim() != train.output_dim())
        throw DimensionError("architecture " + arch_name + " maps " + std::to_string(arch.input_dim) +
                             " -> " + std::to_string(arch.output_dim()) + " but the data has " +
                             std::to_string(train.input_dim()) + " inputs and " +
                             std::to_string(train.output_dim()) + " outputs");
    const auto tr = padded_target_range(train);
    return init_model(arch, {d.lo, d.hi}, {tr.lo, tr.hi}, seed);
}

json pearson_json(const std::vector<double>& per) {
    json arr = json::array();
    for (double v : per) arr.push_back(v);
    return arr;
}

std::string fmt_pearsons(const std::vector<double>& per) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(3);
    for (std::size_t i = 0; i < per.size(); ++i) os << (i ? " " : "") << per[i];
    return os.str();
}

json base_manifest(const std::string& command, const std::vector<std::string>& argv) {
    return {{"tool", "kanbench"}, {"version", KANMERGE_VERSION}, {"command", command}, {"argv", argv}};
}

void warn_oversubscription(std::size_t max_threads) {
    const unsigned cores = std::thread::hardware_concurrency();
    std::cout << "detected cores: " << cores << '\n';
    if (cores != 0 && max_threads > cores)
        std::cerr << "warning: " << max_threads << " threads requested but only " << cores
                  << " cores detected; timings will not reflect parallel speedup\n";
}

std::vector<std::size_t> parse_size_list(const std::string& text, const char* what) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t v = 0;
        auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || p != item.data() + item.size() || v == 0)
            throw UsageError(std::string("bad ") + what + " list '" + text + "'");
        out.push_back(v);
    }
    if (out.empty()) throw UsageError(std::string("empty ") + what + " list");
    return out;
}

// ---------------------------------------------------------------------------

struct GenArgs {
    std::string task;
    std::size_t train_count = 100'000;
    std::size_t val_count = 20'000;
    std::uint64_t seed = 1;
    std::string out = ".";
    double lo = 0.0;
    double hi = 1.0;
    bool binary = false;
};

int cmd_gen(const GenArgs& a, const std::vector<std::string>& argv) {
    TaskSpec spec;
    spec.kind = parse_task(a.task);
    spec.train_count = a.train_count;
    spec.val_count = a.val_count;
    spec.seed = a.seed;
    spec.lo = a.lo;
    spec.hi = a.hi;
    if (spec.train_count < 1 || spec.val_count < 1) throw UsageError("record counts must be positive");
    auto [train, val] = generate_task(spec);

    fs::create_directories(a.out);
    const fs::path dir(a.out);
    const auto train_path = dir / (a.task + "_train_" + std::to_string(a.train_count) + ".csv");
    const auto val_path = dir / (a.task + "_val_" + std::to_string(a.val_count) + ".csv");
    save_dataset(train_path.string(), train);
    save_dataset(val_path.string(), val);
    json files = {train_path.string(), val_path.string()};
    if (a.binary) {
        auto tb = fs::path(train_path).replace_extension(".bin");
        auto vb = fs::path(val_path).replace_extension(".bin");
        save_dataset_binary(tb.string(), train);
        save_dataset_binary(vb.string(), val);
        files.push_back(tb.string());
        files.push_back(vb.string());
    }

    const auto range = target_range(train);
    std::cout << "train: " << train.size() << " records -> " << train_path.string() << '\n'
              << "val:   " << val.size() << " records -> " << val_path.string() << '\n'
              << "inputs " << train.input_dim() << ", outputs " << train.output_dim()
              << ", target range [" << format_real(range.lo) << ", " << format_real(range.hi) << "]\n";

    json m = base_manifest("gen", argv);
    m["flags"] = {{"task", a.task}, {"train", a.train_count}, {"val", a.val_count},
                  {"lo", a.lo},     {"hi", a.hi},            {"binary", a.binary}};
    m["seeds"] = {{"seed", a.seed}};
    m["datasets"] = {{"train", dataset_info(train)}, {"val", dataset_info(val)}};
    m["outputs"] = files;
    m["complete"] = true;
    write_json(dir / (a.task + "_gen.manifest.json"), m);
    return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    DataArgs data;
    ModelArgs model;
    std::size_t epochs = 10;
    std::size_t pretrain_groups = 0;
    std::size_t threads = 1;
    std::string out = "model.kanm";
};

/// Optional addend-group pretraining; returns its wall time.
double maybe_pretrain(KanModel& model, const Dataset& train, std::size_t groups, double mu,
                      std::uint64_t seed, std::size_t threads, json& results) {
    if (groups == 0) return 0.0;
    const auto start = std::chrono::steady_clock::now();
    TrainConfig cfg{mu, 1, seed, true};
    model = pretrain(model, train, groups, cfg, threads);
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    results["pretrain_groups"] = groups;
    return dt.count();
}

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv) {
    const auto data = obtain_data(a.data, a.model.seed);
    const std::string arch_name = resolve_arch_name(a.model, a.data);
    const double mu = resolve_mu(a.model, arch_name);
    KanModel model = build_model(arch_name, data.train, a.data, a.model.seed);
    std::cout << "architecture " << arch_name << ": " << model.parameter_count() << " parameters, mu "
              << mu << '\n';

    json results;
    json timing;
    const double pre_s = maybe_pretrain(model, data.train, a.pretrain_groups, mu, a.model.seed,
                                        a.threads, results);
    if (a.pretrain_groups) {
        timing["pretrain_s"] = pre_s;
        const auto per = evaluate_pearson(model, data.val);
        results["pretrain_pearson_pct"] = pearson_json(per);
        std::cout << "pretrain (" << a.pretrain_groups << " groups): val pearson " << fmt_pearsons(per)
                  << ", " << pre_s << " s\n";
    }

    TrainConfig cfg{mu == 0.0 ? 1.0 : mu, 1, a.model.seed, true};
    json epochs = json::array();
    double train_s = 0.0;
    bool complete = true;
    for (std::size_t e = 0; e < a.epochs; ++e) {
        KanModel before = model;
        EpochStats st{};
        try {
            if (mu == 0.0) {
                const auto order = epoch_order(data.train.size(), cfg, e);
                const auto start = std::chrono::steady_clock::now();
                st.mean_prior_residual = train_records(model, data.train, order, 0.0, &g_interrupted);
                st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            } else {
                st = train_epoch(model, data.train, cfg, e, &g_interrupted);
            }
        } catch (const Cancelled&) {
            model = std::move(before);
            complete = false;
            break;
        } catch (const NumericalError& ex) {
            throw NumericalError(ex.what(), e);
        }
        if (!model.all_finite()) throw NumericalError("non-finite parameters after epoch " + std::to_string(e), e);
        train_s += st.seconds;
        const auto per = evaluate_pearson(model, data.val);
        std::cout << "epoch " << e + 1 << ": mean residual " << format_real(st.mean_prior_residual)
                  << ", val pearson " << fmt_pearsons(per) << ", " << st.seconds << " s\n";
        epochs.push_back({{"epoch", e + 1}, {"mean_prior_residual", st.mean_prior_residual},
                          {"val_pearson_pct", pearson_json(per)}});
    }

    const auto final_per = evaluate_pearson(model, data.val);
    std::cout << "final val pearson " << fmt_pearsons(final_per) << ", training " << train_s << " s\n";
    save_model(a.out, model);

    results["epochs"] = epochs;
    results["final_val_pearson_pct"] = pearson_json(final_per);
    results["model_file"] = a.out;
    timing["train_s"] = train_s;

    json m = base_manifest("train", argv);
    m["flags"] = {{"arch", arch_name}, {"mu", mu}, {"epochs", a.epochs},
                  {"pretrain_groups", a.pretrain_groups}, {"threads", a.threads},
                  {"lo", a.data.lo}, {"hi", a.data.hi}};
    m["seeds"] = {{"seed", a.model.seed}};
    m["datasets"] = data.info;
    m["results"] = results;
    m["timing"] = timing;
    m["complete"] = complete;
    write_json(manifest_path(a.out), m);
    return complete ? kOk : kInterrupted;
}

// ---------------------------------------------------------------------------

struct TrainParArgs {
    TrainArgs base;
    std::size_t rounds = 10;
    std::size_t batch = 0;
    std::string csv;
};

int cmd_train_par(const TrainParArgs& a, const std::vector<std::string>& argv) {
    const auto data = obtain_data(a.base.data, a.base.model.seed);
    const std::string arch_name = resolve_arch_name(a.base.model, a.base.data);
    const double mu = resolve_mu(a.base.model, arch_name);
    KanModel model = build_model(arch_name, data.train, a.base.data, a.base.model.seed);
    warn_oversubscription(a.base.threads);

    const std::size_t batch = a.batch ? a.batch : data.train.size() / a.base.threads;
    ParallelPlan plan{a.base.threads, a.rounds, batch, a.base.model.seed, mu};
    try {
        plan.validate(data.train.size());
    } catch (const InputError& e) {
        throw UsageError(std::string("infeasible plan: ") + e.what());
    }
    std::cout << "architecture " << arch_name << ": " << model.parameter_count() << " parameters; "
              << plan.threads << " threads x " << plan.rounds << " rounds x " << plan.batch_size
              << " records = " << plan.total_records() << " records, mu " << mu << '\n';

    json results;
    json timing;
    const double pre_s = maybe_pretrain(model, data.train, a.base.pretrain_groups, mu,
                                        a.base.model.seed, a.base.threads, results);
    if (a.base.pretrain_groups) timing["pretrain_s"] = pre_s;

    ParallelOptions opts;
    opts.cancel = &g_interrupted;
    const auto res = train_parallel(model, data.train, data.val, plan, opts);
    for (const auto& r : res.rounds)
        std::cout << "round " << r.round + 1 << ": val pearson " << fmt_pearsons(r.pearson_per_output)
                  << ", " << r.seconds << " s\n";
    std::cout << "training " << res.training_seconds() << " s" << (res.completed ? "" : " (interrupted)")
              << '\n';

    save_model(a.base.out, res.model);
    const std::string csv = a.csv.empty() ? a.base.out + ".rounds.csv" : a.csv;
    {
        std::ofstream os(csv);
        if (!os) throw DataError("cannot write '" + csv + "'");
        write_round_csv(os, res.rounds, model.output_dim());
    }

    json rounds = json::array();
    for (const auto& r : res.rounds)
        rounds.push_back({{"round", r.round + 1}, {"val_pearson_pct", pearson_json(r.pearson_per_output)}});
    results["rounds"] = rounds;
    results["model_file"] = a.base.out;
    results["rounds_csv"] = csv;
    timing["train_s"] = res.training_seconds();

    json m = base_manifest("train-par", argv);
    m["flags"] = {{"arch", arch_name}, {"mu", mu}, {"threads", plan.threads}, {"rounds", plan.rounds},
                  {"batch", plan.batch_size}, {"pretrain_groups", a.base.pretrain_groups},
                  {"lo", a.base.data.lo}, {"hi", a.base.data.hi}};
    m["seeds"] = {{"seed", a.base.model.seed}};
    m["datasets"] = data.info;
    m["results"] = results;
    m["timing"] = timing;
    m["complete"] = res.completed;
    write_json(manifest_path(a.base.out), m);
    return res.completed ? kOk : kInterrupted;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string model;
    DataArgs data;
    std::uint64_t seed = 1;
    bool identity = false;
    std::string out;
};

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv) {
    Dataset data(1, 1);
    json data_info;
    if (!a.data.data_path.empty()) {
        data = read_any(a.data.data_path);
        data_info = {{"path", a.data.data_path}, {"data", dataset_info(data)}};
    } else if (!a.data.task.empty()) {
        DataArgs gen = a.data;
        auto generated = obtain_data(gen, a.seed);
        data = std::move(generated.val);
        data_info = generated.info;
    } else {
        throw UsageError("eval needs --data or --task");
    }

    std::vector<double> per;
    json residuals = json::array();
    if (a.identity) {
        for (std::size_t c = 0; c < data.output_dim(); ++c) {
            const auto t = data.target_column(c);
            per.push_back(pearson_pct(t, t));
        }
    } else {
        if (a.model.empty()) throw UsageError("eval needs --model (or --identity)");
        const KanModel model = load_model(a.model);
        if (model.input_dim() != data.input_dim() || model.output_dim() != data.output_dim())
            throw DimensionError("model maps " + std::to_string(model.input_dim()) + " -> " +
                                 std::to_string(model.output_dim()) + " but the data has " +
                                 std::to_string(data.input_dim()) + " inputs and " +
                                 std::to_string(data.output_dim()) + " outputs");
        const auto predicted = predict_columns(model, data);
        for (std::size_t c = 0; c < predicted.size(); ++c) {
            const auto t = data.target_column(c);
            per.push_back(pearson_pct(t, predicted[c]));
            double sum_abs = 0.0, sum_sq = 0.0, max_abs = 0.0;
            for (std::size_t r = 0; r < t.size(); ++r) {
                const double e = t[r] - predicted[c][r];
                sum_abs += std::abs(e);
                sum_sq += e * e;
                max_abs = std::max(max_abs, std::abs(e));
            }
            const double n = static_cast<double>(t.size());
            residuals.push_back({{"mean_abs", sum_abs / n}, {"rms", std::sqrt(sum_sq / n)}, {"max_abs", max_abs}});
        }
    }

    for (std::size_t c = 0; c < per.size(); ++c) {
        std::cout << "z" << c + 1 << ": pearson " << format_real(per[c]) << " %";
        if (!residuals.empty())
            std::cout << ", residual mean_abs " << format_real(residuals[c]["mean_abs"].get<double>())
                      << " rms " << format_real(residuals[c]["rms"].get<double>()) << " max_abs "
                      << format_real(residuals[c]["max_abs"].get<double>());
        std::cout << '\n';
    }

    if (!a.out.empty()) {
        json report = {{"pearson_pct", pearson_json(per)}, {"residuals", residuals}};
        write_json(a.out, report);
        json m = base_manifest("eval", argv);
        m["flags"] = {{"model", a.model}, {"identity", a.identity}};
        m["seeds"] = {{"seed", a.seed}};
        m["datasets"] = data_info;
        m["results"] = report;
        m["complete"] = true;
        write_json(manifest_path(a.out), m);
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
    DataArgs data;
    ModelArgs model;
    std::string threads = "1,2,4";
    std::string rounds = "10";
    std::size_t total = 1'000'000;
    std::string cells;
    std::size_t batch = 10'000;
    std::string out;
    bool train_given = false;
};

void emit_scaling(const std::string& path, const std::vector<ScalingRow>& rows) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write '" + path + "'");
    write_scaling_csv(os, rows);
    write_scaling_csv(std::cout, rows);
}

int finish_bench(const char* command, const BenchArgs& a, const std::vector<std::string>& argv,
                 const Data& data, const std::string& arch_name, double mu, json flags,
                 const std::vector<ScalingRow>& rows, std::size_t expected_rows,
                 const std::vector<std::string>& skipped) {
    const std::string out = a.out.empty() ? std::string(command) + ".csv" : a.out;
    emit_scaling(out, rows);
    const bool complete = !g_interrupted.load();
    json acc = json::array(), timing = json::array();
    for (const auto& r : rows) {
        acc.push_back({{"threads", r.threads}, {"rounds", r.rounds}, {"batch_size", r.batch_size},
                       {"pearson_pct", r.pearson_pct}});
        timing.push_back({{"threads", r.threads}, {"time_s", r.time_s}, {"ratio", r.ratio}});
    }
    flags["arch"] = arch_name;
    flags["mu"] = mu;
    json m = base_manifest(command, argv);
    m["flags"] = flags;
    m["seeds"] = {{"seed", a.model.seed}};
    m["datasets"] = data.info;
    m["results"] = {{"rows", acc}, {"skipped", skipped}, {"csv", out}};
    m["timing"] = timing;
    m["cores"] = std::thread::hardware_concurrency();
    m["complete"] = complete && rows.size() == expected_rows - skipped.size();
    write_json(manifest_path(out), m);
    return complete ? kOk : kInterrupted;
}

int cmd_bench_strong(const BenchArgs& a, const std::vector<std::string>& argv) {
    std::vector<ScalingCell> cells;
    if (!a.cells.empty()) {
        std::stringstream ss(a.cells);
        std::string item;
        while (std::getline(ss, item, ',')) {
            std::size_t t = 0, r = 0, b = 0;
            char x1 = 0, x2 = 0;
            std::istringstream is(item);
            if (!(is >> t >> x1 >> r >> x2 >> b) || x1 != 'x' || x2 != 'x' || t == 0 || r == 0 || b == 0)
                throw UsageError("cell '" + item + "' must be THREADSxROUNDSxBATCH");
            cells.push_back({t, r, b});
        }
    } else {
        for (auto t : parse_size_list(a.threads, "threads"))
            for (auto r : parse_size_list(a.rounds, "rounds")) {
                if (a.total % (t * r) != 0)
                    throw UsageError("threads=" + std::to_string(t) + " rounds=" + std::to_string(r) +
                                     " cannot split " + std::to_string(a.total) +
                                     " records into equal batches");
                cells.push_back({t, r, a.total / (t * r)});
            }
    }
    if (cells.empty()) throw UsageError("empty strong-scaling grid");
    const std::size_t work = cells[0].threads * cells[0].rounds * cells[0].batch_size;
    std::size_t max_threads = 0;
    bool has_reference = false;
    for (const auto& c : cells) {
        if (c.threads * c.rounds * c.batch_size != work)
            throw UsageError("cell " + std::to_string(c.threads) + "x" + std::to_string(c.rounds) + "x" +
                             std::to_string(c.batch_size) + " breaks the fixed total work of " +
                             std::to_string(work) + " records");
        max_threads = std::max(max_threads, c.threads);
        has_reference = has_reference || c.threads == 1;
    }
    if (!has_reference) throw UsageError("strong-scaling grid needs a 1-thread cell");

    const auto data = obtain_data(a.data, a.model.seed);
    const std::string arch_name = resolve_arch_name(a.model, a.data);
    const double mu = resolve_mu(a.model, arch_name);
    const KanModel init = build_model(arch_name, data.train, a.data, a.model.seed);
    warn_oversubscription(max_threads);
    std::cout << "strong scaling: " << cells.size() << " cells, " << work << " records each\n";

    std::vector<std::string> skipped;
    const auto rows = measure_strong_scaling(
        init, data.train, data.val, cells, mu, a.model.seed,
        [&](const std::string& s) {
            std::cerr << s << '\n';
            skipped.push_back(s);
        },
        &g_interrupted);
    json cell_json = json::array();
    for (const auto& c : cells) cell_json.push_back({c.threads, c.rounds, c.batch_size});
    return finish_bench("bench-strong", a, argv, data, arch_name, mu,
                        {{"cells", cell_json}, {"total", work}}, rows, cells.size(), skipped);
}

int cmd_bench_weak(const BenchArgs& a, const std::vector<std::string>& argv) {
    const auto threads = parse_size_list(a.threads, "threads");
    const auto rounds_list = parse_size_list(a.rounds, "rounds");
    if (rounds_list.size() != 1) throw UsageError("bench-weak takes a single --rounds value");
    bool has_reference = false;
    std::size_t max_threads = 0;
    for (auto t : threads) {
        has_reference = has_reference || t == 1;
        max_threads = std::max(max_threads, t);
    }
    if (!has_reference) throw UsageError("weak-scaling thread list needs 1 as the reference");

    DataArgs d = a.data;
    if (!a.train_given && d.data_path.empty()) d.train_count = max_threads * a.batch;
    const auto data = obtain_data(d, a.model.seed);
    const std::string arch_name = resolve_arch_name(a.model, a.data);
    const double mu = resolve_mu(a.model, arch_name);
    const KanModel init = build_model(arch_name, data.train, a.data, a.model.seed);
    warn_oversubscription(max_threads);
    std::cout << "weak scaling: " << rounds_list[0] * a.batch << " records per thread\n";

    std::vector<std::string> skipped;
    const auto rows = measure_weak_scaling(
        init, data.train, data.val, threads, rounds_list[0], a.batch, mu, a.model.seed,
        [&](const std::string& s) {
            std::cerr << s << '\n';
            skipped.push_back(s);
        },
        &g_interrupted);
    json tj = json::array();
    for (auto t : threads) tj.push_back(t);
    return finish_bench("bench-weak", a, argv, data, arch_name, mu,
                        {{"threads", tj}, {"rounds", rounds_list[0]}, {"batch", a.batch}}, rows,
                        threads.size(), skipped);
}

// ---------------------------------------------------------------------------

int run(const std::vector<std::string>& argv);

int cmd_rerun(const std::string& manifest) {
    std::ifstream is(manifest);
    if (!is) throw DataError("cannot open manifest '" + manifest + "'");
    json m;
    try {
        m = json::parse(is);
    } catch (const json::exception& e) {
        throw DataError(manifest + ": " + e.what());
    }
    if (!m.contains("argv") || !m["argv"].is_array()) throw DataError(manifest + ": no argv recorded");
    std::vector<std::string> argv = m["argv"].get<std::vector<std::string>>();
    if (argv.size() > 1 && argv[1] == "rerun") throw DataError("manifest records a rerun");
    return run(argv);
}

int run(const std::vector<std::string>& argv) {
    CLI::App app{"Piecewise-linear Kolmogorov-Arnold network training and scaling benchmarks", "kanbench"};
    app.require_subcommand(1);
    app.set_version_flag("--version", KANMERGE_VERSION);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate train/validation CSV files");
    gen_cmd->add_option("--task", gen.task, "det4, det5 or tetra")->required();
    gen_cmd->add_option("--train", gen.train_count, "Training records")->capture_default_str();
    gen_cmd->add_option("--val", gen.val_count, "Validation records")->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "Seed")->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "Output directory")->capture_default_str();
    gen_cmd->add_option("--lo", gen.lo, "Lower bound of input values")->capture_default_str();
    gen_cmd->add_option("--hi", gen.hi, "Upper bound of input values")->capture_default_str();
    gen_cmd->add_flag("--binary", gen.binary, "Also write binary .bin siblings");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Sequential training");
    add_data_options(train_cmd, train.data);
    add_model_options(train_cmd, train.model);
    train_cmd->add_option("--epochs", train.epochs, "Passes over the training set")->capture_default_str();
    train_cmd->add_option("--pretrain-groups", train.pretrain_groups, "Addend groups for pretraining (0 = off)");
    train_cmd->add_option("--threads", train.threads, "Workers for pretraining")->capture_default_str();
    train_cmd->add_option("--out", train.out, "Model file")->capture_default_str();

    TrainParArgs par;
    par.base.epochs = 0;
    auto* par_cmd = app.add_subcommand("train-par", "Train-and-merge on disjoint batches");
    add_data_options(par_cmd, par.base.data);
    add_model_options(par_cmd, par.base.model);
    par_cmd->add_option("--threads", par.base.threads, "Workers (batches per round)")->capture_default_str();
    par_cmd->add_option("--rounds", par.rounds, "Merge rounds")->capture_default_str();
    par_cmd->add_option("--batch", par.batch, "Records per batch (default: train size / threads)");
    par_cmd->add_option("--pretrain-groups", par.base.pretrain_groups, "Addend groups for pretraining (0 = off)");
    par_cmd->add_option("--out", par.base.out, "Model file")->capture_default_str();
    par_cmd->add_option("--csv", par.csv, "Per-round CSV (default: <out>.rounds.csv)");

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "Per-output Pearson and residual statistics");
    eval_cmd->add_option("--model", eval.model, "Model file");
    eval_cmd->add_option("--data", eval.data.data_path, "Dataset file (.csv or .bin)");
    eval_cmd->add_option("--task", eval.data.task, "Generate a validation set instead");
    eval_cmd->add_option("--val", eval.data.val_count, "Records when generating")->capture_default_str();
    eval_cmd->add_option("--seed", eval.seed, "Seed when generating")->capture_default_str();
    eval_cmd->add_flag("--identity", eval.identity, "Correlate targets with themselves (metric self-check)");
    eval_cmd->add_option("--out", eval.out, "Optional JSON report");

    BenchArgs strong;
    auto* strong_cmd = app.add_subcommand("bench-strong", "Strong scaling: fixed total work");
    add_data_options(strong_cmd, strong.data);
    add_model_options(strong_cmd, strong.model);
    strong_cmd->add_option("--threads", strong.threads, "Thread counts, comma separated")->capture_default_str();
    strong_cmd->add_option("--rounds", strong.rounds, "Round counts, comma separated")->capture_default_str();
    strong_cmd->add_option("--total", strong.total, "Records processed per cell")->capture_default_str();
    strong_cmd->add_option("--cells", strong.cells, "Explicit cells TxRxB,... (overrides the grid)");
    strong_cmd->add_option("--out", strong.out, "CSV report (default: bench-strong.csv)");

    BenchArgs weak;
    auto* weak_cmd = app.add_subcommand("bench-weak", "Weak scaling: fixed work per thread");
    add_data_options(weak_cmd, weak.data);
    add_model_options(weak_cmd, weak.model);
    weak_cmd->add_option("--threads", weak.threads, "Thread counts, comma separated")->capture_default_str();
    weak_cmd->add_option("--rounds", weak.rounds, "Rounds")->capture_default_str();
    weak_cmd->add_option("--batch", weak.batch, "Records per thread per round")->capture_default_str();
    weak_cmd->add_option("--out", weak.out, "CSV report (default: bench-weak.csv)");

    std::string manifest;
    auto* rerun_cmd = app.add_subcommand("rerun", "Re-run the command recorded in a manifest");
    rerun_cmd->add_option("manifest", manifest, "Manifest JSON")->required();

    std::vector<std::string> reversed(argv.rbegin(), argv.rend() - 1);
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*gen_cmd) return cmd_gen(gen, argv);
        if (*train_cmd) return cmd_train(train, argv);
        if (*par_cmd) return cmd_train_par(par, argv);
        if (*eval_cmd) return cmd_eval(eval, argv);
        if (*strong_cmd) {
            strong.train_given = strong_cmd->count("--train") > 0;
            return cmd_bench_strong(strong, argv);
        }
        if (*weak_cmd) {
            weak.train_given = weak_cmd->count("--train") > 0;
            return cmd_bench_weak(weak, argv);
        }
        if (*rerun_cmd) return cmd_rerun(manifest);
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure in round/epoch " << e.round() << ": " << e.what() << '\n';
        return kNumerical;
    } catch (const UndefinedCorrelation& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const WorkerError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const DimensionError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const Error& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    }
    return kUsage;
}

} // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, on_interrupt);
    std::signal(SIGTERM, on_interrupt);
    return run(std::vector<std::string>(argv, argv + argc));
}
