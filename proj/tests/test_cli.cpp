// End-to-end checks of the kanbench executable on small inputs.

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kanmerge.hpp"

namespace fs = std::filesystem;
using namespace kanmerge;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("kanbench_cli_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    // Exit status of `kanbench <args>`; stdout goes to `log`.
    int run(const std::string& args, const std::string& log = "out.txt") const {
        const std::string cmd = std::string(KANBENCH_PATH) + " " + args + " > " + path(log) + " 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    fs::path dir_;
};

std::string slurp(const std::string& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> csv_rows(const std::string& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream is(slurp(p));
    std::string line;
    while (std::getline(is, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

// Drops the named columns (timings) from a CSV.
std::vector<std::vector<std::string>> without(std::vector<std::vector<std::string>> rows,
                                              const std::vector<std::string>& names) {
    if (rows.empty()) return rows;
    std::vector<std::size_t> drop;
    for (std::size_t c = 0; c < rows[0].size(); ++c)
        for (const auto& n : names)
            if (rows[0][c] == n) drop.push_back(c);
    for (auto& r : rows)
        for (auto it = drop.rbegin(); it != drop.rend(); ++it) r.erase(r.begin() + static_cast<long>(*it));
    return rows;
}

} // namespace

TEST_F(Cli, GenIsByteIdenticalAcrossRuns) {
    ASSERT_EQ(run("gen --task det4 --train 300 --val 50 --seed 5 --out " + path("a")), 0);
    ASSERT_EQ(run("gen --task det4 --train 300 --val 50 --seed 5 --out " + path("b")), 0);
    for (const char* f : {"det4_train_300.csv", "det4_val_50.csv"}) {
        const auto a = slurp(path(std::string("a/") + f));
        EXPECT_FALSE(a.empty());
        EXPECT_EQ(a, slurp(path(std::string("b/") + f)));
    }
    const auto d = load_dataset(path("a/det4_train_300.csv"));
    EXPECT_EQ(d.size(), 300u);
    EXPECT_EQ(d.input_dim(), 16u);
    EXPECT_TRUE(fs::exists(path("a/det4_gen.manifest.json")));
}

TEST_F(Cli, GenTetraHasTwelveInputsAndFourOutputs) {
    ASSERT_EQ(run("gen --task tetra --train 20 --val 5 --binary --out " + path("t")), 0);
    const auto rows = csv_rows(path("t/tetra_train_20.csv"));
    ASSERT_EQ(rows.size(), 21u);
    EXPECT_EQ(rows[0].size(), 16u);
    EXPECT_EQ(rows[0][11], "x12");
    EXPECT_EQ(rows[0][15], "z4");
    EXPECT_EQ(load_dataset_binary(path("t/tetra_train_20.bin")), load_dataset(path("t/tetra_train_20.csv")));
}

TEST_F(Cli, TrainIsDeterministicAndZeroEpochsKeepsInit) {
    const std::string common = "train --task det4 --train 500 --val 100 --seed 3 --epochs 2 --out ";
    ASSERT_EQ(run(common + path("m1.kanm")), 0);
    ASSERT_EQ(run(common + path("m2.kanm")), 0);
    EXPECT_EQ(slurp(path("m1.kanm")), slurp(path("m2.kanm")));

    ASSERT_EQ(run("train --task det4 --train 500 --val 100 --seed 3 --epochs 0 --out " + path("m0.kanm")), 0);
    const auto m0 = load_model(path("m0.kanm"));
    EXPECT_NE(m0, load_model(path("m1.kanm")));
    EXPECT_EQ(m0.parameter_count(), 5'110u);

    // The manifest re-run reproduces the model bit for bit.
    fs::remove(path("m1.kanm"));
    ASSERT_EQ(run("rerun " + path("m1.kanm.manifest.json")), 0);
    EXPECT_EQ(slurp(path("m1.kanm")), slurp(path("m2.kanm")));
}

TEST_F(Cli, TrainParZeroStepKeepsInitAndCsvIsDeterministic) {
    const std::string base = "--task det4 --train 600 --val 100 --seed 4 ";
    ASSERT_EQ(run("train " + base + "--epochs 0 --out " + path("init.kanm")), 0);
    ASSERT_EQ(run("train-par " + base + "--threads 3 --rounds 2 --batch 200 --mu 0 --out " + path("z.kanm")), 0);
    EXPECT_EQ(slurp(path("z.kanm")), slurp(path("init.kanm")));

    ASSERT_EQ(run("train-par " + base + "--threads 3 --rounds 2 --batch 100 --out " + path("a.kanm")), 0);
    ASSERT_EQ(run("train-par " + base + "--threads 3 --rounds 2 --batch 100 --out " + path("b.kanm")), 0);
    EXPECT_EQ(slurp(path("a.kanm")), slurp(path("b.kanm")));
    const auto ra = csv_rows(path("a.kanm.rounds.csv"));
    ASSERT_EQ(ra.size(), 3u);
    EXPECT_EQ(ra[0].back(), "time_s");
    EXPECT_EQ(without(ra, {"time_s"}), without(csv_rows(path("b.kanm.rounds.csv")), {"time_s"}));
}

TEST_F(Cli, EvalPrintsOnePearsonPerOutputAndMatchesLibrary) {
    ASSERT_EQ(run("gen --task tetra --train 400 --val 80 --seed 2 --out " + path("d")), 0);
    const std::string data = "--data " + path("d/tetra_train_400.csv") + " --val-data " + path("d/tetra_val_80.csv");
    ASSERT_EQ(run("train " + data + " --arch tetra --epochs 1 --out " + path("t.kanm")), 0);
    ASSERT_EQ(run("eval --model " + path("t.kanm") + " --data " + path("d/tetra_val_80.csv") + " --out " +
                      path("report.json"),
                  "eval.txt"),
              0);
    const auto text = slurp(path("eval.txt"));
    EXPECT_NE(text.find("z4: pearson"), std::string::npos);
    EXPECT_EQ(text.find("z5:"), std::string::npos);

    const auto per = evaluate_pearson(load_model(path("t.kanm")), load_dataset(path("d/tetra_val_80.csv")));
    ASSERT_EQ(per.size(), 4u);
    EXPECT_NE(text.find("z1: pearson " + format_real(per[0]) + " %"), std::string::npos);

    ASSERT_EQ(run("eval --identity --data " + path("d/tetra_val_80.csv"), "id.txt"), 0);
    EXPECT_NE(slurp(path("id.txt")).find("z1: pearson 100 %"), std::string::npos);
}

TEST_F(Cli, StrongAndWeakBenchmarksWriteTheScalingTable) {
    const std::string base = "--task det4 --train 1200 --val 100 --seed 6 ";
    ASSERT_EQ(run("bench-strong " + base + "--threads 1,2,3 --rounds 2 --total 1200 --out " + path("s1.csv")), 0);
    ASSERT_EQ(run("bench-strong " + base + "--threads 1,2,3 --rounds 2 --total 1200 --out " + path("s2.csv")), 0);
    std::ifstream is(path("s1.csv"));
    const auto rows = read_scaling_csv(is);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].ratio, 1.0);
    for (const auto& r : rows) EXPECT_EQ(r.threads * r.rounds * r.batch_size, 1'200u);
    const std::vector<std::string> timing{"time_s", "speedup_or_efficiency"};
    EXPECT_EQ(without(csv_rows(path("s1.csv")), timing), without(csv_rows(path("s2.csv")), timing));

    ASSERT_EQ(run("bench-weak " + base + "--threads 1,2,4 --rounds 2 --batch 100 --out " + path("w.csv")), 0);
    std::ifstream ws(path("w.csv"));
    const auto weak = read_scaling_csv(ws);
    ASSERT_EQ(weak.size(), 3u);
    for (const auto& r : weak) EXPECT_EQ(r.rounds * r.batch_size, 200u);
    EXPECT_TRUE(fs::exists(path("w.csv.manifest.json")));
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("train --task det4 --mu 1.5"), 2);
    EXPECT_EQ(run("bench-strong --task det4 --cells 1x2x100,2x2x40"), 2);
    EXPECT_EQ(run("train-par --task det4 --train 100 --val 10 --threads 4 --batch 50"), 2);

    {
        std::ofstream bad(path("bad.csv"));
        bad << "x1,z1\n0.5,1\nnan,2\n";
    }
    EXPECT_EQ(run("eval --identity --data " + path("bad.csv"), "bad.txt"), 3);
    EXPECT_NE(slurp(path("bad.txt")).find("line 3"), std::string::npos);
    {
        std::ofstream junk(path("junk.kanm"));
        junk << "not a model";
    }
    ASSERT_EQ(run("gen --task det4 --train 10 --val 10 --out " + path("d")), 0);
    EXPECT_EQ(run("eval --model " + path("junk.kanm") + " --data " + path("d/det4_val_10.csv")), 3);
    ASSERT_EQ(run("gen --task tetra --train 10 --val 10 --out " + path("d")), 0);
    ASSERT_EQ(run("train --task det4 --train 20 --val 10 --epochs 0 --out " + path("m.kanm")), 0);
    EXPECT_EQ(run("eval --model " + path("m.kanm") + " --data " + path("d/tetra_val_10.csv")), 3);

    auto model = load_model(path("m.kanm"));
    model.layer(0).values()[0] = INFINITY;
    save_model(path("inf.kanm"), model);
    EXPECT_EQ(run("eval --model " + path("inf.kanm") + " --data " + path("d/det4_val_10.csv")), 4);
}
