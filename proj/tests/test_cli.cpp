// End-to-end tests driving the sdd binary. SDD_CLI_PATH is injected by CMake.

#include "sdd/sdd.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliResult {
    int code = -1;
    std::string out;
};

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("sdd_cli_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()
                                                ->current_test_info()
                                                ->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    CliResult run(const std::string& args, const std::string& env = "") const {
        const std::string out_file = path("stdout.txt");
        const std::string cmd = (env.empty() ? "" : env + " ") + std::string(SDD_CLI_PATH) + " " +
                                args + " > " + out_file + " 2>&1";
        const int status = std::system(cmd.c_str());
        CliResult r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        std::ifstream in(out_file);
        r.out.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        return r;
    }

    fs::path dir_;
};

std::string read_all(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

TEST_F(CliTest, GenTrainSampleEvalPipeline) {
    auto r = run("gen-data --kind clustered --d 16 --sparsity 0.8 --clusters 1 --n 512 --seed 3 "
                 "--out " + path("data.sddmat"));
    ASSERT_EQ(r.code, 0) << r.out;
    ASSERT_TRUE(fs::exists(path("data.sddmat")));

    r = run("train --data " + path("data.sddmat") + " --out " + path("model.sddckpt") +
            " --steps 150 --batch 32 --hidden 16,16 --temb-dim 8 --seed 4 --lr 1e-3");
    ASSERT_EQ(r.code, 0) << r.out;
    ASSERT_TRUE(fs::exists(path("model.sddckpt")));
    ASSERT_TRUE(fs::exists(path("model.sddckpt.loss.csv")));

    // Loss log: header plus one line per step, and the tail beats the head.
    {
        std::ifstream log(path("model.sddckpt.loss.csv"));
        std::string line;
        ASSERT_TRUE(std::getline(log, line));
        ASSERT_EQ(line, "step,l2,ce,total");
        std::vector<double> totals;
        while (std::getline(log, line))
            totals.push_back(std::stod(line.substr(line.rfind(',') + 1)));
        ASSERT_EQ(totals.size(), 150u);
        double head = 0.0, tail = 0.0;
        for (int i = 0; i < 30; ++i) {
            head += totals[i];
            tail += totals[totals.size() - 1 - i];
        }
        EXPECT_LT(tail, head);
    }

    r = run("sample --ckpt " + path("model.sddckpt") +
            " --kind ddim --steps 10 --n 64 --seed 5 --out " + path("gen.sddmat"));
    ASSERT_EQ(r.code, 0) << r.out;
    ASSERT_NE(r.out.find("mean_sparsity="), std::string::npos);

    r = run("eval --real " + path("data.sddmat") + " --gen " + path("gen.sddmat") +
            " --metrics w1,mmd,scc,pcc,lisi --lisi-k 5 --out " + path("report.json") +
            " --csv-prefix " + path("rep"));
    ASSERT_EQ(r.code, 0) << r.out;
    json rep;
    std::ifstream(path("report.json")) >> rep;
    EXPECT_TRUE(rep.contains("mmd"));
    EXPECT_TRUE(rep.contains("sparsity_w1"));
    EXPECT_TRUE(fs::exists(path("rep_metrics.csv")));

    // Manifest log: one line per command that wrote into this directory.
    std::ifstream mlog(path("sdd_manifests.jsonl"));
    int lines = 0;
    std::string line;
    while (std::getline(mlog, line)) {
        ++lines;
        const json j = json::parse(line);
        EXPECT_TRUE(j.contains("command"));
        EXPECT_TRUE(j.contains("config"));
    }
    EXPECT_EQ(lines, 4);
}

TEST_F(CliTest, TrainDeterministicByteIdenticalCheckpoints) {
    auto r = run("gen-data --d 16 --sparsity 0.85 --clusters 1 --n 256 --seed 1 --out " +
                 path("d.sddmat"));
    ASSERT_EQ(r.code, 0) << r.out;
    const std::string common = "train --data " + path("d.sddmat") +
                               " --steps 60 --batch 16 --hidden 8 --temb-dim 4 --seed 11 --out ";
    ASSERT_EQ(run(common + path("a.sddckpt")).code, 0);
    ASSERT_EQ(run(common + path("b.sddckpt")).code, 0);
    EXPECT_EQ(read_all(path("a.sddckpt")), read_all(path("b.sddckpt")));
}

TEST_F(CliTest, SampleDeterministicByteIdenticalDumps) {
    ASSERT_EQ(run("gen-data --d 16 --sparsity 0.85 --clusters 1 --n 256 --seed 1 --out " +
                  path("d.sddmat"))
                  .code,
              0);
    ASSERT_EQ(run("train --data " + path("d.sddmat") + " --out " + path("m.sddckpt") +
                  " --steps 40 --batch 16 --hidden 8 --temb-dim 4 --seed 2")
                  .code,
              0);
    const std::string common = "sample --ckpt " + path("m.sddckpt") +
                               " --kind ddim --steps 5 --n 32 --seed 1 --out ";
    ASSERT_EQ(run(common + path("s1.sddmat")).code, 0);
    ASSERT_EQ(run(common + path("s2.sddmat")).code, 0);
    EXPECT_EQ(read_all(path("s1.sddmat")), read_all(path("s2.sddmat")));
}

TEST_F(CliTest, MissingDatasetExitsTwoWithoutArtifacts) {
    const auto r = run("train --data " + path("nope.sddmat") + " --out " + path("m.sddckpt") +
                       " --steps 10");
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(fs::exists(path("m.sddckpt")));
    EXPECT_FALSE(fs::exists(path("m.sddckpt.loss.csv")));
}

TEST_F(CliTest, BadConfigExitsTwo) {
    std::ofstream(path("cfg.json")) << "{ not json";
    ASSERT_EQ(run("gen-data --d 16 --sparsity 0.85 --clusters 1 --n 64 --seed 1 --out " +
                  path("d.sddmat"))
                  .code,
              0);
    const auto r = run("train --config " + path("cfg.json") + " --data " + path("d.sddmat") +
                       " --out " + path("m.sddckpt"));
    EXPECT_EQ(r.code, 2);
}

TEST_F(CliTest, DivergenceExitsThree) {
    ASSERT_EQ(run("gen-data --d 16 --sparsity 0.85 --clusters 1 --n 128 --seed 1 --out " +
                  path("d.sddmat"))
                  .code,
              0);
    const auto r = run("train --data " + path("d.sddmat") + " --out " + path("m.sddckpt") +
                       " --steps 30 --batch 16 --hidden 8 --temb-dim 4 --lr 1e200");
    EXPECT_EQ(r.code, 3) << r.out;
}

TEST_F(CliTest, ConfigFileDrivesTrainingAndCliOverridesWin) {
    ASSERT_EQ(run("gen-data --d 16 --sparsity 0.85 --clusters 1 --n 128 --seed 1 --out " +
                  path("d.sddmat"))
                  .code,
              0);
    json cfg;
    cfg["total-steps"] = 25;
    cfg["batch-size"] = 8;
    cfg["hidden"] = {8};
    cfg["temb-dim"] = 4;
    cfg["seed"] = 9;
    std::ofstream(path("cfg.json")) << cfg.dump();
    const auto r = run("train --config " + path("cfg.json") + " --data " + path("d.sddmat") +
                       " --out " + path("m.sddckpt") + " --steps 12");
    ASSERT_EQ(r.code, 0) << r.out;
    // Loss log length shows the CLI --steps override beat the config file.
    std::ifstream log(path("m.sddckpt.loss.csv"));
    int lines = 0;
    std::string line;
    while (std::getline(log, line)) ++lines;
    EXPECT_EQ(lines, 13);  // header + 12 steps
}

TEST_F(CliTest, ThresholdMatchesTargetAndHandlesEdges) {
    ASSERT_EQ(run("gen-data --d 16 --sparsity 0.8 --clusters 1 --n 512 --seed 7 --out " +
                  path("d.sddmat"))
                  .code,
              0);
    // Match the dataset's own sparsity: tau = 0, batch unchanged.
    const sdd::DatasetHandle ds = sdd::load_dataset(path("d.sddmat"));
    const double own = sdd::mean_sparsity(ds.batch());
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", own);
    auto r = run("threshold --in " + path("d.sddmat") + " --target-sparsity " + buf + " --out " +
                 path("t.sddmat"));
    ASSERT_EQ(r.code, 0) << r.out;
    json rep;
    std::ifstream(path("t.sddmat.json")) >> rep;
    EXPECT_DOUBLE_EQ(rep["threshold"].get<double>(), 0.0);
    EXPECT_EQ(read_all(path("t.sddmat")), read_all(path("d.sddmat")));

    // --match against the source dataset reproduces its average sparsity.
    r = run("threshold --in " + path("d.sddmat") + " --match " + path("d.sddmat") + " --out " +
            path("t2.sddmat"));
    ASSERT_EQ(r.code, 0) << r.out;

    // Empty sample file is a format error.
    std::ofstream(path("empty.sddmat")).close();
    r = run("threshold --in " + path("empty.sddmat") + " --target-sparsity 0.5 --out " +
            path("t3.sddmat"));
    EXPECT_EQ(r.code, 2);
}

TEST_F(CliTest, ThresholdUnconvergedStillExitsZero) {
    sdd::Matrix m(4, 4, 2.5);  // all-equal data
    sdd::write_sddmat(path("flat.sddmat"), m);
    const auto r = run("threshold --in " + path("flat.sddmat") +
                       " --target-sparsity 0.5 --out " + path("t.sddmat"));
    ASSERT_EQ(r.code, 0) << r.out;
    json rep;
    std::ifstream(path("t.sddmat.json")) >> rep;
    EXPECT_FALSE(rep["converged"].get<bool>());
}

TEST_F(CliTest, EvalIdenticalInputsGivePerfectScores) {
    ASSERT_EQ(run("gen-data --d 16 --sparsity 0.8 --clusters 1 --n 256 --seed 2 --out " +
                  path("d.sddmat"))
                  .code,
              0);
    const auto r = run("eval --real " + path("d.sddmat") + " --gen " + path("d.sddmat") +
                       " --lisi-k 5 --out " + path("rep.json"));
    ASSERT_EQ(r.code, 0) << r.out;
    json rep;
    std::ifstream(path("rep.json")) >> rep;
    EXPECT_DOUBLE_EQ(rep["w1_stat"].get<double>(), 0.0);
    EXPECT_EQ(rep["mmd"].get<double>(), 0.0);
    EXPECT_DOUBLE_EQ(rep["scc"].get<double>(), 1.0);
    EXPECT_NEAR(rep["pcc"].get<double>(), 1.0, 1e-12);
}

TEST_F(CliTest, EvalDimensionMismatchExitsTwo) {
    ASSERT_EQ(run("gen-data --d 16 --sparsity 0.8 --clusters 1 --n 64 --seed 2 --out " +
                  path("a.sddmat"))
                  .code,
              0);
    ASSERT_EQ(run("gen-data --d 25 --sparsity 0.8 --clusters 1 --n 64 --seed 2 --out " +
                  path("b.sddmat"))
                  .code,
              0);
    const auto r = run("eval --real " + path("a.sddmat") + " --gen " + path("b.sddmat") +
                       " --out " + path("rep.json"));
    EXPECT_EQ(r.code, 2);
}

TEST_F(CliTest, SampledSparsityPrintMatchesMetricsRecomputation) {
    ASSERT_EQ(run("gen-data --d 16 --sparsity 0.8 --clusters 1 --n 512 --seed 6 --out " +
                  path("d.sddmat"))
                  .code,
              0);
    ASSERT_EQ(run("train --data " + path("d.sddmat") + " --out " + path("m.sddckpt") +
                  " --steps 200 --batch 32 --hidden 16,16 --temb-dim 8 --seed 8 --lr 1e-3")
                  .code,
              0);
    const auto r = run("sample --ckpt " + path("m.sddckpt") +
                       " --kind ddim --steps 10 --n 1000 --seed 9 --out " + path("g.sddmat"));
    ASSERT_EQ(r.code, 0) << r.out;
    const auto pos = r.out.find("mean_sparsity=");
    ASSERT_NE(pos, std::string::npos);
    const double printed = std::stod(r.out.substr(pos + 14));
    const sdd::Matrix m = sdd::read_sddmat(path("g.sddmat"));
    EXPECT_DOUBLE_EQ(printed, sdd::mean_sparsity(sdd::DataBatch{m}));
}

TEST_F(CliTest, EnvSeedOverrideControlsSampling) {
    ASSERT_EQ(run("gen-data --d 16 --sparsity 0.8 --clusters 1 --n 128 --seed 1 --out " +
                  path("d.sddmat"))
                  .code,
              0);
    ASSERT_EQ(run("train --data " + path("d.sddmat") + " --out " + path("m.sddckpt") +
                  " --steps 30 --batch 16 --hidden 8 --temb-dim 4 --seed 2")
                  .code,
              0);
    ASSERT_EQ(run("sample --ckpt " + path("m.sddckpt") +
                  " --kind ddim --steps 5 --n 16 --seed 42 --out " + path("s1.sddmat"))
                  .code,
              0);
    // The env override beats the flag: --seed 7 + SDD_SEED=42 == --seed 42.
    ASSERT_EQ(run("sample --ckpt " + path("m.sddckpt") +
                      " --kind ddim --steps 5 --n 16 --seed 7 --out " + path("s2.sddmat"),
                  "SDD_SEED=42")
                  .code,
              0);
    EXPECT_EQ(read_all(path("s1.sddmat")), read_all(path("s2.sddmat")));
}

}  // namespace
