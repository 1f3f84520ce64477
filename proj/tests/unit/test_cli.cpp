#include <json.hpp>
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + std::string(FOMA_CLI_PATH) + " " + args + " 2>&1";
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr) {
        return r;
    }
    char buf[4096];
    std::size_t n = 0;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) {
        r.out.append(buf, n);
    }
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path workdir() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "foma_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        std::ofstream csv(d / "toy.csv");
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < 100; ++i) {
            const double a = u(rng);
            const double b = u(rng);
            csv << a << ',' << b << ',' << std::sin(4.0 * a) + b << '\n';
        }
        std::ofstream cfg(d / "toy.cfg");
        cfg << "dataset = csv\ndata_path = " << (d / "toy.csv").string()
            << "\nn_features = 2\nsplit_sizes = 60,20,20\nepochs = 4\nbatch_size = 10\nhidden = 8,8\n"
               "method = foma_rho\nrho = 0.9\n";
        return d;
    }();
    return dir;
}

std::string cfg() {
    return (workdir() / "toy.cfg").string();
}

} // namespace

TEST(Cli, HelpDocumentsExitCodes) {
    const Result r = run("--help");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("Exit codes"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
    EXPECT_EQ(run("train").code, 2);
}

TEST(Cli, InvalidAlphaExitsTwoBeforeTraining) {
    const fs::path out = workdir() / "alpha";
    const Result r = run("train --config " + cfg() + " --set method=foma --set alpha=-1 --out " + out.string());
    EXPECT_EQ(r.code, 2) << r.out;
    EXPECT_FALSE(fs::exists(out / "run.json"));
    const fs::path bad = workdir() / "bad.cfg";
    std::ofstream(bad) << slurp(cfg()) << "alpha = -1\n";
    EXPECT_EQ(run("train --config " + bad.string()).code, 2);
}

TEST(Cli, MissingDataExitsThree) {
    const Result r = run("train --config " + cfg() + " --set data_path=/nonexistent/x.csv --out " +
                         (workdir() / "missing").string());
    EXPECT_EQ(r.code, 3) << r.out;
    EXPECT_EQ(run("train --config /nonexistent/config.cfg").code, 3);
}

TEST(Cli, TrainWritesArtifactsDeterministically) {
    const fs::path a = workdir() / "run_a";
    const fs::path b = workdir() / "run_b";
    ASSERT_EQ(run("train --config " + cfg() + " --seed 3 --out " + a.string()).code, 0);
    ASSERT_EQ(run("train --config " + cfg() + " --seed 3 --out " + b.string()).code, 0);
    EXPECT_EQ(slurp(a / "run.json"), slurp(b / "run.json"));
    EXPECT_EQ(slurp(a / "history.csv"), slurp(b / "history.csv"));
    EXPECT_EQ(slurp(a / "model.ckpt"), slurp(b / "model.ckpt"));
    const auto doc = nlohmann::json::parse(slurp(a / "run.json"));
    EXPECT_TRUE(doc["test_rmse"].is_number());
    EXPECT_EQ(doc["seed"].get<int>(), 3);
    EXPECT_EQ(doc["schema_version"].get<int>(), 1);
}

TEST(Cli, OutputDirectoryFromEnvironment) {
    const fs::path env_out = workdir() / "env_out";
    const Result r = run("train --config " + cfg(), "FOMA_OUT_DIR=" + env_out.string());
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_TRUE(fs::exists(env_out / "run.json"));
}

TEST(Cli, SweepLambdaFromCheckpointAndUntrained) {
    const fs::path run_dir = workdir() / "sweep_src";
    ASSERT_EQ(run("train --config " + cfg() + " --out " + run_dir.string()).code, 0);
    const fs::path out = workdir() / "sweep";
    const Result r = run("sweep-lambda --config " + cfg() + " --checkpoint " + (run_dir / "model.ckpt").string() +
                         " --grid 100 --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("interior_minimum="), std::string::npos);
    const std::string csv = slurp(out / "sweep.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 101);
    const std::string labels = slurp(out / "labels.csv");
    EXPECT_EQ(labels.rfind("bin_lo,bin_hi,original,lambda_0,lambda_0.5,lambda_1\n", 0), 0u);
    EXPECT_TRUE(nlohmann::json::parse(slurp(out / "sweep.json")).contains("schema_version"));

    const fs::path untrained = workdir() / "sweep_untrained";
    EXPECT_EQ(run("sweep-lambda --config " + cfg() + " --init-seed 1 --out " + untrained.string()).code, 0);
    EXPECT_TRUE(fs::exists(untrained / "sweep.csv"));
}

TEST(Cli, SweepLambdaBadCheckpointExitsThree) {
    const fs::path bad = workdir() / "bad.ckpt";
    std::ofstream(bad) << "not a checkpoint\n";
    EXPECT_EQ(run("sweep-lambda --config " + cfg() + " --checkpoint " + bad.string()).code, 3);
    EXPECT_EQ(run("sweep-lambda --config " + cfg()).code, 2);
}

TEST(Cli, EstimateIdSynthetic) {
    const Result two = run("estimate-id --synthetic 2,10,2000");
    ASSERT_EQ(two.code, 0) << two.out;
    const auto doc = nlohmann::json::parse(two.out);
    EXPECT_GE(doc["d_hat"].get<double>(), 1.5);
    EXPECT_LE(doc["d_hat"].get<double>(), 2.5);
    EXPECT_EQ(doc["n_used"].get<int>(), 2000);
    const auto one = nlohmann::json::parse(run("estimate-id --synthetic 1,5,2000").out);
    EXPECT_GE(one["d_hat"].get<double>(), 0.7);
    EXPECT_LE(one["d_hat"].get<double>(), 1.3);
    EXPECT_EQ(run("estimate-id --synthetic 2,x,10").code, 2);
    EXPECT_EQ(run("estimate-id").code, 2);
}

TEST(Cli, EstimateIdReportsDuplicatesAndDegenerateData) {
    const fs::path dup = workdir() / "dup.csv";
    {
        std::ofstream out(dup);
        for (int i = 0; i < 30; ++i) {
            out << (i % 10) << ',' << (i % 10) * (i % 10) << '\n';
        }
    }
    const Result r = run("estimate-id --data " + dup.string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(nlohmann::json::parse(r.out)["n_duplicates"].get<int>(), 20);

    const fs::path same = workdir() / "same.csv";
    std::ofstream(same) << "1,1\n1,1\n1,1\n2,2\n";
    EXPECT_EQ(run("estimate-id --data " + same.string()).code, 4);
}

TEST(Cli, CompareWritesTables) {
    const fs::path out = workdir() / "compare";
    const Result r = run("compare --configs " + cfg() + " --seeds 0 --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.out;
    const std::string csv = slurp(out / "compare.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
    EXPECT_TRUE(nlohmann::json::parse(slurp(out / "compare.json")).contains("rows"));
}

TEST(Cli, ChecksumManifest) {
    const fs::path dir = workdir() / "sums";
    fs::create_directories(dir);
    std::ofstream(dir / "abc.txt") << "abc";
    std::ofstream(dir / "SHA256SUMS") << "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad  abc.txt\n";
    EXPECT_EQ(run("checksum --manifest " + (dir / "SHA256SUMS").string()).code, 0);
    std::ofstream(dir / "abc.txt") << "abd";
    EXPECT_EQ(run("checksum --manifest " + (dir / "SHA256SUMS").string()).code, 3);
}

TEST(Cli, DivergenceExitsFourWithDiagnosticRecord) {
    const fs::path out = workdir() / "diverged";
    const Result r = run("train --config " + cfg() +
                         " --set method=erm --set optimizer=sgd --set learning_rate=1e4 --out " + out.string());
    EXPECT_EQ(r.code, 4) << r.out;
    const auto doc = nlohmann::json::parse(slurp(out / "run.json"));
    EXPECT_TRUE(doc["diverged"].get<bool>());
    EXPECT_FALSE(doc["diagnostic"].get<std::string>().empty());
}
