#include "foma/errors.hpp"
#include "foma/experiment.hpp"

#include <json.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace foma;

namespace {

std::string toy_csv() {
    static const std::string path = [] {
        const auto p = (std::filesystem::temp_directory_path() / "foma_experiment_toy.csv").string();
        std::ofstream out(p);
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> u(0.0, 10.0);
        for (int i = 0; i < 120; ++i) {
            const double a = u(rng);
            const double b = u(rng);
            out << a << ',' << b << ',' << std::sin(a) + 0.1 * b << '\n';
        }
        return p;
    }();
    return path;
}

std::string base_config() {
    return "dataset = csv\n"
           "data_path = " +
           toy_csv() +
           "\n"
           "n_features = 2\n"
           "n_labels = 1\n"
           "split_sizes = 80,20,20\n"
           "epochs = 3\n"
           "batch_size = 16\n"
           "hidden = 8,8\n";
}

} // namespace

TEST(ExperimentConfig, ParsesAllSections) {
    const ExperimentConfig c = parse_experiment_config(base_config() +
                                                       "# comment\n"
                                                       "method = foma_rho\nrho = 0.975\nalpha = 1.4\n"
                                                       "sv_mode = large\nbatch_strategy = close\n"
                                                       "learning_rate = 5e-4\nname = demo\nfixed_lambda = 0.5\n");
    EXPECT_EQ(c.name, "demo");
    EXPECT_EQ(c.train.policy.method, Method::foma_rho);
    EXPECT_DOUBLE_EQ(c.train.policy.rho, 0.975);
    EXPECT_EQ(c.train.policy.sv_mode, SvMode::large);
    EXPECT_EQ(c.train.batch_strategy, BatchStrategy::close);
    EXPECT_EQ(c.train.hidden, (std::vector<int>{8, 8}));
    EXPECT_EQ(c.data.sizes.train, 80);
    EXPECT_EQ(*c.train.policy.fixed_lambda, 0.5);
}

TEST(ExperimentConfig, PresetFillsLayoutRegardlessOfKeyOrder) {
    const ExperimentConfig c = parse_experiment_config("split_sizes = 100,50,50\ndataset = airfoil\n");
    EXPECT_EQ(c.data.n_features, 5);
    EXPECT_EQ(c.data.sizes.train, 100);
    const ExperimentConfig d = parse_experiment_config("dataset = no2\n");
    EXPECT_EQ(d.data.n_features, 7);
    EXPECT_EQ(d.data.sizes.train, 200);
}

TEST(ExperimentConfig, RejectsUnknownDuplicateAndInvalid) {
    EXPECT_THROW(parse_experiment_config(base_config() + "colour = blue\n"), ConfigError);
    EXPECT_THROW(parse_experiment_config(base_config() + "epochs = 4\n"), ConfigError);
    EXPECT_THROW(parse_experiment_config(base_config() + "method = foma\nalpha = -1\n"), ConfigError);
    EXPECT_THROW(parse_experiment_config(base_config() + "learning_rate = fast\n"), ConfigError);
    EXPECT_THROW(parse_experiment_config(base_config() + "method = magic\n"), ConfigError);
    EXPECT_THROW(parse_experiment_config(base_config() + "just some words\n"), ConfigError);
    EXPECT_THROW(parse_experiment_config("dataset = csv\nn_features = 2\nsplit_sizes = 1,1,1\n"), ConfigError);
    EXPECT_THROW(parse_experiment_config("dataset = imagenet\n"), ConfigError);
}

TEST(PrepareDataset, SplitsAndNormalizes) {
    const ExperimentConfig c = parse_experiment_config(base_config());
    const Dataset d = prepare_dataset(c.data, 0);
    EXPECT_EQ(d.splits.train.size(), 80u);
    ASSERT_TRUE(d.normalization.has_value());
    const DatasetSplits s = materialize(d);
    EXPECT_DOUBLE_EQ(s.x_train.minCoeff(), 0.0);
    EXPECT_DOUBLE_EQ(s.x_train.maxCoeff(), 1.0);
    DataSource missing = c.data;
    missing.data_path = "/nonexistent/foma.csv";
    EXPECT_THROW(prepare_dataset(missing, 0), IoError);
}

TEST(PrepareDataset, SplitSeedOverridesRunSeed) {
    ExperimentConfig c = parse_experiment_config(base_config() + "split_seed = 5\n");
    EXPECT_EQ(prepare_dataset(c.data, 0).splits.train, prepare_dataset(c.data, 1).splits.train);
    c = parse_experiment_config(base_config());
    EXPECT_NE(prepare_dataset(c.data, 0).splits.train, prepare_dataset(c.data, 1).splits.train);
}

TEST(MeanStd, SampleStandardDeviation) {
    const auto [m, s] = mean_std({1.0, 2.0, 3.0});
    EXPECT_DOUBLE_EQ(m, 2.0);
    EXPECT_DOUBLE_EQ(s, 1.0);
    EXPECT_EQ(mean_std({4.0}).second, 0.0);
}

TEST(Compare, AggregatesAndFlagsBest) {
    std::vector<ExperimentConfig> configs{parse_experiment_config(base_config() + "name = a\n"),
                                          parse_experiment_config(base_config() + "name = b\n")};
    configs[1].train.epochs = 1;
    ExperimentConfig broken = parse_experiment_config(base_config() + "name = broken\n");
    broken.data.data_path = "/nonexistent/foma.csv";
    configs.push_back(broken);
    const std::vector<std::uint64_t> seeds{0, 1};
    const CompareResult serial = run_compare(configs, seeds, 1);
    ASSERT_EQ(serial.rows.size(), 3u);
    EXPECT_EQ(serial.runs.size(), 6u);
    EXPECT_EQ(serial.rows[0].n_runs, 2);
    EXPECT_EQ(serial.rows[0].n_failed, 0);
    EXPECT_EQ(serial.rows[2].n_failed, 2);
    EXPECT_TRUE(std::isnan(serial.rows[2].rmse_mean));
    EXPECT_NE(serial.rows[0].best_rmse, serial.rows[1].best_rmse);
    EXPECT_FALSE(serial.rows[2].best_rmse);

    const CompareResult parallel = run_compare(configs, seeds, 3);
    EXPECT_EQ(compare_csv(serial), compare_csv(parallel));
    EXPECT_EQ(compare_json(serial), compare_json(parallel));
    const auto doc = nlohmann::json::parse(compare_json(serial));
    EXPECT_EQ(doc["schema_version"].get<int>(), kSchemaVersion);
}

TEST(Compare, SingleConfigSingleSeed) {
    const CompareResult r = run_compare({parse_experiment_config(base_config())}, {7}, 1);
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_EQ(r.rows[0].n_runs, 1);
    EXPECT_EQ(r.rows[0].rmse_std, 0.0);
    EXPECT_TRUE(r.rows[0].best_rmse);
    const std::string csv = compare_csv(r);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}
