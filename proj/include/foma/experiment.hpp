#pragma once

#include "foma/data.hpp"
#include "foma/train.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace foma {

/// Where the data for an experiment comes from and how it is prepared.
struct DataSource {
    /// "airfoil", "no2" (column layout and split sizes preset) or "csv".
    std::string dataset = "csv";
    /// Empty: $FOMA_DATA_DIR/<preset file>, falling back to data/<preset file>.
    std::string data_path;
    int n_features = 0;
    int n_labels = 1;
    bool header = false;
    SplitSizes sizes;
    /// JSON split index file; overrides the seeded split when set.
    std::string split_file;
    /// Seed for the split shuffle; unset means the training seed.
    std::optional<std::uint64_t> split_seed;
    bool normalize = true;

    std::string resolved_path() const;
};

/// A flat key = value experiment file (see README for the keys).
struct ExperimentConfig {
    std::string name;
    DataSource data;
    TrainConfig train;
    std::string out_dir;
};

/// Parses the key = value text. Lines starting with '#' and blank lines are
/// ignored. Unknown keys, duplicate keys and invalid values throw ConfigError;
/// the whole configuration is validated before returning.
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_experiment_config(const std::string& path);

/// Applies one "key=value" override on top of an existing config.
void apply_config_override(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Loads the table, splits it (seeded by split_seed or `seed`) and normalizes
/// the features when requested.
Dataset prepare_dataset(const DataSource& source, std::uint64_t seed);

struct RunOutcome {
    std::size_t config_index = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    RunRecord record;
};

struct CompareRow {
    std::string name;
    std::string dataset;
    std::string method;
    int n_runs = 0;
    int n_failed = 0;
    double rmse_mean = 0.0;
    double rmse_std = 0.0;
    double mape_mean = 0.0;
    double mape_std = 0.0;
    double gap_mean = 0.0;
    double gap_std = 0.0;
    bool best_rmse = false;
    bool best_mape = false;
};

struct CompareResult {
    std::vector<RunOutcome> runs;
    std::vector<CompareRow> rows;
};

/// Runs every (config, seed) pair on up to `jobs` worker threads. Failures are
/// recorded per run and aggregation continues. Rows follow the config order;
/// best flags mark the lowest mean per dataset.
CompareResult run_compare(const std::vector<ExperimentConfig>& configs, const std::vector<std::uint64_t>& seeds,
                          int jobs = 1);

std::string compare_csv(const CompareResult& result);
std::string compare_json(const CompareResult& result);

/// Mean and sample standard deviation (0 for a single value).
std::pair<double, double> mean_std(const std::vector<double>& values);

} // namespace foma
