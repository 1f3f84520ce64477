#pragma once

#include "foma/augment.hpp"
#include "foma/batching.hpp"
#include "foma/data.hpp"
#include "foma/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace foma {

enum class Optimizer { adam, sgd };

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 100;
    int batch_size = 16;
    std::uint64_t seed = 0;
    AugmentPolicy policy;
    BatchStrategy batch_strategy = BatchStrategy::random;
    Optimizer optimizer = Optimizer::adam;
    std::vector<int> hidden{128, 128};
    /// Number of layers applied before the latent augmentation site;
    /// -1 selects the output of the last hidden layer.
    int latent_layer = -1;
    /// Treat augmented latent activations as constants (no gradient through
    /// the transform into the layers below the site).
    bool latent_detached = false;
    /// L2 penalty added to the gradient (0 disables).
    double weight_decay = 0.0;
    /// Global gradient max-norm (0 disables).
    double grad_clip = 0.0;
    /// Fraction of the largest TwoNN ratios dropped for the dataset-level ID.
    double id_discard = 0.0;
    /// Training batches with fewer rows are skipped.
    int min_batch_rows = 3;

    /// Throws ConfigError on invalid values.
    void validate() const;
    /// latent_layer resolved against the model depth.
    int resolved_latent_layer() const;
};

struct EpochStats {
    int epoch = 0;
    /// Mean loss over the (augmented) training batches of the epoch.
    double train_loss = 0.0;
    /// RMSE of the model on the clean training split after the epoch.
    double train_rmse = 0.0;
    double val_rmse = 0.0;
    double test_rmse = 0.0;
    double test_mape = 0.0;
};

struct RunRecord {
    TrainConfig config;
    std::vector<EpochStats> history;
    /// Epoch (1-based) whose parameters were kept; 0 when none completed.
    int best_epoch = 0;
    double best_val_rmse = 0.0;
    double test_rmse = 0.0;
    double test_mape = 0.0;
    double train_rmse = 0.0;
    bool diverged = false;
    std::string diagnostic;
    /// Dataset-level estimate used for k (id_dataset only).
    std::optional<IdEstimate> dataset_id;
    double wall_seconds = 0.0;

    /// test - train RMSE at the final epoch.
    double final_gap() const;
};

struct TrainResult {
    RunRecord record;
    MlpModel model;
};

/// Seeded training loop: one lambda and one k per batch, the policy transform
/// at the configured site(s), mu(lambda)-scaled MSE on the augmented pair, an
/// optimizer step; evaluation every epoch and the best-validation parameters
/// restored at the end. A non-finite loss stops training with
/// record.diverged set.
TrainResult train(const TrainConfig& config, const DatasetSplits& data);

/// Trains starting from the given parameters instead of a fresh init.
TrainResult train_from(const TrainConfig& config, const DatasetSplits& data, MlpModel model);

Metrics evaluate(const MlpModel& model, const Matrix& x, const Matrix& y);

/// n evenly spaced values from 0 to 1 inclusive.
std::vector<double> lambda_grid(int n = 100);

struct SweepSpec {
    /// Fixed k (clamped to each batch) when set; otherwise explained variance
    /// with `rho`.
    std::optional<int> k;
    double rho = 0.95;
    SvMode sv_mode = SvMode::small;
    int batch_size = 16;
};

struct SweepPoint {
    double lambda = 0.0;
    double mse = 0.0;
};

/// For each lambda, transforms every batch of a sequential partition of
/// (x, y) and records the MSE of the model's predictions on the transformed
/// features against the transformed labels.
std::vector<SweepPoint> lambda_sweep(const MlpModel& model, const Matrix& x, const Matrix& y, const SweepSpec& spec,
                                     const std::vector<double>& grid);

/// [x | y] of every sequential batch transformed with lambda (rows in order).
Batch transform_split(const Matrix& x, const Matrix& y, const SweepSpec& spec, double lambda);

struct LabelHistogram {
    /// bins + 1 edges shared by every series.
    std::vector<double> edges;
    /// Density of the original labels (first label column).
    std::vector<double> original;
    std::vector<double> lambdas;
    /// density[i] for lambdas[i].
    std::vector<std::vector<double>> transformed;
};

LabelHistogram label_distribution(const Matrix& x, const Matrix& y, const SweepSpec& spec,
                                  const std::vector<double>& lambdas, int bins = 30);

/// Serialized RunRecord (deterministic apart from wall_seconds, which is
/// only written when include_timing is set).
std::string run_record_json(const RunRecord& record, bool include_timing = false);
std::string history_csv(const RunRecord& record);
/// Config as a JSON object (used inside run_record_json).
std::string config_json(const TrainConfig& config);

inline constexpr int kSchemaVersion = 1;

std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view s);

} // namespace foma
