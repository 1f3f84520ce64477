#include "foma/train.hpp"

#include "foma/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace foma {

namespace {

// Stream tags for derive_stream.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kBatchStream = 2;
constexpr std::uint64_t kAugmentStream = 3;

bool is_foma(Method m) {
    return m == Method::foma || m == Method::foma_rho;
}

bool at_input(ApplySite s) {
    return s == ApplySite::input || s == ApplySite::both;
}

bool at_latent(ApplySite s) {
    return s == ApplySite::latent || s == ApplySite::both;
}

std::vector<int> layer_dims_for(const TrainConfig& config, const DatasetSplits& data) {
    std::vector<int> dims;
    dims.push_back(static_cast<int>(data.x_train.cols()));
    dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
    dims.push_back(static_cast<int>(data.y_train.cols()));
    return dims;
}

struct AdamState {
    GradientSet m;
    GradientSet v;
    long step = 0;
};

void apply_update(MlpModel& model, GradientSet& grads, const TrainConfig& config, AdamState& adam) {
    if (config.weight_decay > 0.0) {
        for (std::size_t l = 0; l < grads.weights.size(); ++l) {
            grads.weights[l] += config.weight_decay * model.weights[l];
        }
    }
    if (config.grad_clip > 0.0) {
        const double norm = std::sqrt(grads.squared_norm());
        if (norm > config.grad_clip) {
            grads.scale(config.grad_clip / norm);
        }
    }
    const double lr = config.learning_rate;
    if (config.optimizer == Optimizer::sgd) {
        for (std::size_t l = 0; l < grads.weights.size(); ++l) {
            model.weights[l] -= lr * grads.weights[l];
            model.biases[l] -= lr * grads.biases[l];
        }
        return;
    }
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;
    ++adam.step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam.step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam.step));
    const auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t l = 0; l < grads.weights.size(); ++l) {
        update(model.weights[l], grads.weights[l], adam.m.weights[l], adam.v.weights[l]);
        update(model.biases[l], grads.biases[l], adam.m.biases[l], adam.v.biases[l]);
    }
}

// Dataset-level TwoNN on the representation [Z | Y] entering `layer`.
std::optional<IdEstimate> latent_id(const MlpModel& model, const DatasetSplits& data, int layer, double discard,
                                    const std::optional<IdEstimate>& previous) {
    const Matrix z = forward_range(model, data.x_train, 0, layer).output();
    const Matrix a = concat_columns(z, data.y_train);
    try {
        return twonn_id(a, discard, static_cast<int>(a.cols()));
    } catch (const DegenerateDataError&) {
        if (previous) {
            return previous;
        }
        IdEstimate fallback;
        fallback.k = 1;
        return fallback;
    }
}

struct StepResult {
    double loss = 0.0;
    bool finite = true;
};

StepResult train_step(MlpModel& model, const Batch& clean, const TrainConfig& config, int latent_layer,
                      const std::optional<IdEstimate>& input_id, const std::optional<IdEstimate>& hidden_id,
                      Rng& rng, AdamState& adam) {
    const AugmentPolicy& policy = config.policy;
    const double lambda = policy.uses_lambda() ? sample_lambda(policy, rng) : 1.0;
    const double mu = is_foma(policy.method) ? loss_scale(policy.mu_profile, lambda) : 1.0;

    Batch batch = clean;
    bool latent = false;
    switch (policy.method) {
    case Method::erm:
        break;
    case Method::mixup: {
        std::vector<Index> perm(static_cast<std::size_t>(batch.rows()));
        std::iota(perm.begin(), perm.end(), Index{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        batch = mixup_transform(batch, lambda, perm);
        break;
    }
    case Method::noise:
        batch = noise_transform(batch, policy.noise_sigma, rng);
        break;
    case Method::foma:
    case Method::foma_rho:
        if (at_input(policy.apply_site)) {
            const int k = select_k(batch, policy, input_id);
            batch = foma_transform(batch, lambda, k, policy.sv_mode);
        }
        latent = at_latent(policy.apply_site);
        break;
    }

    GradientSet grads = GradientSet::zeros_like(model);
    StepResult result;
    if (!latent) {
        const ForwardPass pass = forward(model, batch.x);
        result.loss = mu * mse_loss(pass.output(), batch.y);
        backward_into(model, pass, mse_gradient(pass.output(), batch.y, mu), grads);
    } else {
        const ForwardPass lower = forward_range(model, batch.x, 0, latent_layer);
        const Batch z_batch{lower.output(), batch.y};
        const int k = select_k(z_batch, policy, hidden_id);
        const Matrix a = concat_columns(z_batch.x, z_batch.y);
        const Matrix scaled = foma_scale(a, lambda, k, policy.sv_mode);
        const Index nz = z_batch.x.cols();
        const Matrix y_aug = scaled.rightCols(batch.y.cols());
        const ForwardPass upper = forward_range(model, scaled.leftCols(nz), latent_layer);
        result.loss = mu * mse_loss(upper.output(), y_aug);
        const Matrix d_out = mse_gradient(upper.output(), y_aug, mu);
        const Matrix dz = backward_into(model, upper, d_out, grads);
        if (!config.latent_detached && latent_layer > 0) {
            const Matrix da = foma_vjp(a, lambda, k, policy.sv_mode, concat_columns(dz, -d_out));
            backward_into(model, lower, da.leftCols(nz), grads);
        }
    }
    if (!std::isfinite(result.loss) || !grads.all_finite()) {
        result.finite = false;
        return result;
    }
    apply_update(model, grads, config, adam);
    return result;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::ordered_json config_to_json(const TrainConfig& c) {
    const AugmentPolicy& p = c.policy;
    nlohmann::ordered_json policy{
        {"method", to_string(p.method)},
        {"alpha", p.alpha},
        {"rho", p.rho},
        {"k_strategy", to_string(p.k_strategy)},
        {"sv_mode", to_string(p.sv_mode)},
        {"apply_site", to_string(p.apply_site)},
        {"mu_profile", to_string(p.mu_profile)},
        {"noise_sigma", p.noise_sigma},
        {"lambda_dist", to_string(p.lambda_dist)},
        {"fixed_lambda", p.fixed_lambda ? nlohmann::ordered_json(*p.fixed_lambda) : nlohmann::ordered_json()},
    };
    return nlohmann::ordered_json{
        {"learning_rate", c.learning_rate},
        {"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"seed", c.seed},
        {"batch_strategy", to_string(c.batch_strategy)},
        {"optimizer", to_string(c.optimizer)},
        {"hidden", c.hidden},
        {"latent_layer", c.latent_layer},
        {"latent_detached", c.latent_detached},
        {"weight_decay", c.weight_decay},
        {"grad_clip", c.grad_clip},
        {"id_discard", c.id_discard},
        {"min_batch_rows", c.min_batch_rows},
        {"policy", policy},
    };
}

} // namespace

void TrainConfig::validate() const {
    if (!(std::isfinite(learning_rate) && learning_rate > 0.0)) {
        throw ConfigError("learning_rate must be positive");
    }
    if (epochs < 1) {
        throw ConfigError("epochs must be at least 1");
    }
    if (batch_size < 1) {
        throw ConfigError("batch_size must be at least 1");
    }
    if (hidden.empty()) {
        throw ConfigError("at least one hidden layer is required");
    }
    for (int h : hidden) {
        if (h < 1) {
            throw ConfigError("hidden widths must be positive");
        }
    }
    if (latent_layer != -1 && (latent_layer < 1 || latent_layer > static_cast<int>(hidden.size()))) {
        throw ConfigError("latent_layer must be -1 or between 1 and the number of hidden layers");
    }
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
        throw ConfigError("weight_decay must be non-negative");
    }
    if (!(grad_clip >= 0.0) || !std::isfinite(grad_clip)) {
        throw ConfigError("grad_clip must be non-negative");
    }
    if (!(id_discard >= 0.0 && id_discard < 0.5)) {
        throw ConfigError("id_discard must lie in [0, 0.5)");
    }
    if (min_batch_rows < 1) {
        throw ConfigError("min_batch_rows must be at least 1");
    }
    policy.validate();
}

int TrainConfig::resolved_latent_layer() const {
    return latent_layer == -1 ? static_cast<int>(hidden.size()) : latent_layer;
}

double RunRecord::final_gap() const {
    if (history.empty()) {
        return 0.0;
    }
    return history.back().test_rmse - history.back().train_rmse;
}

Metrics evaluate(const MlpModel& model, const Matrix& x, const Matrix& y) {
    if (x.rows() == 0) {
        return Metrics{};
    }
    return regression_metrics(predict(model, x), y);
}

TrainResult train(const TrainConfig& config, const DatasetSplits& data) {
    config.validate();
    Rng init = derive_stream(config.seed, {kInitStream});
    return train_from(config, data, make_mlp(layer_dims_for(config, data), init));
}

TrainResult train_from(const TrainConfig& config, const DatasetSplits& data, MlpModel model) {
    config.validate();
    if (data.x_train.rows() == 0) {
        throw InputError("train: empty training split");
    }
    if (data.x_train.rows() != data.y_train.rows() || data.x_val.rows() != data.y_val.rows() ||
        data.x_test.rows() != data.y_test.rows()) {
        throw InputError("train: feature and label row counts differ");
    }
    if (model.layer_dims != layer_dims_for(config, data)) {
        throw InputError("train: model widths do not match the config and data");
    }
    if (config.batch_size > data.x_train.rows()) {
        throw ConfigError("batch_size exceeds the number of training rows");
    }
    const auto start = std::chrono::steady_clock::now();

    const AugmentPolicy& policy = config.policy;
    const bool uses_id = is_foma(policy.method) && policy.effective_k_strategy() != KStrategy::rho;
    const int latent_layer = config.resolved_latent_layer();

    TrainResult result{RunRecord{}, model};
    RunRecord& record = result.record;
    record.config = config;

    std::optional<IdEstimate> input_id;
    if (uses_id && at_input(policy.apply_site)) {
        const Matrix a = concat_columns(data.x_train, data.y_train);
        input_id = twonn_id(a, config.id_discard, static_cast<int>(a.cols()));
        record.dataset_id = input_id;
    }
    std::optional<IdEstimate> hidden_id;

    AdamState adam{GradientSet::zeros_like(model), GradientSet::zeros_like(model), 0};
    MlpModel best = model;
    record.best_val_rmse = std::numeric_limits<double>::infinity();
    const bool has_val = data.x_val.rows() > 0;

    for (int epoch = 1; epoch <= config.epochs && !record.diverged; ++epoch) {
        const auto e = static_cast<std::uint64_t>(epoch);
        if (uses_id && at_latent(policy.apply_site)) {
            hidden_id = latent_id(model, data, latent_layer, config.id_discard, hidden_id);
            if (!at_input(policy.apply_site)) {
                record.dataset_id = hidden_id;
            }
        }
        Rng batch_rng = derive_stream(config.seed, {kBatchStream, e});
        const BatchPlan plan = drop_small_batches(
            make_batches(data.y_train, config.batch_strategy, config.batch_size, batch_rng),
            std::min(config.min_batch_rows, config.batch_size));

        double loss_sum = 0.0;
        std::size_t steps = 0;
        for (std::size_t bi = 0; bi < plan.batches.size(); ++bi) {
            const auto& rows = plan.batches[bi];
            const Batch batch{select_rows(data.x_train, rows), select_rows(data.y_train, rows)};
            Rng aug_rng = derive_stream(config.seed, {kAugmentStream, e, static_cast<std::uint64_t>(bi)});
            const StepResult step =
                train_step(model, batch, config, latent_layer, input_id, hidden_id, aug_rng, adam);
            if (!step.finite) {
                record.diverged = true;
                record.diagnostic = "non-finite loss or gradient at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(bi) + " (loss " + format_double(step.loss) + ")";
                break;
            }
            loss_sum += step.loss;
            ++steps;
        }
        if (record.diverged) {
            break;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = steps == 0 ? 0.0 : loss_sum / static_cast<double>(steps);
        stats.train_rmse = evaluate(model, data.x_train, data.y_train).rmse;
        stats.val_rmse = has_val ? evaluate(model, data.x_val, data.y_val).rmse : stats.train_rmse;
        const Metrics test = evaluate(model, data.x_test, data.y_test);
        stats.test_rmse = test.rmse;
        stats.test_mape = test.mape;
        if (!std::isfinite(stats.val_rmse) || !std::isfinite(stats.train_rmse)) {
            record.diverged = true;
            record.diagnostic = "non-finite evaluation metrics at epoch " + std::to_string(epoch);
            break;
        }
        record.history.push_back(stats);
        if (stats.val_rmse < record.best_val_rmse) {
            record.best_val_rmse = stats.val_rmse;
            record.best_epoch = epoch;
            best = model;
        }
    }

    if (record.best_epoch == 0) {
        record.best_val_rmse = has_val ? evaluate(best, data.x_val, data.y_val).rmse
                                       : evaluate(best, data.x_train, data.y_train).rmse;
    }
    result.model = std::move(best);
    const Metrics test = evaluate(result.model, data.x_test, data.y_test);
    record.test_rmse = test.rmse;
    record.test_mape = test.mape;
    record.train_rmse = evaluate(result.model, data.x_train, data.y_train).rmse;
    record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

std::vector<double> lambda_grid(int n) {
    if (n < 2) {
        throw ConfigError("lambda grid needs at least two points");
    }
    std::vector<double> grid(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        grid[static_cast<std::size_t>(i)] = static_cast<double>(i) / static_cast<double>(n - 1);
    }
    grid.back() = 1.0;
    return grid;
}

Batch transform_split(const Matrix& x, const Matrix& y, const SweepSpec& spec, double lambda) {
    if (x.rows() == 0 || x.rows() != y.rows()) {
        throw InputError("sweep: split must be non-empty with matching feature and label rows");
    }
    if (spec.batch_size < 1) {
        throw ConfigError("sweep: batch_size must be at least 1");
    }
    const BatchPlan plan = sequential_batches(x.rows(), std::min<Index>(spec.batch_size, x.rows()));
    Batch out{Matrix(x.rows(), x.cols()), Matrix(y.rows(), y.cols())};
    Index row = 0;
    for (const auto& rows : plan.batches) {
        const Matrix a = concat_columns(select_rows(x, rows), select_rows(y, rows));
        const Index p = std::min(a.rows(), a.cols());
        Matrix scaled = a;
        const SvdFactors f = thin_svd(a);
        if (f.s(0) > 0.0) {
            const int k = spec.k ? std::clamp(*spec.k, 1, static_cast<int>(p))
                                 : std::clamp(explained_variance_k(f.s, spec.rho), 1, static_cast<int>(p));
            scaled = foma_scale(a, lambda, k, spec.sv_mode);
        }
        const auto b = static_cast<Index>(rows.size());
        out.x.middleRows(row, b) = scaled.leftCols(x.cols());
        out.y.middleRows(row, b) = scaled.rightCols(y.cols());
        row += b;
    }
    return out;
}

std::vector<SweepPoint> lambda_sweep(const MlpModel& model, const Matrix& x, const Matrix& y, const SweepSpec& spec,
                                     const std::vector<double>& grid) {
    std::vector<SweepPoint> curve;
    curve.reserve(grid.size());
    for (double lambda : grid) {
        const Batch t = transform_split(x, y, spec, lambda);
        curve.push_back(SweepPoint{lambda, mse_loss(predict(model, t.x), t.y)});
    }
    return curve;
}

LabelHistogram label_distribution(const Matrix& x, const Matrix& y, const SweepSpec& spec,
                                  const std::vector<double>& lambdas, int bins) {
    if (bins < 1) {
        throw ConfigError("label_distribution: bins must be positive");
    }
    std::vector<Vector> series;
    series.emplace_back(y.col(0));
    for (double lambda : lambdas) {
        series.emplace_back(transform_split(x, y, spec, lambda).y.col(0));
    }
    double lo = series.front().minCoeff();
    double hi = series.front().maxCoeff();
    for (const auto& s : series) {
        lo = std::min(lo, s.minCoeff());
        hi = std::max(hi, s.maxCoeff());
    }
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    LabelHistogram h;
    h.lambdas = lambdas;
    const double width = (hi - lo) / bins;
    for (int i = 0; i <= bins; ++i) {
        h.edges.push_back(lo + width * i);
    }
    h.edges.back() = hi;
    const auto density = [&](const Vector& v) {
        std::vector<double> d(static_cast<std::size_t>(bins), 0.0);
        for (Index i = 0; i < v.size(); ++i) {
            const int bin = std::clamp(static_cast<int>((v(i) - lo) / width), 0, bins - 1);
            d[static_cast<std::size_t>(bin)] += 1.0;
        }
        for (double& c : d) {
            c /= static_cast<double>(v.size()) * width;
        }
        return d;
    };
    h.original = density(series.front());
    for (std::size_t i = 1; i < series.size(); ++i) {
        h.transformed.push_back(density(series[i]));
    }
    return h;
}

std::string config_json(const TrainConfig& config) {
    return config_to_json(config).dump(2);
}

std::string run_record_json(const RunRecord& record, bool include_timing) {
    nlohmann::ordered_json history = nlohmann::ordered_json::array();
    for (const auto& s : record.history) {
        history.push_back({{"epoch", s.epoch},
                           {"train_loss", s.train_loss},
                           {"train_rmse", s.train_rmse},
                           {"val_rmse", s.val_rmse},
                           {"test_rmse", s.test_rmse},
                           {"test_mape", s.test_mape}});
    }
    nlohmann::ordered_json id;
    if (record.dataset_id) {
        id = {{"d_hat", record.dataset_id->d_hat},
              {"k", record.dataset_id->k},
              {"n_used", record.dataset_id->n_used},
              {"n_duplicates", record.dataset_id->n_duplicates}};
    }
    nlohmann::ordered_json doc{
        {"schema_version", kSchemaVersion},
        {"seed", record.config.seed},
        {"config", config_to_json(record.config)},
        {"dataset_id", id},
        {"best_epoch", record.best_epoch},
        {"best_val_rmse", record.best_val_rmse},
        {"test_rmse", record.test_rmse},
        {"test_mape", record.test_mape},
        {"train_rmse", record.train_rmse},
        {"final_gap", record.final_gap()},
        {"diverged", record.diverged},
        {"diagnostic", record.diagnostic},
        {"grad_clip_active", record.config.grad_clip > 0.0},
        {"history", history},
    };
    if (include_timing) {
        doc["wall_seconds"] = record.wall_seconds;
    }
    return doc.dump(2) + "\n";
}

std::string history_csv(const RunRecord& record) {
    std::ostringstream out;
    out << "epoch,train_loss,train_rmse,val_rmse,test_rmse,test_mape\n";
    for (const auto& s : record.history) {
        out << s.epoch << ',' << format_double(s.train_loss) << ',' << format_double(s.train_rmse) << ','
            << format_double(s.val_rmse) << ',' << format_double(s.test_rmse) << ',' << format_double(s.test_mape)
            << '\n';
    }
    return out.str();
}

std::string_view to_string(Optimizer o) {
    return o == Optimizer::adam ? "adam" : "sgd";
}

Optimizer parse_optimizer(std::string_view s) {
    if (s == "adam") {
        return Optimizer::adam;
    }
    if (s == "sgd") {
        return Optimizer::sgd;
    }
    throw ConfigError("unknown optimizer '" + std::string(s) + "' (expected adam or sgd)");
}

} // namespace foma
