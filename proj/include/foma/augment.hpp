#pragma once

#include "foma/dimension.hpp"
#include "foma/linalg.hpp"
#include "foma/random.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace foma {

/// Paired features (b x n) and labels (b x m); row i of x belongs to row i of y.
struct Batch {
    Matrix x;
    Matrix y;

    Index rows() const { return x.rows(); }
    /// Throws InputError on mismatched row counts, empty or non-finite data.
    void validate() const;
};

enum class Method { erm, foma, foma_rho, mixup, noise };
enum class KStrategy { id_dataset, id_batch, rho };
enum class ApplySite { input, latent, both };
enum class MuProfile { one, lambda, lambda_sq };
enum class LambdaDist { beta, uniform_above_one };

/// One augmentation method and its hyper-parameters. Only the fields that the
/// chosen method uses are validated.
struct AugmentPolicy {
    Method method = Method::erm;
    /// Beta(alpha, alpha) shape, or the upper end of Uniform(1, alpha).
    double alpha = 1.0;
    /// Explained-variance threshold (foma_rho).
    double rho = 0.95;
    /// Rank selection for method foma; foma_rho always uses rho.
    KStrategy k_strategy = KStrategy::id_dataset;
    SvMode sv_mode = SvMode::small;
    ApplySite apply_site = ApplySite::input;
    MuProfile mu_profile = MuProfile::one;
    /// Per-coordinate standard deviation of the additive noise baseline.
    double noise_sigma = 0.01;
    LambdaDist lambda_dist = LambdaDist::beta;
    /// Diagnostic override: use this lambda instead of sampling.
    std::optional<double> fixed_lambda;

    /// Throws ConfigError when a field required by `method` is invalid.
    void validate() const;
    /// The strategy actually used to pick k (rho for foma_rho).
    KStrategy effective_k_strategy() const;
    bool uses_lambda() const;
};

/// mu(lambda) multiplier for the loss.
double loss_scale(MuProfile profile, double lambda);

/// One lambda per call (one per batch), from Beta(alpha, alpha) or
/// Uniform(1, alpha) according to policy.lambda_dist.
double sample_lambda(const AugmentPolicy& policy, Rng& rng);

/// Scales the spectrum of a (b x p) by (lambda, k, mode) and reassembles.
/// Returns a unchanged when every multiplier equals 1.
Matrix foma_scale(const Matrix& a, double lambda, int k, SvMode mode);

/// FOMA on [x | y]: thin SVD, scale the chosen part of the spectrum, split the
/// columns back. Throws ConfigError unless 1 <= k <= min(b, n + m).
Batch foma_transform(const Batch& batch, double lambda, int k, SvMode mode);

/// Picks k for this batch, clamped to min(b, n + m).
///   id_dataset: the cached dataset-level estimate.
///   id_batch:   TwoNN on the rows of [x | y]; batches too small or too
///               degenerate for TwoNN fall back to the cache.
///   rho:        explained_variance_k on the singular values of [x | y].
/// Throws ConfigError when a required cache is missing.
int select_k(const Batch& batch, const AugmentPolicy& policy, const std::optional<IdEstimate>& dataset_id);

/// x' = lambda x + (1 - lambda) x[perm], same for y.
Batch mixup_transform(const Batch& batch, double lambda, std::span<const Index> permutation);

/// Adds independent N(0, sigma^2) noise to every entry of x and y.
Batch noise_transform(const Batch& batch, double sigma, Rng& rng);

/// Horizontal concatenation [x | y].
Matrix concat_columns(const Matrix& x, const Matrix& y);

// Name <-> enum conversions used by the config parser and JSON output.
std::string_view to_string(Method m);
std::string_view to_string(KStrategy s);
std::string_view to_string(SvMode m);
std::string_view to_string(ApplySite s);
std::string_view to_string(MuProfile p);
std::string_view to_string(LambdaDist d);
Method parse_method(std::string_view s);
KStrategy parse_k_strategy(std::string_view s);
SvMode parse_sv_mode(std::string_view s);
ApplySite parse_apply_site(std::string_view s);
MuProfile parse_mu_profile(std::string_view s);
LambdaDist parse_lambda_dist(std::string_view s);

} // namespace foma
