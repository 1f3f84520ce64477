#include "foma/augment.hpp"

#include "foma/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace foma {

void Batch::validate() const {
    if (x.rows() != y.rows()) {
        throw InputError("batch: x has " + std::to_string(x.rows()) + " rows but y has " + std::to_string(y.rows()));
    }
    if (x.rows() < 1) {
        throw InputError("batch: empty");
    }
    if (!x.allFinite() || !y.allFinite()) {
        throw InputError("batch: non-finite entries");
    }
}

void AugmentPolicy::validate() const {
    const auto check_alpha = [this] {
        if (!(std::isfinite(alpha) && alpha > 0.0)) {
            throw ConfigError("alpha must be a finite positive number");
        }
        if (lambda_dist == LambdaDist::uniform_above_one && !(alpha > 1.0)) {
            throw ConfigError("uniform_above_one lambda distribution needs alpha > 1");
        }
    };
    if (fixed_lambda && !(std::isfinite(*fixed_lambda) && *fixed_lambda >= 0.0)) {
        throw ConfigError("fixed_lambda must be finite and non-negative");
    }
    switch (method) {
    case Method::erm:
        return;
    case Method::foma:
        check_alpha();
        if (k_strategy == KStrategy::rho) {
            throw ConfigError("method foma selects k by intrinsic dimension; use foma_rho for the rho strategy");
        }
        return;
    case Method::foma_rho:
        check_alpha();
        if (!(rho > 0.0 && rho <= 1.0)) {
            throw ConfigError("rho must lie in (0, 1]");
        }
        return;
    case Method::mixup:
        check_alpha();
        return;
    case Method::noise:
        if (!(std::isfinite(noise_sigma) && noise_sigma >= 0.0)) {
            throw ConfigError("noise_sigma must be finite and non-negative");
        }
        return;
    }
}

KStrategy AugmentPolicy::effective_k_strategy() const {
    return method == Method::foma_rho ? KStrategy::rho : k_strategy;
}

bool AugmentPolicy::uses_lambda() const {
    return method == Method::foma || method == Method::foma_rho || method == Method::mixup;
}

double loss_scale(MuProfile profile, double lambda) {
    switch (profile) {
    case MuProfile::one:
        return 1.0;
    case MuProfile::lambda:
        return lambda;
    case MuProfile::lambda_sq:
        return lambda * lambda;
    }
    return 1.0;
}

double sample_lambda(const AugmentPolicy& policy, Rng& rng) {
    if (policy.fixed_lambda) {
        return *policy.fixed_lambda;
    }
    if (policy.lambda_dist == LambdaDist::uniform_above_one) {
        std::uniform_real_distribution<double> u(1.0, policy.alpha);
        return u(rng);
    }
    return sample_beta(policy.alpha, policy.alpha, rng);
}

Matrix concat_columns(const Matrix& x, const Matrix& y) {
    Matrix a(x.rows(), x.cols() + y.cols());
    a << x, y;
    return a;
}

Matrix foma_scale(const Matrix& a, double lambda, int k, SvMode mode) {
    const Index p = std::min(a.rows(), a.cols());
    const Vector c = spectrum_scale(p, lambda, k, mode);
    if ((c.array() == 1.0).all()) {
        return a;
    }
    const SvdFactors f = thin_svd(a);
    return f.u * c.cwiseProduct(f.s).asDiagonal() * f.v.transpose();
}

Batch foma_transform(const Batch& batch, double lambda, int k, SvMode mode) {
    batch.validate();
    const Matrix scaled = foma_scale(concat_columns(batch.x, batch.y), lambda, k, mode);
    return Batch{scaled.leftCols(batch.x.cols()), scaled.rightCols(batch.y.cols())};
}

int select_k(const Batch& batch, const AugmentPolicy& policy, const std::optional<IdEstimate>& dataset_id) {
    const Index p = std::min(batch.rows(), batch.x.cols() + batch.y.cols());
    const auto from_cache = [&]() -> int {
        if (!dataset_id) {
            throw ConfigError("select_k: dataset-level intrinsic dimension requested but not computed");
        }
        return std::clamp(dataset_id->k, 1, static_cast<int>(p));
    };

    switch (policy.effective_k_strategy()) {
    case KStrategy::id_dataset:
        return from_cache();
    case KStrategy::id_batch: {
        if (batch.rows() < 3) {
            if (!dataset_id) {
                throw DegenerateDataError("select_k: batch of " + std::to_string(batch.rows()) +
                                          " rows is too small for TwoNN and no dataset estimate exists");
            }
            return from_cache();
        }
        try {
            return twonn_id(concat_columns(batch.x, batch.y), 0.0, static_cast<int>(p)).k;
        } catch (const DegenerateDataError&) {
            if (!dataset_id) {
                throw;
            }
            return from_cache();
        }
    }
    case KStrategy::rho:
        return std::clamp(explained_variance_k(thin_svd(concat_columns(batch.x, batch.y)).s, policy.rho), 1,
                          static_cast<int>(p));
    }
    return 1;
}

Batch mixup_transform(const Batch& batch, double lambda, std::span<const Index> permutation) {
    batch.validate();
    const Index b = batch.rows();
    if (static_cast<Index>(permutation.size()) != b) {
        throw InputError("mixup: permutation length must equal the batch size");
    }
    std::vector<bool> seen(static_cast<std::size_t>(b), false);
    for (Index i : permutation) {
        if (i < 0 || i >= b || seen[static_cast<std::size_t>(i)]) {
            throw InputError("mixup: permutation is not a bijection on rows");
        }
        seen[static_cast<std::size_t>(i)] = true;
    }
    Batch out{Matrix(batch.x.rows(), batch.x.cols()), Matrix(batch.y.rows(), batch.y.cols())};
    for (Index i = 0; i < b; ++i) {
        const Index j = permutation[static_cast<std::size_t>(i)];
        out.x.row(i) = lambda * batch.x.row(i) + (1.0 - lambda) * batch.x.row(j);
        out.y.row(i) = lambda * batch.y.row(i) + (1.0 - lambda) * batch.y.row(j);
    }
    return out;
}

Batch noise_transform(const Batch& batch, double sigma, Rng& rng) {
    batch.validate();
    if (!(sigma >= 0.0)) {
        throw ConfigError("noise sigma must be non-negative");
    }
    if (sigma == 0.0) {
        return batch;
    }
    std::normal_distribution<double> normal(0.0, sigma);
    Batch out = batch;
    for (Index i = 0; i < out.x.size(); ++i) {
        out.x.data()[i] += normal(rng);
    }
    for (Index i = 0; i < out.y.size(); ++i) {
        out.y.data()[i] += normal(rng);
    }
    return out;
}

namespace {

template <typename E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

constexpr NameTable<Method, 5> kMethods{{{Method::erm, "erm"},
                                         {Method::foma, "foma"},
                                         {Method::foma_rho, "foma_rho"},
                                         {Method::mixup, "mixup"},
                                         {Method::noise, "noise"}}};
constexpr NameTable<KStrategy, 3> kStrategies{
    {{KStrategy::id_dataset, "id_dataset"}, {KStrategy::id_batch, "id_batch"}, {KStrategy::rho, "rho"}}};
constexpr NameTable<SvMode, 2> kSvModes{{{SvMode::small, "small"}, {SvMode::large, "large"}}};
constexpr NameTable<ApplySite, 3> kSites{
    {{ApplySite::input, "input"}, {ApplySite::latent, "latent"}, {ApplySite::both, "both"}}};
constexpr NameTable<MuProfile, 3> kProfiles{
    {{MuProfile::one, "one"}, {MuProfile::lambda, "lambda"}, {MuProfile::lambda_sq, "lambda_sq"}}};
constexpr NameTable<LambdaDist, 2> kDists{
    {{LambdaDist::beta, "beta"}, {LambdaDist::uniform_above_one, "uniform_above_one"}}};

template <typename E, std::size_t N>
std::string_view name_of(const NameTable<E, N>& table, E value) {
    for (const auto& [e, name] : table) {
        if (e == value) {
            return name;
        }
    }
    return "?";
}

template <typename E, std::size_t N>
E parse_name(const NameTable<E, N>& table, std::string_view s, std::string_view what) {
    for (const auto& [e, name] : table) {
        if (name == s) {
            return e;
        }
    }
    std::string allowed;
    for (const auto& entry : table) {
        allowed += (allowed.empty() ? "" : "|") + std::string(entry.second);
    }
    throw ConfigError("unknown " + std::string(what) + " '" + std::string(s) + "' (expected " + allowed + ")");
}

} // namespace

std::string_view to_string(Method m) { return name_of(kMethods, m); }
std::string_view to_string(KStrategy s) { return name_of(kStrategies, s); }
std::string_view to_string(SvMode m) { return name_of(kSvModes, m); }
std::string_view to_string(ApplySite s) { return name_of(kSites, s); }
std::string_view to_string(MuProfile p) { return name_of(kProfiles, p); }
std::string_view to_string(LambdaDist d) { return name_of(kDists, d); }
Method parse_method(std::string_view s) { return parse_name(kMethods, s, "method"); }
KStrategy parse_k_strategy(std::string_view s) { return parse_name(kStrategies, s, "k_strategy"); }
SvMode parse_sv_mode(std::string_view s) { return parse_name(kSvModes, s, "sv_mode"); }
ApplySite parse_apply_site(std::string_view s) { return parse_name(kSites, s, "apply_site"); }
MuProfile parse_mu_profile(std::string_view s) { return parse_name(kProfiles, s, "mu_profile"); }
LambdaDist parse_lambda_dist(std::string_view s) { return parse_name(kDists, s, "lambda_dist"); }

} // namespace foma
