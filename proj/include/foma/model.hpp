#pragma once

#include "foma/linalg.hpp"
#include "foma/random.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace foma {

/// Fully connected regressor: ReLU on hidden layers, identity on the output.
/// Layer l maps width layer_dims[l] to layer_dims[l + 1] with
/// weights[l] (in x out) and biases[l] (out); rows of the activations are
/// samples.
struct MlpModel {
    std::vector<int> layer_dims;
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    int num_layers() const { return static_cast<int>(weights.size()); }
    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
    std::size_t parameter_count() const;
    /// Throws InputError unless the shapes chain together.
    void validate() const;
};

/// Weights and biases ~ Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
MlpModel make_mlp(const std::vector<int>& layer_dims, Rng& rng);

/// Activations of a forward pass starting at `first_layer`.
/// activations[0] is the input to that layer; activations[i] is the output of
/// layer first_layer + i - 1. The last entry is the prediction.
struct ForwardPass {
    int first_layer = 0;
    std::vector<Matrix> activations;

    const Matrix& input() const { return activations.front(); }
    const Matrix& output() const { return activations.back(); }
};

ForwardPass forward(const MlpModel& model, const Matrix& x);

/// Runs layers [first_layer, last_layer) on z; last_layer = -1 means to the end.
ForwardPass forward_range(const MlpModel& model, const Matrix& z, int first_layer, int last_layer = -1);

Matrix predict(const MlpModel& model, const Matrix& x);

/// One tensor per parameter tensor, shape-matched.
struct GradientSet {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    static GradientSet zeros_like(const MlpModel& model);
    double squared_norm() const;
    void scale(double factor);
    bool all_finite() const;
};

struct Metrics {
    double mse = 0.0;
    double rmse = 0.0;
    /// 100 * mean(|y - y_hat| / |y|) over entries with |y| > 1e-12.
    double mape = 0.0;
    /// Entries left out of the MAPE because their label is (near) zero.
    int mape_excluded = 0;
};

/// Mean of squared residuals over all b * m entries.
double mse_loss(const Matrix& y_hat, const Matrix& y);
Metrics regression_metrics(const Matrix& y_hat, const Matrix& y);

/// d(mu * mse) / d(y_hat).
Matrix mse_gradient(const Matrix& y_hat, const Matrix& y, double mu);

/// Backpropagates d_output through the layers covered by `pass`, adding the
/// parameter gradients into `grads`. Returns the gradient with respect to
/// pass.input().
Matrix backward_into(const MlpModel& model, const ForwardPass& pass, const Matrix& d_output, GradientSet& grads);

/// Exact gradient of mu * mse(forward(x), y) for a full forward pass.
GradientSet backward(const MlpModel& model, const ForwardPass& pass, const Matrix& y, double mu);

/// Vector-Jacobian product of a -> U diag(c * s) V^T (the FOMA spectrum
/// scaling) at `a`, contracted with `upstream`.
///
/// Uses the analytic SVD differential. The off-diagonal factors
/// 1 / (s_j^2 - s_i^2) only enter for pairs that straddle the split point and
/// their denominators are clamped to sign(.) * max(|.|, kSvdGapEpsilon * s_1^2).
/// When every multiplier is 1 the map is the identity and `upstream` is
/// returned unchanged.
Matrix foma_vjp(const Matrix& a, double lambda, int k, SvMode mode, const Matrix& upstream);

inline constexpr double kSvdGapEpsilon = 1e-8;

/// Text checkpoint (format described in README). Throws IoError.
void save_checkpoint(const MlpModel& model, const std::string& path);
MlpModel load_checkpoint(const std::string& path);

} // namespace foma
