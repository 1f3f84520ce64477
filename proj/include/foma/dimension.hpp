#pragma once

#include "foma/linalg.hpp"

#include <vector>

namespace foma {

/// Result of a TwoNN intrinsic-dimension fit.
struct IdEstimate {
    double d_hat = 0.0;
    /// Points whose ratio entered the regression (after duplicate collapse and
    /// discarding the largest ratios).
    int n_used = 0;
    /// round(d_hat) clamped to [1, p].
    int k = 1;
    /// Rows removed because they coincided (within 1e-12) with an earlier row.
    int n_duplicates = 0;
};

/// Rows closer than this (Euclidean) are treated as one point.
inline constexpr double kDuplicateTolerance = 1e-12;

struct DeduplicatedPoints {
    Matrix points;
    int n_duplicates = 0;
};

/// Keeps the first occurrence of every group of coincident rows.
DeduplicatedPoints collapse_duplicates(const Matrix& points, double tol = kDuplicateTolerance);

/// mu_i = r2 / r1 for every row, where r1 <= r2 are the distances to the two
/// nearest other rows (brute force). Unsorted, in row order.
/// Throws DegenerateDataError if some r1 is zero.
std::vector<double> twonn_ratios(const Matrix& points);

/// TwoNN estimate of the intrinsic dimension of the rows of `points`.
///
/// Ratios are sorted ascending and paired with plotting positions
/// F_i = i / (N + 1); the slope of the least-squares line through the origin
/// on (log mu_i, -log(1 - F_i)) is the estimate. The largest
/// floor(discard_fraction * N) ratios are left out of the fit.
/// `max_k` bounds the integer k (0 means the ambient dimension).
IdEstimate twonn_id(const Matrix& points, double discard_fraction = 0.0, int max_k = 0);

/// round(d_hat) clamped to [1, p].
int id_to_k(double d_hat, Index p);

/// Largest k such that sum_{j<=k} s_j / sum_j s_j <= rho, or 1 when even the
/// first singular value exceeds the threshold. Throws InputError for an
/// all-zero spectrum and ConfigError unless 0 < rho <= 1.
int explained_variance_k(const Vector& s, double rho);

} // namespace foma
