#pragma once

#include <Eigen/Dense>

namespace foma {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Thin singular value decomposition m = u * diag(s) * v^T.
///
/// For an input of shape q x r, p = min(q, r): u is q x p, s has length p
/// (non-increasing, non-negative) and v is r x p. Both u and v have
/// orthonormal columns, including the columns that belong to zero singular
/// values. Each singular pair is sign-normalized so that the entry of largest
/// magnitude in the u column is positive.
struct SvdFactors {
    Matrix u;
    Vector s;
    Matrix v;

    Index rows() const { return u.rows(); }
    Index cols() const { return v.rows(); }
    Index rank_bound() const { return s.size(); }
};

/// Which end of the spectrum the scale factor applies to.
///   small: sigma_1..sigma_k kept, sigma_{k+1}..sigma_p scaled.
///   large: sigma_1..sigma_k scaled, the tail kept.
enum class SvMode { small, large };

/// One-sided Jacobi SVD. Throws InputError on empty or non-finite input.
SvdFactors thin_svd(const Matrix& m);

/// Per-singular-value multipliers (1 or lambda) for the given split point.
/// Throws ConfigError unless 1 <= k <= p and lambda is finite and >= 0.
Vector spectrum_scale(Index p, double lambda, int k, SvMode mode);

/// u * diag(scale(s)) * v^T with the multipliers from spectrum_scale.
Matrix reconstruct_scaled(const SvdFactors& f, double lambda, int k, SvMode mode);

/// u * diag(s) * v^T.
Matrix reconstruct(const SvdFactors& f);

/// Numerical rank: number of singular values with s_j >= rel_tol * s_0.
Index numerical_rank(const Vector& s, double rel_tol = 1e-10);

struct PerturbationReport {
    bool holds = false;
    /// Smallest singular value of a + e.
    double sigma_tilde_min = 0.0;
    /// inf_2(P_perp e): smallest singular value of the noise projected onto the
    /// orthogonal complement of the column space of a.
    double lower_bound = 0.0;
    Index rank = 0;
};

/// Checks sigma_min(a + e) >= inf_2(P_perp * e) for a rank-deficient a.
///
/// P is the orthogonal projector onto the column space of a (rank detected
/// with threshold 1e-10 * sigma_1). Wide inputs are handled through their
/// transposes so that q >= r holds internally. The inequality is accepted with
/// an absolute slack of 1e-10. Throws PreconditionError if a has full
/// column rank and InputError on shape mismatch.
PerturbationReport perturbation_bound_check(const Matrix& a, const Matrix& e);

} // namespace foma
