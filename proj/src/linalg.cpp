#include "foma/linalg.hpp"

#include "foma/errors.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace foma {

namespace {

SvdFactors tall_svd(const Matrix& m) {
    const Eigen::JacobiSVD<Matrix, Eigen::ColPivHouseholderQRPreconditioner> svd(m, Eigen::ComputeThinU |
                                                                                        Eigen::ComputeThinV);
    return SvdFactors{svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

void normalize_signs(SvdFactors& f) {
    for (Index j = 0; j < f.u.cols(); ++j) {
        Index arg = 0;
        f.u.col(j).cwiseAbs().maxCoeff(&arg);
        if (f.u(arg, j) < 0.0) {
            f.u.col(j) *= -1.0;
            f.v.col(j) *= -1.0;
        }
    }
}

} // namespace

SvdFactors thin_svd(const Matrix& m) {
    if (m.rows() < 1 || m.cols() < 1) {
        throw InputError("thin_svd: matrix must have at least one row and column");
    }
    if (!m.allFinite()) {
        throw InputError("thin_svd: matrix has non-finite entries");
    }
    SvdFactors f;
    if (m.rows() >= m.cols()) {
        f = tall_svd(m);
    } else {
        SvdFactors t = tall_svd(m.transpose());
        f.u = std::move(t.v);
        f.s = std::move(t.s);
        f.v = std::move(t.u);
    }
    normalize_signs(f);
    return f;
}

Vector spectrum_scale(Index p, double lambda, int k, SvMode mode) {
    if (k < 1 || k > p) {
        throw ConfigError("k = " + std::to_string(k) + " outside [1, " + std::to_string(p) + "]");
    }
    if (!std::isfinite(lambda) || lambda < 0.0) {
        throw ConfigError("lambda must be finite and non-negative");
    }
    Vector c = Vector::Ones(p);
    if (mode == SvMode::small) {
        c.tail(p - k).setConstant(lambda);
    } else {
        c.head(k).setConstant(lambda);
    }
    return c;
}

Matrix reconstruct_scaled(const SvdFactors& f, double lambda, int k, SvMode mode) {
    const Vector c = spectrum_scale(f.s.size(), lambda, k, mode);
    return f.u * c.cwiseProduct(f.s).asDiagonal() * f.v.transpose();
}

Matrix reconstruct(const SvdFactors& f) {
    return f.u * f.s.asDiagonal() * f.v.transpose();
}

Index numerical_rank(const Vector& s, double rel_tol) {
    if (s.size() == 0 || s(0) == 0.0) {
        return 0;
    }
    const double threshold = rel_tol * s(0);
    Index rank = 0;
    while (rank < s.size() && s(rank) >= threshold) {
        ++rank;
    }
    return rank;
}

PerturbationReport perturbation_bound_check(const Matrix& a, const Matrix& e) {
    if (a.rows() != e.rows() || a.cols() != e.cols()) {
        throw InputError("perturbation_bound_check: a and e must have the same shape");
    }
    if (a.rows() < a.cols()) {
        return perturbation_bound_check(a.transpose(), e.transpose());
    }

    const SvdFactors fa = thin_svd(a);
    PerturbationReport report;
    report.rank = numerical_rank(fa.s);
    if (report.rank == a.cols()) {
        throw PreconditionError("perturbation_bound_check: a has full column rank");
    }

    const Matrix basis = fa.u.leftCols(report.rank);
    const Matrix projected = e - basis * (basis.transpose() * e);

    report.lower_bound = thin_svd(projected).s.tail(1)(0);
    report.sigma_tilde_min = thin_svd(a + e).s.tail(1)(0);
    report.holds = report.sigma_tilde_min >= report.lower_bound - 1e-10;
    return report;
}

} // namespace foma
