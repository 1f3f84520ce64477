#include "foma/dimension.hpp"

#include "foma/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace foma {

DeduplicatedPoints collapse_duplicates(const Matrix& points, double tol) {
    const double tol_sq = tol * tol;
    std::vector<Index> kept;
    kept.reserve(static_cast<std::size_t>(points.rows()));
    for (Index i = 0; i < points.rows(); ++i) {
        bool duplicate = false;
        for (Index j : kept) {
            if ((points.row(i) - points.row(j)).squaredNorm() < tol_sq) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) {
            kept.push_back(i);
        }
    }
    DeduplicatedPoints out;
    out.n_duplicates = static_cast<int>(points.rows() - static_cast<Index>(kept.size()));
    out.points.resize(static_cast<Index>(kept.size()), points.cols());
    for (std::size_t r = 0; r < kept.size(); ++r) {
        out.points.row(static_cast<Index>(r)) = points.row(kept[r]);
    }
    return out;
}

std::vector<double> twonn_ratios(const Matrix& points) {
    const Index n = points.rows();
    if (n < 3) {
        throw InputError("twonn: need at least 3 points, got " + std::to_string(n));
    }
    // Row-major copy keeps the inner distance loop contiguous.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> p = points;
    std::vector<double> mu(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        double r1 = std::numeric_limits<double>::infinity();
        double r2 = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            const double d = (p.row(i) - p.row(j)).squaredNorm();
            if (d < r1) {
                r2 = r1;
                r1 = d;
            } else if (d < r2) {
                r2 = d;
            }
        }
        if (r1 == 0.0) {
            throw DegenerateDataError("twonn: point " + std::to_string(i) + " has a coincident neighbor");
        }
        mu[static_cast<std::size_t>(i)] = std::sqrt(r2 / r1);
    }
    return mu;
}

int id_to_k(double d_hat, Index p) {
    const auto rounded = static_cast<Index>(std::llround(d_hat));
    return static_cast<int>(std::clamp<Index>(rounded, 1, std::max<Index>(p, 1)));
}

IdEstimate twonn_id(const Matrix& points, double discard_fraction, int max_k) {
    if (points.rows() < 3) {
        throw InputError("twonn: need at least 3 points, got " + std::to_string(points.rows()));
    }
    if (!points.allFinite()) {
        throw InputError("twonn: points contain non-finite values");
    }
    if (!(discard_fraction >= 0.0 && discard_fraction < 0.5)) {
        throw ConfigError("twonn: discard_fraction must lie in [0, 0.5)");
    }

    const DeduplicatedPoints unique = collapse_duplicates(points);
    if (unique.points.rows() < 3) {
        throw DegenerateDataError("twonn: fewer than 3 distinct points after collapsing duplicates");
    }

    std::vector<double> mu = twonn_ratios(unique.points);
    std::sort(mu.begin(), mu.end());

    const auto n = static_cast<Index>(mu.size());
    const auto discarded = static_cast<Index>(std::floor(discard_fraction * static_cast<double>(n)));
    const Index used = n - discarded;

    double sxy = 0.0;
    double sxx = 0.0;
    for (Index i = 0; i < used; ++i) {
        const double x = std::log(mu[static_cast<std::size_t>(i)]);
        const double f = static_cast<double>(i + 1) / static_cast<double>(n + 1);
        const double y = -std::log1p(-f);
        sxy += x * y;
        sxx += x * x;
    }
    if (sxx == 0.0) {
        throw DegenerateDataError("twonn: all neighbor ratios equal 1 (equidistant points)");
    }

    IdEstimate est;
    est.d_hat = sxy / sxx;
    est.n_used = static_cast<int>(used);
    est.n_duplicates = unique.n_duplicates;
    const Index p = max_k > 0 ? Index{max_k} : points.cols();
    est.k = id_to_k(est.d_hat, p);
    return est;
}

int explained_variance_k(const Vector& s, double rho) {
    if (!(rho > 0.0 && rho <= 1.0)) {
        throw ConfigError("explained variance threshold rho must lie in (0, 1]");
    }
    if (s.size() == 0) {
        throw InputError("explained_variance_k: empty spectrum");
    }
    const double total = s.sum();
    if (!(total > 0.0)) {
        throw InputError("explained_variance_k: spectrum sums to zero");
    }
    // Fractions that equal rho in exact arithmetic may land an ulp above it.
    const double slack = 1e-12;
    double cumulative = 0.0;
    int k = 0;
    for (Index j = 0; j < s.size(); ++j) {
        cumulative += s(j);
        if (cumulative / total <= rho + slack) {
            k = static_cast<int>(j + 1);
        } else {
            break;
        }
    }
    return std::max(k, 1);
}

} // namespace foma
