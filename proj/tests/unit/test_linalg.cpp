#include "foma/errors.hpp"
#include "foma/linalg.hpp"
#include "test_util.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>

using namespace foma;
using foma::testing::gaussian;
using foma::testing::rel_err;
using foma::testing::with_spectrum;

namespace {

Vector oracle_singular_values(const Matrix& m) {
    // Eigenvalues of the Gram matrix of the thinner side, descending.
    const Matrix g = m.rows() >= m.cols() ? Matrix(m.transpose() * m) : Matrix(m * m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(g);
    Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return ev.reverse();
}

} // namespace

TEST(ThinSvd, ReconstructsAndIsOrthonormalOnRandomMatrices) {
    Rng rng(1234);
    std::uniform_int_distribution<int> rows_d(1, 64);
    std::uniform_int_distribution<int> cols_d(1, 16);
    for (int trial = 0; trial < 100; ++trial) {
        const Index r = rows_d(rng);
        const Index c = cols_d(rng);
        const Matrix m = gaussian(r, c, rng);
        const SvdFactors f = thin_svd(m);
        const Index p = std::min(r, c);
        ASSERT_EQ(f.u.rows(), r);
        ASSERT_EQ(f.u.cols(), p);
        ASSERT_EQ(f.s.size(), p);
        ASSERT_EQ(f.v.rows(), c);
        ASSERT_EQ(f.v.cols(), p);
        EXPECT_LT(rel_err(reconstruct(f), m), 1e-8) << r << "x" << c;
        EXPECT_LT((f.u.transpose() * f.u - Matrix::Identity(p, p)).norm(), 1e-8);
        EXPECT_LT((f.v.transpose() * f.v - Matrix::Identity(p, p)).norm(), 1e-8);
        for (Index i = 0; i + 1 < p; ++i) {
            EXPECT_GE(f.s(i), f.s(i + 1));
        }
        EXPECT_GE(f.s.minCoeff(), 0.0);
    }
}

TEST(ThinSvd, SingularValuesMatchGramEigenvalues) {
    Rng rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        const Matrix m = gaussian(20, 6, rng);
        const Vector oracle = oracle_singular_values(m);
        EXPECT_LT((thin_svd(m).s - oracle).norm() / oracle.norm(), 1e-10);
    }
}

TEST(ThinSvd, WideInputMatchesTranspose) {
    Rng rng(5);
    const Matrix m = gaussian(4, 11, rng);
    const SvdFactors f = thin_svd(m);
    EXPECT_EQ(f.s.size(), 4);
    EXPECT_LT(rel_err(reconstruct(f), m), 1e-10);
    EXPECT_LT((f.s - thin_svd(Matrix(m.transpose())).s).norm(), 1e-10);
}

TEST(ThinSvd, RankDeficientInputKeepsOrthonormalFactors) {
    Rng rng(17);
    Vector s(5);
    s << 3.0, 1.0, 0.0, 0.0, 0.0;
    const Matrix m = with_spectrum(12, s, rng);
    const SvdFactors f = thin_svd(m);
    EXPECT_LT((f.u.transpose() * f.u - Matrix::Identity(5, 5)).norm(), 1e-8);
    EXPECT_LT((f.v.transpose() * f.v - Matrix::Identity(5, 5)).norm(), 1e-8);
    EXPECT_NEAR(f.s(0), 3.0, 1e-10);
    EXPECT_NEAR(f.s(1), 1.0, 1e-10);
    EXPECT_LT(f.s.tail(3).maxCoeff(), 1e-10);
    EXPECT_LT(rel_err(reconstruct(f), m), 1e-10);
}

TEST(ThinSvd, ZeroMatrix) {
    const SvdFactors f = thin_svd(Matrix::Zero(4, 3));
    EXPECT_EQ(f.s.size(), 3);
    EXPECT_EQ(f.s.maxCoeff(), 0.0);
    EXPECT_LT((f.u.transpose() * f.u - Matrix::Identity(3, 3)).norm(), 1e-12);
}

TEST(ThinSvd, DiagonalExample) {
    Matrix m(2, 2);
    m << 3.0, 0.0, 0.0, 1.0;
    const SvdFactors f = thin_svd(m);
    EXPECT_NEAR(f.s(0), 3.0, 1e-14);
    EXPECT_NEAR(f.s(1), 1.0, 1e-14);
}

TEST(ThinSvd, RejectsNonFiniteAndEmpty) {
    Matrix m = Matrix::Ones(3, 2);
    m(1, 1) = std::nan("");
    EXPECT_THROW(thin_svd(m), InputError);
    EXPECT_THROW(thin_svd(Matrix(0, 3)), InputError);
}

TEST(SpectrumScale, SmallAndLargeModes) {
    const Vector small = spectrum_scale(4, 0.5, 1, SvMode::small);
    const Vector large = spectrum_scale(4, 0.5, 1, SvMode::large);
    EXPECT_EQ(small, (Vector(4) << 1.0, 0.5, 0.5, 0.5).finished());
    EXPECT_EQ(large, (Vector(4) << 0.5, 1.0, 1.0, 1.0).finished());
    EXPECT_EQ(spectrum_scale(3, 0.0, 3, SvMode::small), Vector::Ones(3));
}

TEST(SpectrumScale, RejectsInvalidArguments) {
    EXPECT_THROW(spectrum_scale(3, 0.5, 0, SvMode::small), ConfigError);
    EXPECT_THROW(spectrum_scale(3, 0.5, 4, SvMode::small), ConfigError);
    EXPECT_THROW(spectrum_scale(3, -0.1, 1, SvMode::small), ConfigError);
    EXPECT_THROW(spectrum_scale(3, std::nan(""), 1, SvMode::small), ConfigError);
}

TEST(ReconstructScaled, LambdaOneIsIdentityForEveryKAndMode) {
    Rng rng(3);
    const Matrix m = gaussian(10, 5, rng);
    const SvdFactors f = thin_svd(m);
    for (int k = 1; k <= 5; ++k) {
        for (SvMode mode : {SvMode::small, SvMode::large}) {
            EXPECT_LT(rel_err(reconstruct_scaled(f, 1.0, k, mode), m), 1e-8);
        }
    }
}

TEST(ReconstructScaled, EckartYoungResidual) {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix m = gaussian(30, 7, rng);
        const SvdFactors f = thin_svd(m);
        for (int k = 1; k <= 7; ++k) {
            const double residual = (reconstruct_scaled(f, 0.0, k, SvMode::small) - m).norm();
            const double expected = std::sqrt(f.s.tail(7 - k).squaredNorm());
            EXPECT_NEAR(residual, expected, 1e-8 * std::max(1.0, m.norm()));
        }
    }
}

TEST(ReconstructScaled, SmallModeDistanceIsLinearInLambda) {
    Rng rng(21);
    const Matrix m = gaussian(16, 6, rng);
    const SvdFactors f = thin_svd(m);
    const double tail = std::sqrt(f.s.tail(4).squaredNorm());
    for (double lambda : {0.0, 0.25, 0.7, 1.0}) {
        EXPECT_NEAR((reconstruct_scaled(f, lambda, 2, SvMode::small) - m).norm(), (1.0 - lambda) * tail, 1e-8);
    }
}

TEST(NumericalRank, CountsAboveRelativeThreshold) {
    EXPECT_EQ(numerical_rank((Vector(3) << 2.0, 1e-3, 1e-12).finished()), 2);
    EXPECT_EQ(numerical_rank(Vector::Zero(3)), 0);
}

TEST(PerturbationBound, HandExample) {
    Matrix a = Matrix::Zero(3, 2);
    a(0, 0) = 1.0;
    Matrix e = Matrix::Zero(3, 2);
    e(1, 1) = 2.0;
    e(2, 0) = 3.0;
    const PerturbationReport r = perturbation_bound_check(a, e);
    EXPECT_EQ(r.rank, 1);
    EXPECT_NEAR(r.lower_bound, 2.0, 1e-12);
    EXPECT_NEAR(r.sigma_tilde_min, 2.0, 1e-12);
    EXPECT_TRUE(r.holds);
}

TEST(PerturbationBound, HoldsOnRandomRankDeficientMatrices) {
    Rng rng(2024);
    std::uniform_int_distribution<int> rank_d(1, 3);
    for (int trial = 0; trial < 200; ++trial) {
        const int r = rank_d(rng);
        const Matrix a = gaussian(6, r, rng) * gaussian(r, 4, rng);
        const Matrix e = gaussian(6, 4, rng, 0.1);
        const PerturbationReport rep = perturbation_bound_check(a, e);
        EXPECT_EQ(rep.rank, r);
        EXPECT_TRUE(rep.holds) << rep.sigma_tilde_min << " < " << rep.lower_bound;
    }
}

TEST(PerturbationBound, RejectsFullRankAndShapeMismatch) {
    Rng rng(1);
    EXPECT_THROW(perturbation_bound_check(gaussian(6, 4, rng), gaussian(6, 4, rng)), PreconditionError);
    EXPECT_THROW(perturbation_bound_check(Matrix::Zero(6, 4), Matrix::Zero(5, 4)), InputError);
}
