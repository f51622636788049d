#include "rpo/linalg.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace rpo;
using rpo::testing::random_spd;
using rpo::testing::random_symmetric;

TEST(Qf, IdentityIsFixed)
{
    EXPECT_LT((qf(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)).norm(), 1e-15);
}

TEST(Qf, SingleColumnNormalizes)
{
    Matrix A(2, 1);
    A << 3, 4;
    Matrix Q = qf(A);
    EXPECT_NEAR(Q(0, 0), 0.6, 1e-15);
    EXPECT_NEAR(Q(1, 0), 0.8, 1e-15);
}

TEST(Qf, ReconstructsWithPositiveDiagonal)
{
    Rng rng(1);
    const Matrix A = rng.symmetric_uniform_matrix(6, 3);
    const Matrix Q = qf(A);
    const Matrix R = Q.transpose() * A;
    EXPECT_LT((Q * R - A).norm(), 1e-12);
    EXPECT_LT((Q.transpose() * Q - Matrix::Identity(3, 3)).norm(), 1e-13);
    for (int i = 0; i < 3; ++i) EXPECT_GT(R(i, i), 0.0);
    EXPECT_LT(R.triangularView<Eigen::StrictlyLower>().toDenseMatrix().norm(), 1e-12);
}

TEST(Qf, Idempotent)
{
    Rng rng(2);
    const Matrix Q = qf(rng.symmetric_uniform_matrix(7, 4));
    EXPECT_LT((qf(Q) - Q).norm(), 1e-12);
}

TEST(Qf, RankDeficientThrows)
{
    Matrix A(3, 2);
    A << 1, 2, 2, 4, 3, 6;
    try {
        qf(A);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "rank deficient in qf");
    }
}

TEST(Chol, DiagonalCases)
{
    EXPECT_LT((chol(Matrix(Matrix::Identity(2, 2))) - Matrix::Identity(2, 2)).norm(), 1e-15);
    const Matrix D = Eigen::Vector2d(4, 9).asDiagonal();
    const Matrix R = chol(D);
    EXPECT_NEAR(R(0, 0), 2.0, 1e-15);
    EXPECT_NEAR(R(1, 1), 3.0, 1e-15);
    EXPECT_EQ(R(0, 1), 0.0);
}

TEST(Chol, Reconstruction)
{
    Rng rng(3);
    const Matrix S = random_spd(rng, 8);
    const Matrix R = chol(S);
    EXPECT_LT((R.transpose() * R - S).norm() / S.norm(), 1e-12);
    for (int i = 0; i < 8; ++i) EXPECT_GT(R(i, i), 0.0);
}

TEST(Chol, IndefiniteThrows)
{
    const Matrix D = Eigen::Vector2d(1, -1).asDiagonal();
    try {
        chol(D);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "matrix not positive definite");
    }
}

TEST(SpdMatrix, RejectsAsymmetricAndNonFinite)
{
    Matrix A = Matrix::Identity(2, 2);
    A(0, 1) = 0.1;
    EXPECT_THROW(SpdMatrix{A}, Error);
    Matrix B = Matrix::Identity(2, 2);
    B(1, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(SpdMatrix{B}, Error);
}

TEST(SymEig, SimpleCases)
{
    SymEig e = sym_eig(Matrix::Identity(2, 2));
    EXPECT_DOUBLE_EQ(e.values(0), 1.0);
    EXPECT_DOUBLE_EQ(e.values(1), 1.0);
    e = sym_eig(Eigen::Vector2d(-1, 5).asDiagonal().toDenseMatrix());
    EXPECT_DOUBLE_EQ(e.values(0), -1.0);
    EXPECT_DOUBLE_EQ(e.values(1), 5.0);
    EXPECT_NEAR(std::abs(e.vectors(0, 0)), 1.0, 1e-15);
    EXPECT_NEAR(std::abs(e.vectors(1, 1)), 1.0, 1e-15);
}

TEST(SymEig, Reconstruction)
{
    Rng rng(4);
    const Matrix S = random_symmetric(rng, 9);
    const SymEig e = sym_eig(S);
    EXPECT_LT((e.vectors * e.values.asDiagonal() * e.vectors.transpose() - S).norm() / S.norm(), 1e-10);
    EXPECT_LT((e.vectors.transpose() * e.vectors - Matrix::Identity(9, 9)).norm(), 1e-12);
    for (int i = 1; i < 9; ++i) EXPECT_LE(e.values(i - 1), e.values(i));
}

TEST(SymEig, AsymmetricThrows)
{
    Matrix A(2, 2);
    A << 1, 2, 0, 1;
    EXPECT_THROW(sym_eig(A), Error);
}

TEST(PrecondFactor, LimitingCases)
{
    EXPECT_LT((precond_factor_matrix(Matrix::Identity(3, 3), 0.0) - Matrix::Identity(3, 3)).norm(), 1e-14);
    const Matrix P = precond_factor_matrix(Eigen::Vector2d(2, -3).asDiagonal().toDenseMatrix(), 0.0);
    EXPECT_NEAR(P(0, 0), 2.0, 1e-14);
    EXPECT_NEAR(P(1, 1), 3.0, 1e-14);
    EXPECT_NEAR(P(0, 1), 0.0, 1e-14);
}

TEST(PrecondFactor, SquaringOracle)
{
    Rng rng(5);
    const Matrix M = rng.symmetric_uniform_matrix(6, 6);
    const double delta = 1e-6;
    const SpdMatrix P = precond_factor(M, delta);
    const Matrix target = sym(M) * sym(M) + delta * Matrix::Identity(6, 6);
    EXPECT_LT((P.matrix() * P.matrix() - target).norm(), 1e-9);
    const Vector lam = sym_eig(sym(M)).values;
    Vector expect = (lam.array().square() + delta).sqrt();
    std::sort(expect.data(), expect.data() + expect.size());
    EXPECT_LT((sym_eig(P.matrix()).values - expect).norm(), 1e-12);
}

TEST(Lyap, IdentityHalves)
{
    Rng rng(6);
    const Matrix C = random_symmetric(rng, 4);
    EXPECT_LT((lyap_solve(SpdMatrix::identity(4), C) - 0.5 * C).norm(), 1e-15);
    EXPECT_EQ(lyap_solve(SpdMatrix::identity(4), Matrix::Zero(4, 4)).norm(), 0.0);
}

TEST(Lyap, DiagonalAgainstKroneckerSystem)
{
    const Matrix M = Eigen::Vector2d(2.0, 5.0).asDiagonal();
    Matrix C(2, 2);
    C << 1.0, -0.4, -0.4, 3.0;
    const Matrix S = lyap_solve(SpdMatrix(M), C);
    // vec(M^-1 S + S M^-1) = (I kron M^-1 + M^-1 kron I) vec(S)
    const Matrix Mi = M.inverse();
    Matrix K = Matrix::Zero(4, 4);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) {
                K(i + 2 * j, k + 2 * j) += Mi(i, k);
                K(i + 2 * j, i + 2 * k) += Mi(k, j);
            }
    const Vector s = K.partialPivLu().solve(Eigen::Map<const Vector>(C.data(), 4));
    EXPECT_LT((Eigen::Map<const Vector>(S.data(), 4) - s).norm(), 1e-14);
    EXPECT_NEAR(S(0, 1), -0.4 / (0.5 + 0.2), 1e-15);
}

TEST(Lyap, ResidualAndLinearity)
{
    Rng rng(7);
    const SpdMatrix M(random_spd(rng, 5));
    const Matrix C1 = random_symmetric(rng, 5), C2 = random_symmetric(rng, 5);
    const Matrix S = lyap_solve(M, C1);
    const Matrix Mi = M.solve(Matrix::Identity(5, 5));
    EXPECT_LT((Mi * S + S * Mi - C1).norm() / C1.norm(), 1e-10);
    EXPECT_LT((S - S.transpose()).norm(), 1e-15);
    const Matrix lhs = lyap_solve(M, 2.5 * C1 + C2);
    EXPECT_LT((lhs - 2.5 * S - lyap_solve(M, C2)).norm(), 1e-10);
}

TEST(Lyap, NonSpdThrows) { EXPECT_THROW(lyap_solve(SpdMatrix(-Matrix::Identity(2, 2)), Matrix::Zero(2, 2)), Error); }

TEST(SvdThin, SimpleCases)
{
    EXPECT_LT((svd_thin(Matrix::Identity(3, 3)).sigma - Vector::Ones(3)).norm(), 1e-15);
    const ThinSvd s = svd_thin(Eigen::Vector2d(3, 0).asDiagonal().toDenseMatrix());
    EXPECT_DOUBLE_EQ(s.sigma(0), 3.0);
    EXPECT_DOUBLE_EQ(s.sigma(1), 0.0);
}

TEST(SvdThin, Reconstruction)
{
    Rng rng(8);
    const Matrix A = rng.symmetric_uniform_matrix(7, 4);
    const ThinSvd s = svd_thin(A);
    EXPECT_LT((s.U * s.sigma.asDiagonal() * s.V.transpose() - A).norm() / A.norm(), 1e-10);
    EXPECT_LT((s.U.transpose() * s.U - Matrix::Identity(4, 4)).norm(), 1e-12);
    EXPECT_LT((s.V.transpose() * s.V - Matrix::Identity(4, 4)).norm(), 1e-12);
    for (int i = 1; i < 4; ++i) EXPECT_GE(s.sigma(i - 1), s.sigma(i));
}

TEST(SolveSpd, Cases)
{
    Rng rng(9);
    const Matrix B = rng.symmetric_uniform_matrix(3, 2);
    EXPECT_LT((solve_spd(SpdMatrix::identity(3), B) - B).norm(), 1e-15);
    const Matrix x = solve_spd(SpdMatrix(Eigen::Vector2d(2, 4).asDiagonal().toDenseMatrix()), Vector::Ones(2));
    EXPECT_DOUBLE_EQ(x(0), 0.5);
    EXPECT_DOUBLE_EQ(x(1), 0.25);
    const SpdMatrix S(random_spd(rng, 6));
    const Matrix Bs = rng.symmetric_uniform_matrix(6, 3);
    EXPECT_LT((S.matrix() * solve_spd(S, Bs) - Bs).norm() / Bs.norm(), 1e-12);
    EXPECT_THROW(solve_spd(SpdMatrix(Eigen::Vector2d(1, -2).asDiagonal().toDenseMatrix()), Vector::Ones(2)), Error);
}
