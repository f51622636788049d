#include "rpo/solvers.hpp"
#include "rpo/tsvd.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace rpo;
using namespace rpo::tsvd;

namespace {

Benchmark small_benchmark(std::uint64_t seed, Metric tag, Eigen::Index m = 30, Eigen::Index n = 20, Eigen::Index p = 4)
{
    Rng rng(seed);
    return build_benchmark({m, n, p, 1.0 / 1.5}, 1e-15, tag, rng);
}

}  // namespace

TEST(SvdCost, SimpleCases)
{
    const SvdProblem Z = make(Matrix::Zero(4, 3), Vector::Ones(1), 1e-15, Metric::E);
    EXPECT_EQ(cost(Z, Matrix(Vector::Unit(4, 0)), Matrix(Vector::Unit(3, 0))), 0.0);
    const Vector u = Vector::Unit(4, 1), v = Vector::Unit(3, 2);
    const SvdProblem P = make(u * v.transpose(), Vector::Ones(1), 1e-15, Metric::E);
    EXPECT_DOUBLE_EQ(cost(P, u, v), -1.0);
    Rng rng(1);
    const SvdProblem R = make(rng.uniform_matrix(5, 4), Eigen::Vector2d(2, 1), 1e-15, Metric::E);
    const ProductPoint x = random_initial_point(R, rng);
    EXPECT_NEAR(cost(R, x[0], x[1]), -(x[0].transpose() * R.A * x[1] * R.N.asDiagonal()).trace(), 1e-14);
}

TEST(SvdMake, Validation)
{
    EXPECT_THROW(make(Matrix::Zero(3, 2), Eigen::Vector2d(2, 1), 1e-15, Metric::E), Error);
    EXPECT_THROW(make(Matrix::Zero(4, 3), Vector::Ones(1), 0.0, Metric::E), Error);
    EXPECT_THROW(make(Matrix::Zero(4, 3), Eigen::Vector2d(1, 1), 1e-15, Metric::E), Error);
}

TEST(SvdMetricFactors, SolutionFormAndIdentity)
{
    Benchmark b = small_benchmark(2, Metric::R12);
    const MetricFactors F = metric_factors(b.problem, b.Ustar, b.Vstar);
    const Vector d = (b.sigma.head(4).array().square() * b.problem.N.array().square() + b.problem.delta).sqrt();
    EXPECT_LT((F[0].R->matrix() - Matrix(d.asDiagonal())).norm(), 1e-12);
    EXPECT_LT((F[1].R->matrix() - Matrix(d.asDiagonal())).norm(), 1e-12);
    EXPECT_FALSE(F[0].L || F[1].L);
    b.problem.metric = Metric::E;
    const MetricFactors FE = metric_factors(b.problem, b.Ustar, b.Vstar);
    EXPECT_FALSE(FE[0].L || FE[0].R || FE[1].L || FE[1].R);
}

TEST(SvdGradient, VanishesAtSolution)
{
    for (Metric tag : {Metric::E, Metric::R12}) {
        const Benchmark b = small_benchmark(3, tag);
        EXPECT_LT(frobenius_norm(riemannian_gradient(b.problem, b.Ustar, b.Vstar)), 1e-10);
    }
}

TEST(SvdGradient, EuclideanIsClassicalProjection)
{
    const Benchmark b = small_benchmark(4, Metric::E);
    Rng rng(5);
    const ProductPoint x = random_initial_point(b.problem, rng);
    const Matrix& A = b.problem.A;
    const Matrix Nd = b.problem.N.asDiagonal();
    auto proj = [](const Matrix& X, const Matrix& Z) { return Matrix(Z - X * sym(X.transpose() * Z)); };
    const TangentVector g = riemannian_gradient(b.problem, x[0], x[1]);
    EXPECT_LT((g[0] + proj(x[0], A * x[1] * Nd)).norm(), 1e-13);
    EXPECT_LT((g[1] + proj(x[1], A.transpose() * x[0] * Nd)).norm(), 1e-13);
}

TEST(SvdGradient, ClosedFormMatchesGenericPath)
{
    for (Metric tag : {Metric::E, Metric::R12}) {
        const Benchmark b = small_benchmark(6, tag);
        Rng rng(7);
        const ProductPoint x = random_initial_point(b.problem, rng);
        const MetricFactors F = metric_factors(b.problem, x[0], x[1]);
        const auto [dU, dV] = euclidean_partials(b.problem, x[0], x[1]);
        const TangentVector generic = egrad_to_rgrad(x, kinds(), F, {dU, dV});
        EXPECT_LT(frobenius_norm(sub(generic, riemannian_gradient(b.problem, x[0], x[1], F))),
                  1e-10 * frobenius_norm(generic));
    }
}

TEST(SvdBenchmark, Construction)
{
    const Benchmark b = small_benchmark(8, Metric::R12);
    for (int i = 0; i + 1 < 4; ++i) EXPECT_DOUBLE_EQ(b.sigma(i + 1) / b.sigma(i), 1.0 / 1.5);
    EXPECT_EQ(b.sigma(4), 0.0);
    const ThinSvd sv = svd_thin(b.problem.A);
    EXPECT_LT(sv.sigma(4), 1e-14);
    EXPECT_LT((b.Ustar.transpose() * b.Ustar - Matrix::Identity(4, 4)).norm(), 1e-14);
    double expect = 0;
    for (int i = 0; i < 4; ++i) expect -= (4 - i) * std::pow(1.0 / 1.5, i);
    EXPECT_NEAR(cost(b.problem, b.Ustar, b.Vstar), expect, 1e-13);
    EXPECT_THROW(build_benchmark({10, 8, 8, 0.5}, 1e-15, Metric::E, *std::make_unique<Rng>(1)), Error);
    EXPECT_THROW(build_benchmark({10, 8, 2, 1.5}, 1e-15, Metric::E, *std::make_unique<Rng>(1)), Error);
}

TEST(SvdRuns, FeasibilityAfterLongRun)
{
    const Benchmark b = small_benchmark(9, Metric::E);
    auto P = std::make_shared<const SvdProblem>(b.problem);
    Rng rng(10);
    StoppingCriteria stop;
    stop.gnorm_tol = 0;
    stop.max_iters = 1000;
    const RunReport r = rcg(make_problem(P), random_initial_point(*P, rng), {}, stop);
    EXPECT_LT((r.x[0].transpose() * r.x[0] - Matrix::Identity(4, 4)).norm(), 1e-9);
    EXPECT_LT((r.x[1].transpose() * r.x[1] - Matrix::Identity(4, 4)).norm(), 1e-9);
}

TEST(SvdRuns, R12RecoversSubspaces)
{
    const Benchmark b = small_benchmark(11, Metric::R12);
    auto P = std::make_shared<const SvdProblem>(b.problem);
    Rng rng(12);
    const RunReport r = rcg(make_problem(P, &b.Ustar, &b.Vstar), random_initial_point(*P, rng));
    EXPECT_EQ(r.termination, "gnorm_tol");
    EXPECT_LT(cca::subspace_distance(r.x[0], b.Ustar), 1e-5);
    EXPECT_LT(cca::subspace_distance(r.x[1], b.Vstar), 1e-5);
    ASSERT_EQ(r.extra_names.size(), 2u);
    EXPECT_EQ(r.extra_names[0], "dist_U");
}

TEST(SvdMetric, Parse)
{
    EXPECT_EQ(parse_metric("r12"), Metric::R12);
    EXPECT_EQ(parse_metric("E"), Metric::E);
    EXPECT_THROW(parse_metric("L12"), Error);
}
