#pragma once

#include "rpo/cca.hpp"
#include "rpo/problem.hpp"
#include "rpo/random.hpp"
#include "rpo/spectrum.hpp"

#include <memory>
#include <string>

namespace rpo::tsvd {

using Metric = SvdMetric;

inline std::string to_string(Metric m) { return m == Metric::E ? "E" : "R12"; }

inline Metric parse_metric(const std::string& s)
{
    if (s == "E" || s == "e") return Metric::E;
    if (s == "R12" || s == "r12") return Metric::R12;
    throw Error("unknown SVD metric tag '" + s + "'");
}

struct SvdProblem {
    Matrix A;
    Vector N;
    double delta = 1e-15;
    Metric metric = Metric::R12;

    Eigen::Index p() const { return N.size(); }
};

inline SvdProblem make(const Matrix& A, const Vector& N, double delta, Metric tag)
{
    cca::check_weights(N);
    if (!(N.size() < std::min(A.rows(), A.cols()))) throw Error("SVD: p must be below min(m, n)");
    if (!(delta > 0)) throw Error("SVD: delta must be positive");
    return {A, N, delta, tag};
}

inline double cost(const SvdProblem& P, const Matrix& U, const Matrix& V)
{
    return -(U.transpose() * P.A * V * P.N.asDiagonal()).trace();
}

inline std::pair<Matrix, Matrix> euclidean_partials(const SvdProblem& P, const Matrix& U, const Matrix& V)
{
    return {-(P.A * V) * P.N.asDiagonal(), -(P.A.transpose() * U) * P.N.asDiagonal()};
}

inline MetricFactors metric_factors(const SvdProblem& P, const Matrix& U, const Matrix& V)
{
    MetricFactors F(2);
    if (P.metric == Metric::R12) {
        const Matrix B = U.transpose() * P.A * V;
        F[0].R = precond_factor(B * P.N.asDiagonal(), P.delta);
        F[1].R = precond_factor(B.transpose() * P.N.asDiagonal(), P.delta);
    }
    return F;
}

inline TangentVector riemannian_gradient(const SvdProblem& P, const Matrix& U, const Matrix& V,
                                         const MetricFactors& F)
{
    const Matrix AVN = P.A * V * P.N.asDiagonal();
    const Matrix AtUN = P.A.transpose() * U * P.N.asDiagonal();
    if (P.metric == Metric::E) return {-(AVN - U * sym(U.transpose() * AVN)), -(AtUN - V * sym(V.transpose() * AtUN))};
    const Matrix S1 = lyap_solve(*F[0].R, 2.0 * sym(F[0].R->solve_right(U.transpose() * AVN)));
    const Matrix S2 = lyap_solve(*F[1].R, 2.0 * sym(F[1].R->solve_right(V.transpose() * AtUN)));
    return {-F[0].R->solve_right(AVN - U * S1), -F[1].R->solve_right(AtUN - V * S2)};
}

inline TangentVector riemannian_gradient(const SvdProblem& P, const Matrix& U, const Matrix& V)
{
    return riemannian_gradient(P, U, V, metric_factors(P, U, V));
}

inline std::vector<ComponentKind> kinds() { return {Stiefel{}, Stiefel{}}; }

struct BenchmarkSpec {
    Eigen::Index m = 200, n = 100, p = 10;
    double gamma = 1.0 / 1.5;
};

struct Benchmark {
    SvdProblem problem;
    Matrix Ustar, Vstar;
    Vector sigma;  // length p+1, last entry 0
};

inline Benchmark build_benchmark(const BenchmarkSpec& spec, double delta, Metric tag, Rng& rng)
{
    if (!(spec.gamma > 0 && spec.gamma < 1)) throw Error("SVD benchmark: gamma must lie in (0,1)");
    if (!(spec.p < std::min(spec.m, spec.n))) throw Error("SVD benchmark: p must be below min(m, n)");
    Benchmark b;
    b.Ustar = qf(rng.uniform_matrix(spec.m, spec.p));
    b.Vstar = qf(rng.uniform_matrix(spec.n, spec.p));
    b.sigma = Vector::Zero(spec.p + 1);
    for (Eigen::Index i = 0; i < spec.p; ++i) b.sigma(i) = std::pow(spec.gamma, double(i));
    const Matrix A = b.Ustar * b.sigma.head(spec.p).asDiagonal() * b.Vstar.transpose();
    b.problem = make(A, cca::default_weights(spec.p), delta, tag);
    return b;
}

inline SpectrumInputs benchmark_spectrum(const Benchmark& b) { return {b.sigma, b.problem.N, b.problem.delta}; }

inline ProductPoint random_initial_point(const SvdProblem& P, Rng& rng)
{
    return {qf(rng.uniform_matrix(P.A.rows(), P.p())), qf(rng.uniform_matrix(P.A.cols(), P.p()))};
}

inline Problem make_problem(std::shared_ptr<const SvdProblem> P, const Matrix* Uref = nullptr,
                            const Matrix* Vref = nullptr)
{
    Problem pr;
    pr.kinds = kinds();
    pr.cost = [P](const ProductPoint& x) { return cost(*P, x[0], x[1]); };
    pr.egrad = [P](const ProductPoint& x) {
        auto [a, b] = euclidean_partials(*P, x[0], x[1]);
        return Blocks{a, b};
    };
    pr.metric = [P](const ProductPoint& x) { return metric_factors(*P, x[0], x[1]); };
    pr.rgrad = [P](const ProductPoint& x, const MetricFactors& F) { return riemannian_gradient(*P, x[0], x[1], F); };
    if (Uref && Vref) {
        pr.diagnostics = [U = *Uref, V = *Vref](const ProductPoint& x) {
            return Diagnostics{{"dist_U", cca::subspace_distance(x[0], U)}, {"dist_V", cca::subspace_distance(x[1], V)}};
        };
    }
    return pr;
}

}  // namespace rpo::tsvd
