#pragma once

#include "rpo/problem.hpp"
#include "rpo/random.hpp"

#include <cctype>
#include <memory>
#include <string>

namespace rpo::cca {

enum class Metric { E, L1, L2, L12, LR12 };

inline std::string to_string(Metric m)
{
    switch (m) {
    case Metric::E: return "E";
    case Metric::L1: return "L1";
    case Metric::L2: return "L2";
    case Metric::L12: return "L12";
    case Metric::LR12: return "LR12";
    }
    return "?";
}

inline Metric parse_metric(const std::string& s)
{
    std::string up = s;
    for (char& c : up) c = char(std::toupper(static_cast<unsigned char>(c)));
    for (Metric m : {Metric::E, Metric::L1, Metric::L2, Metric::L12, Metric::LR12})
        if (up == to_string(m)) return m;
    throw Error("unknown CCA metric tag '" + s + "'");
}

struct CcaProblem {
    std::shared_ptr<const SpdMatrix> Sxx, Syy;
    Matrix Sxy;
    Vector N;
    double lx = 0, ly = 0;
    double delta = 1e-15;
    Metric metric = Metric::LR12;

    Eigen::Index m() const { return N.size(); }
};

struct CcaSolution {
    Matrix U, V;
    Vector sigma;  // leading m canonical correlations
};

inline void check_weights(const Vector& N)
{
    if (N.size() < 1) throw Error("N must be nonempty");
    for (Eigen::Index i = 0; i < N.size(); ++i) {
        if (!(N(i) > 0)) throw Error("N must be positive");
        if (i > 0 && !(N(i - 1) > N(i))) throw Error("N must be strictly decreasing");
    }
}

inline Vector default_weights(Eigen::Index m)
{
    Vector N(m);
    for (Eigen::Index i = 0; i < m; ++i) N(i) = double(m - i);
    return N;
}

inline CcaProblem build_from_covariances(const Matrix& Sxx, const Matrix& Syy, const Matrix& Sxy, const Vector& N,
                                         double delta, Metric tag)
{
    check_weights(N);
    if (Sxy.rows() != Sxx.rows() || Sxy.cols() != Syy.rows()) throw Error("CCA: covariance shapes do not conform");
    if (N.size() > std::min(Sxx.rows(), Syy.rows())) throw Error("CCA: m exceeds min(d_x, d_y)");
    if (!(delta > 0)) throw Error("CCA: delta must be positive");
    CcaProblem P;
    P.Sxx = std::make_shared<const SpdMatrix>(Sxx);
    P.Syy = std::make_shared<const SpdMatrix>(Syy);
    P.Sxy = Sxy;
    P.N = N;
    P.delta = delta;
    P.metric = tag;
    return P;
}

inline CcaProblem build_from_data(const Matrix& X, const Matrix& Y, double lx, double ly, const Vector& N,
                                  double delta, Metric tag)
{
    if (X.rows() != Y.rows() || X.rows() < 1) throw Error("CCA: X and Y need the same positive number of rows");
    if (lx < 0 || ly < 0) throw Error("CCA: regularizers must be nonnegative");
    Matrix Sxx = X.transpose() * X;
    Matrix Syy = Y.transpose() * Y;
    Sxx.diagonal().array() += lx;
    Syy.diagonal().array() += ly;
    CcaProblem P = build_from_covariances(sym(Sxx), sym(Syy), X.transpose() * Y, N, delta, tag);
    P.lx = lx;
    P.ly = ly;
    return P;
}

inline double cost(const CcaProblem& P, const Matrix& U, const Matrix& V)
{
    return -(U.transpose() * P.Sxy * V * P.N.asDiagonal()).trace();
}

inline std::pair<Matrix, Matrix> euclidean_partials(const CcaProblem& P, const Matrix& U, const Matrix& V)
{
    return {-(P.Sxy * V) * P.N.asDiagonal(), -(P.Sxy.transpose() * U) * P.N.asDiagonal()};
}

inline std::vector<ComponentKind> kinds(const CcaProblem& P)
{
    return {GeneralizedStiefel{P.Sxx}, GeneralizedStiefel{P.Syy}};
}

inline MetricFactors metric_factors(const CcaProblem& P, const Matrix& U, const Matrix& V)
{
    MetricFactors F(2);
    switch (P.metric) {
    case Metric::E: break;
    case Metric::L1: F[0].L = *P.Sxx; break;
    case Metric::L2: F[1].L = *P.Syy; break;
    case Metric::L12:
        F[0].L = *P.Sxx;
        F[1].L = *P.Syy;
        break;
    case Metric::LR12: {
        const Matrix B = U.transpose() * P.Sxy * V;
        F[0].L = *P.Sxx;
        F[1].L = *P.Syy;
        F[0].R = precond_factor(B * P.N.asDiagonal(), P.delta);
        F[1].R = precond_factor(B.transpose() * P.N.asDiagonal(), P.delta);
        break;
    }
    }
    return F;
}

inline Projection projection_mode(Metric m)
{
    return (m == Metric::L12 || m == Metric::LR12) ? Projection::ClosedForm : Projection::NormalEquations;
}

// Lyapunov multipliers of the L12 / LR12 projections applied to L^{-1} df R^{-1}.
inline std::pair<Matrix, Matrix> lyapunov_multipliers(const CcaProblem& P, const Matrix& U, const Matrix& V,
                                                      const MetricFactors& F)
{
    if (P.metric != Metric::L12 && P.metric != Metric::LR12)
        throw Error("lyapunov_multipliers: closed form only for L12 and LR12");
    const Matrix B = U.transpose() * P.Sxy * V;
    const Matrix C1 = B * P.N.asDiagonal();
    const Matrix C2 = B.transpose() * P.N.asDiagonal();
    if (P.metric == Metric::L12) return {-sym(C1), -sym(C2)};
    return {lyap_solve(*F[0].R, -2.0 * sym(F[0].R->solve_right(C1))),
            lyap_solve(*F[1].R, -2.0 * sym(F[1].R->solve_right(C2)))};
}

inline TangentVector riemannian_gradient(const CcaProblem& P, const Matrix& U, const Matrix& V,
                                         const MetricFactors& F)
{
    if (P.metric == Metric::L12 || P.metric == Metric::LR12) {
        const auto [S1, S2] = lyapunov_multipliers(P, U, V, F);
        Matrix G1 = -(P.Sxx->solve(P.Sxy * V * P.N.asDiagonal()) + U * S1);
        Matrix G2 = -(P.Syy->solve(P.Sxy.transpose() * U * P.N.asDiagonal()) + V * S2);
        if (P.metric == Metric::LR12) {
            G1 = F[0].R->solve_right(G1);
            G2 = F[1].R->solve_right(G2);
        }
        return {G1, G2};
    }
    const auto [dU, dV] = euclidean_partials(P, U, V);
    return egrad_to_rgrad({U, V}, kinds(P), F, {dU, dV}, Projection::NormalEquations);
}

inline TangentVector riemannian_gradient(const CcaProblem& P, const Matrix& U, const Matrix& V)
{
    return riemannian_gradient(P, U, V, metric_factors(P, U, V));
}

struct Whitened {
    Matrix Sxx_isqrt, Syy_isqrt;
    ThinSvd svd;
};

inline Whitened whiten(const CcaProblem& P)
{
    Whitened w;
    w.Sxx_isqrt = spd_sqrt_pair(P.Sxx->matrix()).second;
    w.Syy_isqrt = spd_sqrt_pair(P.Syy->matrix()).second;
    w.svd = svd_thin(w.Sxx_isqrt * P.Sxy * w.Syy_isqrt);
    return w;
}

// All singular values of the whitened cross-covariance, descending.
inline Vector whitened_spectrum(const CcaProblem& P) { return whiten(P).svd.sigma; }

inline CcaSolution closed_form_solution(const CcaProblem& P)
{
    Whitened w = whiten(P);
    const Eigen::Index m = P.m();
    const Vector& s = w.svd.sigma;
    if (m < s.size() && s(m - 1) - s(m) <= 1e-10) throw Error("non-isolated minimizer");
    Matrix Ub = w.svd.U.leftCols(m), Vb = w.svd.V.leftCols(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        Eigen::Index i = 0;
        while (i < Ub.rows() && Ub(i, j) == 0.0) ++i;
        if (i < Ub.rows() && Ub(i, j) < 0) {
            Ub.col(j) = -Ub.col(j);
            Vb.col(j) = -Vb.col(j);
        }
    }
    return {w.Sxx_isqrt * Ub, w.Syy_isqrt * Vb, s.head(m)};
}

inline double subspace_distance(const Matrix& U, const Matrix& Uref)
{
    if (U.rows() != Uref.rows() || U.cols() != Uref.cols()) throw Error("subspace_distance: shape mismatch");
    return (U * U.transpose() - Uref * Uref.transpose()).norm();
}

inline ProductPoint random_feasible_point(const CcaProblem& P, Rng& rng)
{
    const auto K = kinds(P);
    const Matrix U0 = rng.uniform_matrix(P.Sxx->size(), P.m());
    const Matrix V0 = rng.uniform_matrix(P.Syy->size(), P.m());
    return {retract_block(U0, K[0], Matrix::Zero(U0.rows(), U0.cols()), 0.0),
            retract_block(V0, K[1], Matrix::Zero(V0.rows(), V0.cols()), 0.0)};
}

inline Problem make_problem(std::shared_ptr<const CcaProblem> P, std::shared_ptr<const CcaSolution> ref = nullptr)
{
    Problem pr;
    pr.kinds = kinds(*P);
    pr.projection = projection_mode(P->metric);
    pr.cost = [P](const ProductPoint& x) { return cost(*P, x[0], x[1]); };
    pr.egrad = [P](const ProductPoint& x) {
        auto [a, b] = euclidean_partials(*P, x[0], x[1]);
        return Blocks{a, b};
    };
    pr.metric = [P](const ProductPoint& x) { return metric_factors(*P, x[0], x[1]); };
    pr.rgrad = [P](const ProductPoint& x, const MetricFactors& F) { return riemannian_gradient(*P, x[0], x[1], F); };
    if (ref) {
        pr.diagnostics = [ref](const ProductPoint& x) {
            return Diagnostics{{"dist_U", subspace_distance(x[0], ref->U)}, {"dist_V", subspace_distance(x[1], ref->V)}};
        };
    }
    return pr;
}

// Instance with prescribed whitened spectrum: Sxy = Sxx^{1/2} P diag(sigma) Q^T Syy^{1/2}.
inline CcaProblem build_constructed(Eigen::Index dx, Eigen::Index dy, const Vector& sigma, const Vector& N,
                                    double delta, Metric tag, Rng& rng)
{
    const Eigen::Index r = std::min(dx, dy);
    if (sigma.size() != r) throw Error("CCA: sigma must have min(d_x, d_y) entries");
    auto spd = [&](Eigen::Index d) {
        const Matrix Q = qf(rng.symmetric_uniform_matrix(d, d));
        Vector ev(d);
        for (Eigen::Index i = 0; i < d; ++i) ev(i) = 1.0 + 2.0 * rng.uniform();
        return Matrix(sym(Q * ev.asDiagonal() * Q.transpose()));
    };
    const Matrix Sxx = spd(dx), Syy = spd(dy);
    const Matrix Pm = qf(rng.symmetric_uniform_matrix(dx, r));
    const Matrix Qm = qf(rng.symmetric_uniform_matrix(dy, r));
    const Matrix Sxy =
        spd_sqrt_pair(Sxx).first * Pm * sigma.asDiagonal() * Qm.transpose() * spd_sqrt_pair(Syy).first;
    return build_from_covariances(Sxx, Syy, Sxy, N, delta, tag);
}

}  // namespace rpo::cca
