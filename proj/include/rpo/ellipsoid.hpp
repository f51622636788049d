#pragma once

#include "rpo/problem.hpp"
#include "rpo/spectrum.hpp"

#include <memory>
#include <string>
#include <vector>

namespace rpo::ellipsoid {

// min -b^T x subject to x^T B x = 1 under g_lambda(xi, eta) = xi^T B_lambda eta, B_lambda = lambda I + (1-lambda) B.
struct EllipsoidProblem {
    std::shared_ptr<const SpdMatrix> B;
    Vector b;
    double lambda = 0;
    SpdMatrix Bl;
};

inline Matrix b_lambda(const Matrix& B, double lambda)
{
    return lambda * Matrix::Identity(B.rows(), B.cols()) + (1.0 - lambda) * B;
}

inline EllipsoidProblem make(const Matrix& B, const Vector& b, double lambda)
{
    if (b.size() != B.rows()) throw Error("ellipsoid: b length must match B");
    EllipsoidProblem P;
    P.B = std::make_shared<const SpdMatrix>(B);
    P.b = b;
    P.lambda = lambda;
    try {
        P.Bl = SpdMatrix(b_lambda(P.B->matrix(), lambda));
    } catch (const Error&) {
        throw Error("ellipsoid: B_lambda not positive definite at lambda = " + std::to_string(lambda));
    }
    return P;
}

inline double b_norm(const EllipsoidProblem& P, const Vector& x) { return std::sqrt(x.dot(P.B->matrix() * x)); }

inline Vector solution(const EllipsoidProblem& P)
{
    if (P.b.norm() == 0.0) throw Error("ellipsoid: b must be nonzero");
    const Vector y = P.B->solve(P.b);
    return y / b_norm(P, y);
}

inline double cost(const EllipsoidProblem& P, const Vector& x) { return -P.b.dot(x); }

inline Vector gradient(const EllipsoidProblem& P, const Vector& x)
{
    const Vector Bx = P.B->matrix() * x;
    const Vector Blb = P.Bl.solve(P.b);
    const Vector BlBx = P.Bl.solve(Bx);
    return -Blb + (Bx.dot(Blb) / Bx.dot(BlBx)) * BlBx;
}

inline Problem make_problem(std::shared_ptr<const EllipsoidProblem> P)
{
    Problem pr;
    pr.kinds = {Ellipsoid{P->B}};
    pr.projection = Projection::NormalEquations;
    pr.cost = [P](const ProductPoint& x) { return cost(*P, x[0]); };
    pr.egrad = [P](const ProductPoint&) { return Blocks{Matrix(-P->b)}; };
    pr.metric = [P](const ProductPoint&) {
        MetricFactors F(1);
        F[0].L = P->Bl;
        return F;
    };
    pr.rgrad = [P](const ProductPoint& x, const MetricFactors&) { return TangentVector{Matrix(gradient(*P, x[0]))}; };
    return pr;
}

inline std::vector<double> default_grid()
{
    std::vector<double> g;
    for (int k = -120; k <= 1000; k += 5) g.push_back(k / 1000.0);
    return g;
}

struct SweepPoint {
    double lambda = 0;
    double kappa = 0;
    bool ok = false;
    std::string diagnostic;
};

inline std::vector<SweepPoint> kappa_sweep(const Matrix& B, const Vector& b, const std::vector<double>& grid)
{
    std::vector<SweepPoint> out;
    for (double lam : grid) {
        SweepPoint sp{lam, 0, false, {}};
        try {
            auto P = std::make_shared<const EllipsoidProblem>(make(B, b, lam));
            const Vector xs = solution(*P);
            sp.kappa = numerical_spectrum(make_problem(P), {Matrix(xs)}).kappa;
            sp.ok = true;
        } catch (const Error& e) {
            sp.diagnostic = e.what();
        }
        out.push_back(sp);
    }
    return out;
}

}  // namespace rpo::ellipsoid
