#pragma once

#include "rpo/linalg.hpp"

#include <memory>
#include <optional>
#include <variant>
#include <vector>

namespace rpo {

using Blocks = std::vector<Matrix>;
using ProductPoint = Blocks;
using TangentVector = Blocks;

struct Euclidean {};
struct Stiefel {};
struct GeneralizedStiefel {
    std::shared_ptr<const SpdMatrix> constraint;
};
struct Ellipsoid {
    std::shared_ptr<const SpdMatrix> B;
};

using ComponentKind = std::variant<Euclidean, Stiefel, GeneralizedStiefel, Ellipsoid>;

// Left and right metric factors of one block; nullopt means identity.
struct BlockFactors {
    std::optional<SpdMatrix> L;
    std::optional<SpdMatrix> R;
};

using MetricFactors = std::vector<BlockFactors>;

inline MetricFactors identity_factors(std::size_t K) { return MetricFactors(K); }

enum class Projection {
    ClosedForm,       // requires L_k equal to the constraint matrix
    NormalEquations,  // exact g-orthogonal projection for any L_k
};

// ---- block arithmetic ----

inline Blocks add(const Blocks& a, const Blocks& b)
{
    Blocks r(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) r[k] = a[k] + b[k];
    return r;
}

inline Blocks sub(const Blocks& a, const Blocks& b)
{
    Blocks r(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) r[k] = a[k] - b[k];
    return r;
}

inline Blocks scale(double s, const Blocks& a)
{
    Blocks r(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) r[k] = s * a[k];
    return r;
}

// a + s*b
inline Blocks axpy(const Blocks& a, double s, const Blocks& b)
{
    Blocks r(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) r[k] = a[k] + s * b[k];
    return r;
}

inline Blocks zeros_like(const Blocks& a)
{
    Blocks r(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) r[k] = Matrix::Zero(a[k].rows(), a[k].cols());
    return r;
}

inline double euclidean_inner(const Blocks& a, const Blocks& b)
{
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k].cwiseProduct(b[k]).sum();
    return s;
}

inline double frobenius_norm(const Blocks& a) { return std::sqrt(euclidean_inner(a, a)); }

// ---- metric ----

inline Matrix apply_factors(const BlockFactors& f, const Matrix& eta)
{
    Matrix r = f.L ? Matrix(f.L->matrix() * eta) : eta;
    if (f.R) r = r * f.R->matrix();
    return r;
}

inline Matrix apply_inverse_factors(const BlockFactors& f, const Matrix& g)
{
    Matrix r = f.L ? f.L->solve(g) : g;
    if (f.R) r = f.R->solve_right(r);
    return r;
}

inline void check_shapes(const Blocks& a, const Blocks& b)
{
    if (a.size() != b.size()) throw Error("shape mismatch: block count");
    for (std::size_t k = 0; k < a.size(); ++k)
        if (a[k].rows() != b[k].rows() || a[k].cols() != b[k].cols())
            throw Error("shape mismatch: block " + std::to_string(k));
}

inline double metric_inner(const MetricFactors& F, const TangentVector& xi, const TangentVector& eta)
{
    check_shapes(xi, eta);
    if (F.size() != xi.size()) throw Error("shape mismatch: metric factors");
    double s = 0.0;
    for (std::size_t k = 0; k < xi.size(); ++k) s += xi[k].cwiseProduct(apply_factors(F[k], eta[k])).sum();
    return s;
}

inline double metric_norm(const MetricFactors& F, const TangentVector& eta)
{
    return std::sqrt(std::max(0.0, metric_inner(F, eta, eta)));
}

// ---- component helpers ----

inline const SpdMatrix* constraint_of(const ComponentKind& kind)
{
    if (auto g = std::get_if<GeneralizedStiefel>(&kind)) return g->constraint.get();
    if (auto e = std::get_if<Ellipsoid>(&kind)) return e->B.get();
    return nullptr;
}

inline bool is_euclidean(const ComponentKind& kind) { return std::holds_alternative<Euclidean>(kind); }

inline Matrix apply_constraint(const SpdMatrix* S, const Matrix& X) { return S ? Matrix(S->matrix() * X) : X; }

inline bool left_matches_constraint(const std::optional<SpdMatrix>& L, const SpdMatrix* S)
{
    if (!L && !S) return true;
    if (L && S) {
        if (L->size() != S->size()) return false;
        const double n = S->matrix().norm();
        return (L->matrix() - S->matrix()).norm() <= 1e-12 * n;
    }
    const Matrix& M = L ? L->matrix() : S->matrix();
    return (M - Matrix::Identity(M.rows(), M.cols())).norm() <= 1e-12 * std::sqrt(double(M.rows()));
}

// Symmetric S solving G S R^{-1} + R^{-1} S G = C.
inline Matrix solve_multiplier(const Matrix& G, const Matrix& Rinv, const Matrix& C)
{
    const Eigen::Index p = G.rows();
    const Eigen::Index n = p * (p + 1) / 2;
    Matrix A(n, n);
    Vector rhs(n);
    Eigen::Index col = 0;
    for (Eigen::Index b = 0; b < p; ++b)
        for (Eigen::Index a = 0; a <= b; ++a, ++col) {
            Matrix E = Matrix::Zero(p, p);
            E(a, b) = 1.0;
            E(b, a) = 1.0;
            const Matrix T = G * E * Rinv;
            const Matrix TT = T + T.transpose();
            Eigen::Index row = 0;
            for (Eigen::Index j = 0; j < p; ++j)
                for (Eigen::Index i = 0; i <= j; ++i, ++row) A(row, col) = TT(i, j);
        }
    Eigen::Index row = 0;
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index i = 0; i <= j; ++i, ++row) rhs(row) = C(i, j);
    const Vector s = A.colPivHouseholderQr().solve(rhs);
    Matrix S(p, p);
    col = 0;
    for (Eigen::Index b = 0; b < p; ++b)
        for (Eigen::Index a = 0; a <= b; ++a, ++col) S(a, b) = S(b, a) = s(col);
    return S;
}

inline Matrix project_block(const Matrix& X, const ComponentKind& kind, const BlockFactors& f,
                            const Matrix& ambient, Projection mode = Projection::ClosedForm)
{
    if (is_euclidean(kind)) return ambient;
    const SpdMatrix* S = constraint_of(kind);
    const Matrix SX = apply_constraint(S, X);
    const Matrix C = 2.0 * sym(SX.transpose() * ambient);
    if (left_matches_constraint(f.L, S)) {
        if (!f.R) return ambient - X * (0.5 * C);
        const Matrix M = lyap_solve(*f.R, C);
        return ambient - f.R->solve_right(X * M);
    }
    if (mode == Projection::ClosedForm)
        throw Error("projection closed form requires left factor = constraint matrix");
    const Matrix LinvSX = f.L ? f.L->solve(SX) : SX;
    const Matrix G = sym(SX.transpose() * LinvSX);
    const Eigen::Index p = X.cols();
    const Matrix Rinv = f.R ? f.R->solve(Matrix::Identity(p, p)) : Matrix::Identity(p, p);
    const Matrix M = solve_multiplier(G, sym(Rinv), C);
    return ambient - LinvSX * M * Rinv;
}

inline TangentVector project_tangent(const ProductPoint& x, const std::vector<ComponentKind>& kinds,
                                     const MetricFactors& F, const Blocks& ambient,
                                     Projection mode = Projection::ClosedForm)
{
    check_shapes(x, ambient);
    if (kinds.size() != x.size() || F.size() != x.size()) throw Error("shape mismatch: kinds/factors");
    TangentVector eta(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) eta[k] = project_block(x[k], kinds[k], F[k], ambient[k], mode);
    return eta;
}

inline TangentVector egrad_to_rgrad(const ProductPoint& x, const std::vector<ComponentKind>& kinds,
                                    const MetricFactors& F, const Blocks& egrad,
                                    Projection mode = Projection::ClosedForm)
{
    check_shapes(x, egrad);
    Blocks scaled(egrad.size());
    for (std::size_t k = 0; k < egrad.size(); ++k) scaled[k] = apply_inverse_factors(F[k], egrad[k]);
    return project_tangent(x, kinds, F, scaled, mode);
}

inline TangentVector transport(const ProductPoint& x_new, const std::vector<ComponentKind>& kinds,
                               const MetricFactors& F_new, const TangentVector& eta,
                               Projection mode = Projection::ClosedForm)
{
    return project_tangent(x_new, kinds, F_new, eta, mode);
}

inline Matrix retract_block(const Matrix& X, const ComponentKind& kind, const Matrix& eta, double s)
{
    const Matrix Y = X + s * eta;
    if (is_euclidean(kind)) return Y;
    if (std::holds_alternative<Stiefel>(kind)) {
        try {
            return qf(Y);
        } catch (const Error&) {
            throw Error("retraction rank failure");
        }
    }
    const SpdMatrix* S = constraint_of(kind);
    const Matrix G = sym(Y.transpose() * S->matrix() * Y);
    Eigen::LLT<Matrix> llt(G);
    if (llt.info() != Eigen::Success) throw Error("retraction rank failure");
    const Matrix R = llt.matrixU();
    for (Eigen::Index i = 0; i < R.rows(); ++i)
        if (!(R(i, i) > 1e-150)) throw Error("retraction rank failure");
    return R.transpose().triangularView<Eigen::Lower>().solve(Y.transpose()).transpose();
}

inline ProductPoint retract(const ProductPoint& x, const std::vector<ComponentKind>& kinds,
                            const TangentVector& eta, double s)
{
    check_shapes(x, eta);
    if (s == 0.0) return x;
    ProductPoint y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) y[k] = retract_block(x[k], kinds[k], eta[k], s);
    return y;
}

inline double block_feasibility(const Matrix& X, const ComponentKind& kind)
{
    if (is_euclidean(kind)) return 0.0;
    const Matrix G = X.transpose() * apply_constraint(constraint_of(kind), X);
    return (G - Matrix::Identity(G.rows(), G.cols())).norm();
}

inline double feasibility_residual(const ProductPoint& x, const std::vector<ComponentKind>& kinds)
{
    double r = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) r = std::max(r, block_feasibility(x[k], kinds[k]));
    return r;
}

inline double tangency_residual(const ProductPoint& x, const std::vector<ComponentKind>& kinds,
                                const TangentVector& eta)
{
    double r = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (is_euclidean(kinds[k])) continue;
        const Matrix SX = apply_constraint(constraint_of(kinds[k]), x[k]);
        r = std::max(r, sym(SX.transpose() * eta[k]).norm());
    }
    return r;
}

// Re-normalizes blocks whose constraint drift exceeds tol.
inline ProductPoint restore_feasibility(const ProductPoint& x, const std::vector<ComponentKind>& kinds,
                                        double tol = 1e-8)
{
    ProductPoint y = x;
    for (std::size_t k = 0; k < x.size(); ++k)
        if (block_feasibility(x[k], kinds[k]) > tol)
            y[k] = retract_block(x[k], kinds[k], Matrix::Zero(x[k].rows(), x[k].cols()), 0.0);
    return y;
}

inline Eigen::Index tangent_dimension(const Matrix& X, const ComponentKind& kind)
{
    const Eigen::Index n = X.rows(), p = X.cols();
    if (is_euclidean(kind)) return n * p;
    return n * p - p * (p + 1) / 2;
}

}  // namespace rpo
