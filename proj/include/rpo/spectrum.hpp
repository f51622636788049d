#pragma once

#include "rpo/problem.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace rpo {

struct SpectrumInputs {
    Vector sigma;  // length >= m+1, descending
    Vector mu;     // length m, descending, positive
    double delta = 0.0;
};

inline void validate(const SpectrumInputs& in)
{
    const Eigen::Index m = in.mu.size();
    if (m < 1) throw std::invalid_argument("spectrum: mu must be nonempty");
    if (in.sigma.size() < m + 1) throw std::invalid_argument("spectrum: sigma needs at least m+1 entries");
    if (in.delta < 0) throw std::invalid_argument("spectrum: delta must be nonnegative");
    for (Eigen::Index i = 0; i < m; ++i) {
        if (!(in.mu(i) > 0)) throw std::invalid_argument("spectrum: mu must be positive");
        if (i + 1 < m && !(in.mu(i) > in.mu(i + 1))) throw std::invalid_argument("spectrum: mu must be strictly descending");
    }
    if (in.sigma(m) < 0) throw std::invalid_argument("spectrum: sigma must be nonnegative");
    for (Eigen::Index i = 0; i < m; ++i) {
        if (in.sigma(i) == in.sigma(i + 1)) throw Error("zero Hessian eigenvalue");
        if (in.sigma(i) < in.sigma(i + 1)) throw std::invalid_argument("spectrum: sigma must be descending");
    }
}

inline double kappa_cca_l12(const SpectrumInputs& in)
{
    validate(in);
    const Eigen::Index m = in.mu.size();
    const Vector& s = in.sigma;
    const Vector& u = in.mu;
    double num = u(0) * (s(0) + s(m));
    double den = u(m - 1) * (s(m - 1) - s(m));
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = i + 1; j < m; ++j) {
            num = std::max(num, 0.5 * (u(i) + u(j)) * (s(i) + s(j)));
            den = std::min(den, 0.5 * (u(i) - u(j)) * (s(i) - s(j)));
        }
    if (!(den > 0)) throw Error("zero Hessian eigenvalue");
    return num / den;
}

// vbar(i,j) and vlow(i,j) for i < m, j <= m; column m holds the (i, m+1) terms.
struct PairValues {
    Matrix vbar;
    Matrix vlow;
};

inline PairValues lr12_pair_values(const SpectrumInputs& in)
{
    validate(in);
    const Eigen::Index m = in.mu.size();
    const Vector& s = in.sigma;
    const Vector& u = in.mu;
    auto w = [&](Eigen::Index i) { return std::sqrt(u(i) * u(i) * s(i) * s(i) + in.delta); };
    PairValues pv{Matrix::Constant(m, m + 1, std::numeric_limits<double>::quiet_NaN()),
                  Matrix::Constant(m, m + 1, std::numeric_limits<double>::quiet_NaN())};
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            if (i == j) continue;
            const double d = w(i) + w(j);
            pv.vbar(i, j) = (u(i) + u(j)) * (s(i) + s(j)) / d;
            pv.vlow(i, j) = (u(i) - u(j)) * (s(i) - s(j)) / d;
        }
        pv.vbar(i, m) = u(i) * (s(i) + s(m)) / w(i);
        pv.vlow(i, m) = u(i) * (s(i) - s(m)) / w(i);
    }
    return pv;
}

inline double kappa_cca_lr12(const SpectrumInputs& in)
{
    if (!(in.delta > 0)) throw std::invalid_argument("spectrum: lr12 requires delta > 0");
    const PairValues pv = lr12_pair_values(in);
    double num = 0.0, den = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < pv.vbar.rows(); ++i)
        for (Eigen::Index j = 0; j < pv.vbar.cols(); ++j) {
            if (i == j) continue;
            num = std::max(num, pv.vbar(i, j));
            den = std::min(den, pv.vlow(i, j));
        }
    if (!(den > 0)) throw Error("zero Hessian eigenvalue");
    return num / den;
}

// Adjacent-pair form (max_i vbar_{i,i+1}) / (min_i vlow_{i,i+1}).
inline double kappa_cca_lr12_adjacent(const SpectrumInputs& in)
{
    const PairValues pv = lr12_pair_values(in);
    const Eigen::Index m = in.mu.size();
    double num = 0.0, den = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
        num = std::max(num, pv.vbar(i, i + 1));
        den = std::min(den, pv.vlow(i, i + 1));
    }
    if (!(den > 0)) throw Error("zero Hessian eigenvalue");
    return num / den;
}

enum class SvdMetric { E, R12 };

inline double kappa_svd(const SpectrumInputs& in, SvdMetric metric)
{
    return metric == SvdMetric::E ? kappa_cca_l12(in) : kappa_cca_lr12(in);
}

// improved <= base up to rounding; the two coincide exactly when both extremes come from the same pair.
inline bool kappa_not_worse(double improved, double base)
{
    return improved <= base * (1.0 + 16.0 * std::numeric_limits<double>::epsilon());
}

inline bool kappa_ordering_check(const SpectrumInputs& in)
{
    const Eigen::Index m = in.mu.size();
    if (m < 2) return false;
    const double kl = kappa_cca_l12(in);
    const double kr = kappa_cca_lr12(in);
    if (!kappa_not_worse(kr, kl)) return false;
    const PairValues pv = lr12_pair_values(in);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = i + 1; j <= m; ++j)
            for (Eigen::Index k = j + 1; k <= m; ++k) {
                if (!(pv.vbar(i, j) > pv.vbar(i, k))) return false;
                if (!(pv.vlow(i, j) < pv.vlow(i, k))) return false;
            }
    return true;
}

// ---- numerical Hessian spectrum ----

struct SpectrumReport {
    Vector eigenvalues;  // ascending
    double kappa = 0;
    Eigen::Index dimension = 0;
    double asymmetry = 0;    // ||H - H^T|| / ||H|| before symmetrization
    double basis_error = 0;  // max ||B^T W B - I|| over blocks
    std::string diagnostic;
};

struct SpectrumOptions {
    double step_scale = 1e-5;
    double critical_tol = 1e-8;
};

inline Matrix flat(const Matrix& X) { return Eigen::Map<const Vector>(X.data(), X.size()); }

inline Matrix unflat(const Eigen::Ref<const Vector>& v, Eigen::Index rows, Eigen::Index cols)
{
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

inline SpectrumReport numerical_spectrum(const Problem& P, const ProductPoint& xs, const SpectrumOptions& opt = {})
{
    const MetricFactors F = factors_at(P, xs);
    const TangentVector g0 = gradient(P, xs, F);
    if (!(metric_norm(F, g0) < opt.critical_tol)) throw Error("numerical spectrum requires a critical point");

    const std::size_t K = xs.size();
    std::vector<Matrix> basis(K);
    SpectrumReport rep;
    for (std::size_t k = 0; k < K; ++k) {
        const Eigen::Index n = xs[k].rows(), p = xs[k].cols(), N = n * p;
        Matrix Pk(N, N), WPk(N, N);
        for (Eigen::Index j = 0; j < N; ++j) {
            Matrix e = Matrix::Zero(n, p);
            e(j % n, j / n) = 1.0;
            const Matrix t = project_block(xs[k], P.kinds[k], F[k], e, P.projection);
            Pk.col(j) = flat(t);
            WPk.col(j) = flat(apply_factors(F[k], t));
        }
        const Matrix G = sym(Pk.transpose() * WPk);
        const SymEig e = sym_eig(G);
        const double top = e.values.maxCoeff();
        Eigen::Index first = 0;
        while (first < N && e.values(first) <= 1e-10 * top) ++first;
        const Eigen::Index dim = N - first;
        if (dim != tangent_dimension(xs[k], P.kinds[k])) throw Error("tangent basis rank mismatch");
        const Vector scalev = e.values.tail(dim).cwiseSqrt().cwiseInverse();
        basis[k] = Pk * e.vectors.rightCols(dim) * scalev.asDiagonal();
        const Matrix WB = WPk * e.vectors.rightCols(dim) * scalev.asDiagonal();
        rep.basis_error =
            std::max(rep.basis_error, (basis[k].transpose() * WB - Matrix::Identity(dim, dim)).norm());
        rep.dimension += dim;
    }

    const double h = opt.step_scale * (1.0 + frobenius_norm(xs));
    std::vector<Eigen::Index> offset(K + 1, 0);
    for (std::size_t k = 0; k < K; ++k) offset[k + 1] = offset[k] + basis[k].cols();
    const Eigen::Index D = offset[K];
    std::vector<Matrix> diffs(K);
    for (std::size_t k = 0; k < K; ++k) diffs[k].resize(xs[k].size(), D);

    for (std::size_t k = 0; k < K; ++k)
        for (Eigen::Index c = 0; c < basis[k].cols(); ++c) {
            TangentVector eta = zeros_like(xs);
            eta[k] = unflat(basis[k].col(c), xs[k].rows(), xs[k].cols());
            const ProductPoint xp = retract(xs, P.kinds, eta, h);
            const ProductPoint xm = retract(xs, P.kinds, eta, -h);
            const TangentVector gp = gradient(P, xp);
            const TangentVector gm = gradient(P, xm);
            for (std::size_t l = 0; l < K; ++l)
                diffs[l].col(offset[k] + c) = flat(apply_factors(F[l], (gp[l] - gm[l]) / (2.0 * h)));
        }

    Matrix H(D, D);
    for (std::size_t l = 0; l < K; ++l) H.middleRows(offset[l], basis[l].cols()) = basis[l].transpose() * diffs[l];
    const double hn = H.norm();
    rep.asymmetry = hn > 0 ? (H - H.transpose()).norm() / hn : 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym(H), Eigen::EigenvaluesOnly);
    rep.eigenvalues = es.eigenvalues();
    const double lmin = rep.eigenvalues(0), lmax = rep.eigenvalues(D - 1);
    if (lmin <= 0) {
        rep.kappa = std::numeric_limits<double>::infinity();
        rep.diagnostic = "nonpositive Hessian eigenvalue at critical point";
    } else {
        rep.kappa = lmax / lmin;
    }
    return rep;
}

}  // namespace rpo
