#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>

namespace rpo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline bool all_finite(const Matrix& A) { return A.allFinite(); }

inline Matrix sym(const Matrix& A) { return 0.5 * (A + A.transpose()); }

inline double rel_asymmetry(const Matrix& S)
{
    const double n = S.norm();
    return n == 0.0 ? 0.0 : (S - S.transpose()).norm() / n;
}

// Symmetric positive definite matrix with its Cholesky factorization.
class SpdMatrix {
public:
    SpdMatrix() = default;

    explicit SpdMatrix(const Matrix& S)
    {
        if (S.rows() != S.cols()) throw Error("SpdMatrix: matrix not square");
        if (!all_finite(S)) throw Error("SpdMatrix: non-finite entry");
        if (rel_asymmetry(S) > 1e-12) throw Error("SpdMatrix: matrix not symmetric");
        m_ = sym(S);
        llt_.compute(m_);
        if (llt_.info() != Eigen::Success) throw Error("matrix not positive definite");
        for (Eigen::Index i = 0; i < m_.rows(); ++i)
            if (!(llt_.matrixLLT()(i, i) > 0.0)) throw Error("matrix not positive definite");
    }

    static SpdMatrix identity(Eigen::Index n) { return SpdMatrix(Matrix::Identity(n, n)); }

    const Matrix& matrix() const { return m_; }
    Eigen::Index size() const { return m_.rows(); }

    Matrix solve(const Matrix& B) const { return llt_.solve(B); }

    // B * S^{-1}
    Matrix solve_right(const Matrix& B) const { return llt_.solve(B.transpose()).transpose(); }

    Matrix upper() const { return llt_.matrixU(); }

private:
    Matrix m_;
    Eigen::LLT<Matrix> llt_;
};

// Q factor of a thin QR with positive diagonal R.
inline Matrix qf(const Matrix& A)
{
    if (A.rows() < A.cols()) throw Error("qf: rows < cols");
    Eigen::HouseholderQR<Matrix> qr(A);
    const Eigen::Index p = A.cols();
    Matrix Q = qr.householderQ() * Matrix::Identity(A.rows(), p);
    const Matrix R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    const double scale = std::max(A.cwiseAbs().maxCoeff(), 1e-300);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double d = R(j, j);
        if (!(std::abs(d) > 1e-13 * scale * std::sqrt(static_cast<double>(A.rows()))))
            throw Error("rank deficient in qf");
        if (d < 0) Q.col(j) = -Q.col(j);
    }
    return Q;
}

inline Matrix chol(const SpdMatrix& S) { return S.upper(); }

inline Matrix chol(const Matrix& S) { return SpdMatrix(S).upper(); }

struct SymEig {
    Vector values;  // ascending
    Matrix vectors;
};

inline SymEig sym_eig(const Matrix& S)
{
    if (S.rows() != S.cols()) throw Error("sym_eig: matrix not square");
    if (rel_asymmetry(S) > 1e-10) throw Error("sym_eig: matrix not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym(S));
    if (es.info() != Eigen::Success) throw Error("sym_eig: no convergence");
    return {es.eigenvalues(), es.eigenvectors()};
}

// (sym(M)^2 + delta I)^{1/2}
inline Matrix precond_factor_matrix(const Matrix& Mbar, double delta)
{
    if (Mbar.rows() != Mbar.cols()) throw Error("precond_factor: matrix not square");
    if (delta < 0) throw Error("precond_factor: negative delta");
    const SymEig e = sym_eig(sym(Mbar));
    const Vector d = (e.values.array().square() + delta).sqrt();
    return sym(e.vectors * d.asDiagonal() * e.vectors.transpose());
}

inline SpdMatrix precond_factor(const Matrix& Mbar, double delta)
{
    return SpdMatrix(precond_factor_matrix(Mbar, delta));
}

// Solves M^{-1} S + S M^{-1} = C.
inline Matrix lyap_solve(const SpdMatrix& M, const Matrix& C)
{
    if (C.rows() != M.size() || C.cols() != M.size()) throw Error("lyap_solve: shape mismatch");
    const SymEig e = sym_eig(M.matrix());
    const Vector d = e.values.cwiseInverse();
    Matrix Ct = e.vectors.transpose() * sym(C) * e.vectors;
    for (Eigen::Index j = 0; j < Ct.cols(); ++j)
        for (Eigen::Index i = 0; i < Ct.rows(); ++i) Ct(i, j) /= d(i) + d(j);
    return sym(e.vectors * Ct * e.vectors.transpose());
}

struct ThinSvd {
    Matrix U;
    Vector sigma;  // descending
    Matrix V;
};

inline ThinSvd svd_thin(const Matrix& A)
{
    Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

inline Matrix solve_spd(const SpdMatrix& S, const Matrix& B) { return S.solve(B); }

// S^{1/2} and S^{-1/2} via eigendecomposition.
inline std::pair<Matrix, Matrix> spd_sqrt_pair(const Matrix& S, double floor = 1e-14)
{
    const SymEig e = sym_eig(S);
    if (e.values(0) <= floor * std::max(1.0, e.values.cwiseAbs().maxCoeff()))
        throw Error("matrix not positive definite");
    const Vector r = e.values.cwiseSqrt();
    return {sym(e.vectors * r.asDiagonal() * e.vectors.transpose()),
            sym(e.vectors * r.cwiseInverse().asDiagonal() * e.vectors.transpose())};
}

}  // namespace rpo
