#pragma once

#include "rpo/problem.hpp"
#include "rpo/random.hpp"
#include "rpo/solvers.hpp"

#include <algorithm>
#include <memory>
#include <numeric>
#include <vector>

namespace rpo::tr {

using Index = std::vector<int>;

// Core k is n_k x (r_k r_{k+1}) with r_d = r_0; slice U_k(i) is row i reshaped r_k x r_{k+1} (column-major).
struct TrCores {
    std::vector<int> dims;
    std::vector<int> ranks;
    std::vector<Matrix> W;

    int order() const { return int(dims.size()); }
    int rank_left(int k) const { return ranks[k]; }
    int rank_right(int k) const { return ranks[(k + 1) % order()]; }

    Matrix slice(int k, int i) const
    {
        const int a = rank_left(k), b = rank_right(k);
        return Eigen::Map<const Matrix, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>(
            W[k].data() + i, a, b, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(W[k].rows() * a, W[k].rows()));
    }

    long num_params() const
    {
        long s = 0;
        for (const auto& w : W) s += long(w.size());
        return s;
    }
};

inline void validate(const TrCores& c)
{
    const int d = c.order();
    if (d < 1 || int(c.ranks.size()) != d || int(c.W.size()) != d) throw Error("TR: dims/ranks/cores length mismatch");
    for (int k = 0; k < d; ++k) {
        if (c.dims[k] < 1 || c.ranks[k] < 1) throw Error("TR: dims and ranks must be positive");
        if (c.W[k].rows() != c.dims[k] || c.W[k].cols() != c.rank_left(k) * c.rank_right(k))
            throw Error("TR: core " + std::to_string(k) + " has inconsistent shape");
    }
}

inline TrCores random_cores(const std::vector<int>& dims, const std::vector<int>& ranks, Rng& rng)
{
    TrCores c{dims, ranks, {}};
    for (int k = 0; k < int(dims.size()); ++k)
        c.W.push_back(rng.uniform_matrix(dims[k], ranks[k] * ranks[(k + 1) % dims.size()]));
    validate(c);
    return c;
}

inline double tr_entry(const TrCores& c, const Index& idx)
{
    Matrix M = c.slice(0, idx[0]);
    for (int k = 1; k < c.order(); ++k) M = M * c.slice(k, idx[k]);
    return M.trace();
}

// Sorted, deduplicated multi-indices with aligned values.
struct SamplingSet {
    std::vector<int> dims;
    std::vector<Index> idx;
    Vector values;

    long size() const { return long(idx.size()); }
    double total() const
    {
        double t = 1.0;
        for (int n : dims) t *= n;
        return t;
    }
    double rate() const { return double(size()) / total(); }
};

inline long linear_index(const std::vector<int>& dims, const Index& i)
{
    long l = 0;
    for (std::size_t k = 0; k < dims.size(); ++k) l = l * dims[k] + i[k];
    return l;
}

inline Index multi_index(const std::vector<int>& dims, long l)
{
    Index i(dims.size());
    for (int k = int(dims.size()) - 1; k >= 0; --k) {
        i[k] = int(l % dims[k]);
        l /= dims[k];
    }
    return i;
}

inline SamplingSet make_sampling_set(const std::vector<int>& dims, std::vector<Index> idx, std::vector<double> vals)
{
    if (idx.size() != vals.size()) throw Error("TR: index/value count mismatch");
    std::vector<std::size_t> order(idx.size());
    std::iota(order.begin(), order.end(), 0);
    for (const auto& i : idx) {
        if (i.size() != dims.size()) throw Error("TR: index arity mismatch");
        for (std::size_t k = 0; k < dims.size(); ++k)
            if (i[k] < 0 || i[k] >= dims[k]) throw Error("TR: index out of range");
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return idx[a] < idx[b]; });
    SamplingSet s{dims, {}, {}};
    std::vector<double> v;
    for (std::size_t o : order) {
        if (!s.idx.empty() && s.idx.back() == idx[o]) throw Error("TR: duplicate index in sampling set");
        s.idx.push_back(idx[o]);
        v.push_back(vals[o]);
    }
    s.values = Eigen::Map<Vector>(v.data(), Eigen::Index(v.size()));
    return s;
}

inline SamplingSet observe(const TrCores& truth, const std::vector<long>& linear)
{
    std::vector<Index> idx;
    std::vector<double> vals;
    for (long l : linear) {
        idx.push_back(multi_index(truth.dims, l));
        vals.push_back(tr_entry(truth, idx.back()));
    }
    return make_sampling_set(truth.dims, std::move(idx), std::move(vals));
}

struct Residual {
    double f = 0;
    Vector S;  // tau(W) - A on the sampling set
};

inline Residual cost_and_residual(const TrCores& c, const SamplingSet& omega)
{
    Residual r;
    r.S.resize(omega.size());
    for (long s = 0; s < omega.size(); ++s) r.S(s) = tr_entry(c, omega.idx[s]) - omega.values(s);
    r.f = r.S.squaredNorm() / (2.0 * omega.rate());
    return r;
}

namespace detail {

// For each k: M_k = U_{k+1} ... U_{d-1} U_0 ... U_{k-1}, shape r_{k+1} x r_k.
inline std::vector<Matrix> subchains(const TrCores& c, const Index& idx)
{
    const int d = c.order();
    std::vector<Matrix> prefix(d + 1), suffix(d + 1);
    prefix[0] = Matrix::Identity(c.ranks[0], c.ranks[0]);
    for (int k = 0; k < d; ++k) prefix[k + 1] = prefix[k] * c.slice(k, idx[k]);
    suffix[d] = Matrix::Identity(c.ranks[0], c.ranks[0]);
    for (int k = d - 1; k >= 0; --k) suffix[k] = c.slice(k, idx[k]) * suffix[k + 1];
    std::vector<Matrix> M(d);
    for (int k = 0; k < d; ++k) M[k] = suffix[k + 1] * prefix[k];
    return M;
}

}  // namespace detail

inline Blocks euclidean_partials(const TrCores& c, const SamplingSet& omega, const Residual& r)
{
    Blocks G(c.order());
    for (int k = 0; k < c.order(); ++k) G[k] = Matrix::Zero(c.W[k].rows(), c.W[k].cols());
    const double p = omega.rate();
    for (long s = 0; s < omega.size(); ++s) {
        if (r.S(s) == 0.0) continue;
        const auto M = detail::subchains(c, omega.idx[s]);
        for (int k = 0; k < c.order(); ++k) {
            const Matrix Mt = M[k].transpose();
            G[k].row(omega.idx[s][k]) += (r.S(s) / p) * Eigen::Map<const Vector>(Mt.data(), Mt.size()).transpose();
        }
    }
    return G;
}

// Rows vec(M^T) over all multi-indices of the modes other than k, ordered k+1, ..., d-1, 0, ..., k-1.
inline Matrix unfolding_complement(const TrCores& c, int k)
{
    const int d = c.order();
    const int r = c.rank_right(k);
    std::vector<Matrix> chain{Matrix::Identity(r, r)};
    for (int t = 1; t < d; ++t) {
        const int j = (k + t) % d;
        std::vector<Matrix> next;
        next.reserve(chain.size() * c.dims[j]);
        for (const auto& P : chain)
            for (int i = 0; i < c.dims[j]; ++i) next.push_back(P * c.slice(j, i));
        chain = std::move(next);
    }
    Matrix Wc(Eigen::Index(chain.size()), c.W[k].cols());
    for (std::size_t row = 0; row < chain.size(); ++row) {
        const Matrix Mt = chain[row].transpose();
        Wc.row(Eigen::Index(row)) = Eigen::Map<const Vector>(Mt.data(), Mt.size()).transpose();
    }
    return Wc;
}

inline MetricFactors tr_metric_factors(const TrCores& c, double delta)
{
    MetricFactors F(c.order());
    for (int k = 0; k < c.order(); ++k) {
        const Matrix Wc = unfolding_complement(c, k);
        Matrix G = Wc.transpose() * Wc;
        G.diagonal().array() += delta;
        F[k].R = SpdMatrix(sym(G));
    }
    return F;
}

// ---- flat parameterization ----

inline Vector flatten(const TrCores& c)
{
    Vector v(c.num_params());
    Eigen::Index o = 0;
    for (const auto& w : c.W) {
        v.segment(o, w.size()) = Eigen::Map<const Vector>(w.data(), w.size());
        o += w.size();
    }
    return v;
}

inline TrCores unflatten(const TrCores& shape, const Vector& v)
{
    TrCores c = shape;
    Eigen::Index o = 0;
    for (auto& w : c.W) {
        w = Eigen::Map<const Matrix>(v.data() + o, w.rows(), w.cols());
        o += w.size();
    }
    return c;
}

struct GnSystem {
    Matrix J;
    Vector rhs;  // -F with F = residual / sqrt(p)
};

inline GnSystem assemble_gn_system(const TrCores& c, const SamplingSet& omega, const Residual& r)
{
    const double sp = std::sqrt(omega.rate());
    GnSystem sys{Matrix::Zero(omega.size(), c.num_params()), -r.S / sp};
    std::vector<Eigen::Index> offset(c.order() + 1, 0);
    for (int k = 0; k < c.order(); ++k) offset[k + 1] = offset[k] + c.W[k].size();
    for (long s = 0; s < omega.size(); ++s) {
        const auto M = detail::subchains(c, omega.idx[s]);
        for (int k = 0; k < c.order(); ++k) {
            const Matrix Mt = M[k].transpose();
            const Eigen::Index n = c.W[k].rows();
            for (Eigen::Index col = 0; col < Mt.size(); ++col)
                sys.J(s, offset[k] + omega.idx[s][k] + col * n) = Mt(col) / sp;
        }
    }
    return sys;
}

// One damped Gauss-Newton update of all cores.
inline TrCores tr_gn_step(const TrCores& c, const SamplingSet& omega, double damping = 1e-10)
{
    const GnSystem sys = assemble_gn_system(c, omega, cost_and_residual(c, omega));
    Matrix A = sys.J.transpose() * sys.J;
    A.diagonal().array() += damping * A.diagonal().maxCoeff();
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() != Eigen::Success) throw Error("damping failure");
    const Vector step = llt.solve(sys.J.transpose() * sys.rhs);
    if (!step.allFinite()) throw Error("damping failure");
    return unflatten(c, flatten(c) + step);
}

struct Errors {
    double train = 0;
    double test = 0;
};

inline double relative_error(const TrCores& c, const SamplingSet& set)
{
    const double ref = set.values.norm();
    if (ref == 0.0) throw Error("TR: observed values have zero norm");
    double s = 0.0;
    for (long i = 0; i < set.size(); ++i) {
        const double e = tr_entry(c, set.idx[i]) - set.values(i);
        s += e * e;
    }
    return std::sqrt(s) / ref;
}

inline Errors training_test_errors(const TrCores& c, const SamplingSet& omega, const SamplingSet& gamma)
{
    return {relative_error(c, omega), gamma.size() > 0 ? relative_error(c, gamma) : 0.0};
}

// ---- problem wiring ----

struct TrInstance {
    TrCores truth;
    TrCores init;
    SamplingSet omega;
    SamplingSet gamma;
    double delta = 1e-15;
};

inline TrInstance build_instance(const std::vector<int>& dims, const std::vector<int>& ranks, double rate,
                                 long test_count, Rng& rng)
{
    TrInstance inst;
    inst.truth = random_cores(dims, ranks, rng);
    long total = 1;
    for (int n : dims) total *= n;
    const long count = std::lround(rate * double(total));
    if (count < 1 || count > total) throw Error("TR: sampling rate yields no samples");
    const long tcount = std::min(test_count, total - count);
    const auto draw = rng.sample_without_replacement(std::uint64_t(total), std::uint64_t(count + tcount));
    std::vector<long> train(draw.begin(), draw.begin() + count), test(draw.begin() + count, draw.end());
    inst.omega = observe(inst.truth, train);
    inst.gamma = observe(inst.truth, test);
    inst.init = random_cores(dims, ranks, rng);
    return inst;
}

inline TrCores cores_from_point(const TrCores& shape, const ProductPoint& x)
{
    TrCores c = shape;
    c.W = x;
    return c;
}

inline Problem make_problem(std::shared_ptr<const TrInstance> I)
{
    Problem pr;
    pr.kinds.assign(I->init.order(), Euclidean{});
    pr.cost = [I](const ProductPoint& x) { return cost_and_residual(cores_from_point(I->init, x), I->omega).f; };
    pr.egrad = [I](const ProductPoint& x) {
        const TrCores c = cores_from_point(I->init, x);
        return euclidean_partials(c, I->omega, cost_and_residual(c, I->omega));
    };
    pr.metric = [I](const ProductPoint& x) { return tr_metric_factors(cores_from_point(I->init, x), I->delta); };
    pr.monitor = [I](const ProductPoint& x) { return relative_error(cores_from_point(I->init, x), I->omega); };
    pr.diagnostics = [I](const ProductPoint& x) {
        const Errors e = training_test_errors(cores_from_point(I->init, x), I->omega, I->gamma);
        return Diagnostics{{"train_err", e.train}, {"test_err", e.test}};
    };
    return pr;
}

inline ResidualProblem make_residual_problem(std::shared_ptr<const TrInstance> I)
{
    ResidualProblem rp;
    const double sp = std::sqrt(I->omega.rate());
    rp.residual = [I, sp](const Vector& v) { return Vector(cost_and_residual(unflatten(I->init, v), I->omega).S / sp); };
    rp.jacobian = [I](const Vector& v) {
        const TrCores c = unflatten(I->init, v);
        return assemble_gn_system(c, I->omega, cost_and_residual(c, I->omega)).J;
    };
    rp.monitor = [I](const Vector& v) { return relative_error(unflatten(I->init, v), I->omega); };
    rp.diagnostics = [I](const Vector& v) {
        const Errors e = training_test_errors(unflatten(I->init, v), I->omega, I->gamma);
        return Diagnostics{{"train_err", e.train}, {"test_err", e.test}};
    };
    return rp;
}

}  // namespace rpo::tr
