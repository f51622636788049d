#pragma once

#include "rpo/problem.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace rpo {

// Initial trial step of each search:
//   Off      - s0
//   Bounded  - min(s0, s_prev / rho)
//   Adaptive - 2 s_prev after a first-trial acceptance, else s_prev (unbounded)
enum class WarmStart { Off, Bounded, Adaptive };

struct LineSearchParams {
    double s0 = 1.0;
    double rho = 0.5;
    double a = 1e-4;
    int max_backtracks = 60;
    WarmStart warm_start = WarmStart::Adaptive;
    // Optional first trial stepsize for a direction; replaces the warm start when set.
    std::function<double(const ProductPoint&, const TangentVector&)> initial_step;

    static LineSearchParams tr_defaults() { return {1.0, 0.3, 1.0 / 8192.0, 60, WarmStart::Adaptive, {}}; }

    void validate() const
    {
        if (!(rho > 0 && rho < 1)) throw Error("line search: rho must lie in (0,1)");
        if (!(a > 0 && a < 1)) throw Error("line search: a must lie in (0,1)");
        if (!(s0 > 0)) throw Error("line search: s0 must be positive");
        if (max_backtracks < 0) throw Error("line search: max_backtracks must be nonnegative");
    }
};

// A zero tolerance disables the corresponding test.
struct StoppingCriteria {
    double gnorm_tol = 1e-6;
    long max_iters = 10000;
    double rel_change_tol = 0.0;
    double min_stepsize = 0.0;
    double cost_tol = 0.0;

    static StoppingCriteria tr_defaults() { return {0.0, 10000, 1e-8, 1e-10, 1e-14}; }

    void validate() const
    {
        if (gnorm_tol < 0 || max_iters < 0 || rel_change_tol < 0 || min_stepsize < 0 || cost_tol < 0)
            throw Error("stopping criteria must be nonnegative");
    }
};

enum class BetaRule { FletcherReeves, PolakRibierePlus, HestenesStiefelPlus };

struct CgParams {
    BetaRule beta_rule = BetaRule::HestenesStiefelPlus;
    bool restart_on_nondescent = true;
};

struct IterRecord {
    long iter = 0;
    double cost = 0;
    double gnorm = 0;
    double stepsize = 0;
    double time_s = 0;
    std::vector<double> extras;
};

struct RunReport {
    std::vector<IterRecord> trace;
    std::vector<std::string> extra_names;
    std::string termination;
    ProductPoint x;
    long cost_evals = 0;
    long grad_evals = 0;
    long safeguard_halvings = 0;
    long restarts = 0;

    long iterations() const { return trace.empty() ? 0 : long(trace.size()) - 1; }
    const IterRecord& last() const { return trace.back(); }
};

struct ArmijoResult {
    bool ok = false;
    double s = 0;
    ProductPoint x;
    double f = 0;
    int evaluations = 0;
};

// Backtracking on s = rho^l * s_init until f(x) - f(R_x(s eta)) >= -s a g(grad, eta).
inline ArmijoResult armijo_search(const Problem& P, const ProductPoint& x, double fx, double slope,
                                  const TangentVector& eta, const LineSearchParams& ls, double s_init)
{
    if (!(slope < 0)) throw Error("not a descent direction");
    ArmijoResult r;
    double s = s_init;
    for (int l = 0; l <= ls.max_backtracks; ++l, s *= ls.rho) {
        ProductPoint y = restore_feasibility(retract(x, P.kinds, eta, s), P.kinds);
        const double fy = P.cost(y);
        ++r.evaluations;
        if (std::isfinite(fy) && fx - fy >= -s * ls.a * slope) {
            r.ok = true;
            r.s = s;
            r.x = std::move(y);
            r.f = fy;
            return r;
        }
    }
    return r;
}

inline ArmijoResult armijo_search(const Problem& P, const ProductPoint& x, const TangentVector& eta,
                                  const LineSearchParams& ls)
{
    const MetricFactors F = factors_at(P, x);
    const TangentVector g = gradient(P, x, F);
    return armijo_search(P, x, P.cost(x), metric_inner(F, g, eta), eta, ls, ls.s0);
}

namespace detail {

class Tracer {
public:
    Tracer(const Problem& P, RunReport& rep) : P_(P), rep_(rep), t0_(std::chrono::steady_clock::now()) {}

    void record(long iter, const ProductPoint& x, double f, double gn, double s)
    {
        IterRecord r{iter, f, gn, s, seconds(), {}};
        if (P_.diagnostics) {
            const Diagnostics d = P_.diagnostics(x);
            if (rep_.extra_names.empty())
                for (const auto& kv : d) rep_.extra_names.push_back(kv.first);
            for (const auto& kv : d) r.extras.push_back(kv.second);
        }
        rep_.trace.push_back(std::move(r));
    }

private:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }
    const Problem& P_;
    RunReport& rep_;
    std::chrono::steady_clock::time_point t0_;
};

inline double progress(const Problem& P, const ProductPoint& x, double f)
{
    return P.monitor ? P.monitor(x) : f;
}

// Returns a termination reason or an empty string.
inline std::string check_stop(const StoppingCriteria& stop, long iter, double gn, double prog, double prog_old,
                              double s, bool stepped)
{
    if (stop.gnorm_tol > 0 && gn <= stop.gnorm_tol) return "gnorm_tol";
    if (stop.cost_tol > 0 && prog <= stop.cost_tol) return "cost_tol";
    if (stepped) {
        if (stop.rel_change_tol > 0 &&
            std::abs(prog - prog_old) <= stop.rel_change_tol * std::max(std::abs(prog_old), 1e-300))
            return "rel_change";
        if (stop.min_stepsize > 0 && s < stop.min_stepsize) return "min_stepsize";
    }
    if (iter >= stop.max_iters) return "max_iters";
    return {};
}

inline double cg_beta(BetaRule rule, const MetricFactors& F, const TangentVector& g, const TangentVector& Tg_old,
                      const TangentVector& Teta_old, double gg_old)
{
    const TangentVector y = sub(g, Tg_old);
    switch (rule) {
    case BetaRule::FletcherReeves:
        return gg_old > 0 ? metric_inner(F, g, g) / gg_old : 0.0;
    case BetaRule::PolakRibierePlus:
        return gg_old > 0 ? std::max(0.0, metric_inner(F, g, y) / gg_old) : 0.0;
    case BetaRule::HestenesStiefelPlus: {
        const double den = metric_inner(F, Teta_old, y);
        return den != 0.0 ? std::max(0.0, metric_inner(F, g, y) / den) : 0.0;
    }
    }
    return 0.0;
}

inline RunReport descent(const Problem& P, const ProductPoint& x0, const LineSearchParams& ls,
                         const StoppingCriteria& stop, const CgParams* cg)
{
    ls.validate();
    stop.validate();
    RunReport rep;
    Tracer tracer(P, rep);

    ProductPoint x = x0;
    MetricFactors F = factors_at(P, x);
    TangentVector g = gradient(P, x, F);
    double f = P.cost(x);
    ++rep.cost_evals;
    ++rep.grad_evals;
    double gg = metric_inner(F, g, g);
    double gn = std::sqrt(std::max(0.0, gg));
    double prog = progress(P, x, f);
    tracer.record(0, x, f, gn, 0.0);

    TangentVector eta;
    double s_next = ls.s0;
    long iter = 0;
    std::string reason = check_stop(stop, iter, gn, prog, prog, 0.0, false);
    while (reason.empty()) {
        if (cg && iter > 0) {
            // eta holds the conjugate direction built after the previous step
            if (!(metric_inner(F, g, eta) < 0)) {
                if (!cg->restart_on_nondescent) {
                    reason = "error: not a descent direction";
                    break;
                }
                eta = scale(-1.0, g);
                ++rep.restarts;
            }
        } else {
            eta = scale(-1.0, g);
        }
        const double slope = metric_inner(F, g, eta);
        ArmijoResult ar = armijo_search(P, x, f, slope, eta, ls, ls.initial_step ? ls.initial_step(x, eta) : s_next);
        rep.cost_evals += ar.evaluations;
        if (!ar.ok) {
            reason = "stepsize underflow";
            break;
        }
        switch (ls.warm_start) {
        case WarmStart::Off: s_next = ls.s0; break;
        case WarmStart::Bounded: s_next = std::min(ls.s0, ar.s / ls.rho); break;
        case WarmStart::Adaptive: s_next = ar.evaluations == 1 ? 2.0 * ar.s : ar.s; break;
        }
        ++iter;

        const TangentVector g_old = g;
        const TangentVector eta_old = eta;
        const double gg_old = gg;
        const double prog_old = prog;
        x = std::move(ar.x);
        f = ar.f;
        F = factors_at(P, x);
        g = gradient(P, x, F);
        ++rep.grad_evals;
        gg = metric_inner(F, g, g);
        gn = std::sqrt(std::max(0.0, gg));
        prog = progress(P, x, f);
        tracer.record(iter, x, f, gn, ar.s);

        if (cg) {
            const TangentVector Teta = project(P, x, F, eta_old);
            const TangentVector Tg = project(P, x, F, g_old);
            const double beta = cg_beta(cg->beta_rule, F, g, Tg, Teta, gg_old);
            eta = axpy(scale(-1.0, g), beta, Teta);
        }
        reason = check_stop(stop, iter, gn, prog, prog_old, ar.s, true);
    }
    rep.termination = reason;
    rep.x = std::move(x);
    return rep;
}

}  // namespace detail

inline RunReport rgd(const Problem& P, const ProductPoint& x0, const LineSearchParams& ls = {},
                     const StoppingCriteria& stop = {})
{
    return detail::descent(P, x0, ls, stop, nullptr);
}

inline RunReport rcg(const Problem& P, const ProductPoint& x0, const LineSearchParams& ls = {},
                     const StoppingCriteria& stop = {}, const CgParams& cg = {})
{
    return detail::descent(P, x0, ls, stop, &cg);
}

// ---- Gauss-Newton ----

struct ResidualProblem {
    std::function<Vector(const Vector&)> residual;
    std::function<Matrix(const Vector&)> jacobian;
    std::function<double(const Vector&)> monitor;  // defaults to ||F||
    std::function<Diagnostics(const Vector&)> diagnostics;
};

struct GnParams {
    double damping = 1e-10;  // lambda = damping * max diag(J^T J)
    int max_halvings = 5;
    bool safeguard = true;
};

struct GnReport {
    RunReport run;  // x holds the flat parameter vector as a single block
    std::vector<double> residual_norms;
    Vector x;
};

inline GnReport gauss_newton(const ResidualProblem& rp, const Vector& x0, const StoppingCriteria& stop,
                             const GnParams& gp = {})
{
    stop.validate();
    GnReport out;
    RunReport& rep = out.run;
    const auto t0 = std::chrono::steady_clock::now();
    auto seconds = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
    auto prog_of = [&](const Vector& x, const Vector& F) { return rp.monitor ? rp.monitor(x) : F.norm(); };
    auto record = [&](long it, const Vector& x, const Vector& F, double gn, double s) {
        IterRecord r{it, 0.5 * F.squaredNorm(), gn, s, seconds(), {}};
        if (rp.diagnostics) {
            const Diagnostics d = rp.diagnostics(x);
            if (rep.extra_names.empty())
                for (const auto& kv : d) rep.extra_names.push_back(kv.first);
            for (const auto& kv : d) r.extras.push_back(kv.second);
        }
        rep.trace.push_back(std::move(r));
        out.residual_norms.push_back(F.norm());
    };

    Vector x = x0;
    Vector F = rp.residual(x);
    Matrix J = rp.jacobian(x);
    ++rep.cost_evals;
    ++rep.grad_evals;
    Vector JtF = J.transpose() * F;
    double prog = prog_of(x, F);
    record(0, x, F, JtF.norm(), 0.0);

    long iter = 0;
    std::string reason = detail::check_stop(stop, iter, JtF.norm(), prog, prog, 0.0, false);
    if (reason.empty() && F.norm() == 0.0) reason = "zero residual";
    while (reason.empty()) {
        Matrix A = J.transpose() * J;
        const double lam = gp.damping * A.diagonal().maxCoeff();
        A.diagonal().array() += lam;
        Eigen::LLT<Matrix> llt(A);
        if (llt.info() != Eigen::Success) throw Error("damping failure");
        const Vector step = llt.solve(-JtF);
        if (!step.allFinite()) throw Error("damping failure");

        double t = 1.0;
        Vector x_new = x + step;
        Vector F_new = rp.residual(x_new);
        ++rep.cost_evals;
        if (gp.safeguard) {
            for (int h = 0; h < gp.max_halvings && !(F_new.norm() <= F.norm()); ++h) {
                t *= 0.5;
                x_new = x + t * step;
                F_new = rp.residual(x_new);
                ++rep.cost_evals;
                ++rep.safeguard_halvings;
            }
        }
        ++iter;
        const double prog_old = prog;
        x = std::move(x_new);
        F = std::move(F_new);
        J = rp.jacobian(x);
        ++rep.grad_evals;
        JtF = J.transpose() * F;
        prog = prog_of(x, F);
        record(iter, x, F, JtF.norm(), t);
        reason = detail::check_stop(stop, iter, JtF.norm(), prog, prog_old, t, true);
        if (reason.empty() && F.norm() == 0.0) reason = "zero residual";
    }
    rep.termination = reason;
    rep.x = {x};
    out.x = std::move(x);
    return out;
}

}  // namespace rpo
