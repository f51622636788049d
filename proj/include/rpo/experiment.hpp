#pragma once

#include "rpo/cca.hpp"
#include "rpo/config.hpp"
#include "rpo/ellipsoid.hpp"
#include "rpo/io.hpp"
#include "rpo/solvers.hpp"
#include "rpo/trcomp.hpp"
#include "rpo/tsvd.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace rpo::app {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<fs::path> out;
    std::optional<int> repeat;
    bool with_spectrum = false;
};

inline const std::vector<std::string>& applications()
{
    static const std::vector<std::string> apps{"cca", "tsvd", "trcomp", "ellipsoid", "spectrum"};
    return apps;
}

inline Schema schema_for(const std::string& app)
{
    static const std::map<std::string, std::set<std::string>> problem_keys{
        {"cca", {"dx", "dy", "n", "m", "lambda_x", "lambda_y", "delta", "weights", "sigma", "x_file", "y_file"}},
        {"tsvd", {"m", "n", "p", "gamma", "delta", "weights", "a_file"}},
        {"trcomp", {"dims", "ranks", "rate", "test_count", "delta", "paper_scale", "omega_file", "gamma_file"}},
        {"ellipsoid", {"B", "b", "x0", "grid", "sweep", "b_matrix_file"}},
    };
    auto it = problem_keys.find(app);
    std::set<std::string> problem;
    if (app == "spectrum") {
        problem = {"target"};
        for (const auto& [k, keys] : problem_keys)
            if (k != "trcomp") problem.insert(keys.begin(), keys.end());
    } else if (it != problem_keys.end()) {
        problem = it->second;
    } else {
        throw Error("unknown application '" + app + "'");
    }
    return {
        {"run", {"application", "seed", "repeat"}},
        {"problem", problem},
        {"solver",
         {"method", "metric", "beta", "s0", "rho", "a", "max_backtracks", "warm_start", "gnorm_tol", "max_iters",
          "rel_change_tol", "min_stepsize", "cost_tol", "damping", "max_halvings", "safeguard"}},
        {"output", {"dir", "timing"}},
        {"spectrum", {"numerical", "step_scale"}},
    };
}

// Streams for data and for initial points are kept apart so that file inputs reproduce generated runs.
inline std::uint64_t init_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ULL; }

struct SolverSettings {
    std::vector<std::string> methods;
    std::vector<std::string> metrics;
    LineSearchParams ls;
    StoppingCriteria stop;
    CgParams cg;
    GnParams gn;
};

inline WarmStart parse_warm_start(const std::string& s)
{
    if (s == "off") return WarmStart::Off;
    if (s == "bounded") return WarmStart::Bounded;
    if (s == "adaptive") return WarmStart::Adaptive;
    throw Error("config: [solver].warm_start must be off, bounded or adaptive");
}

inline BetaRule parse_beta(const std::string& s)
{
    if (s == "fr") return BetaRule::FletcherReeves;
    if (s == "prp+") return BetaRule::PolakRibierePlus;
    if (s == "hs+") return BetaRule::HestenesStiefelPlus;
    throw Error("config: [solver].beta must be fr, prp+ or hs+");
}

inline SolverSettings read_solver(const Config& cfg, const std::string& app)
{
    SolverSettings s;
    const bool tr = app == "trcomp";
    if (tr) {
        s.ls = LineSearchParams::tr_defaults();
        s.stop = StoppingCriteria::tr_defaults();
    }
    const std::map<std::string, std::pair<std::string, std::string>> defaults{
        {"cca", {"rcg", "LR12"}}, {"tsvd", {"rcg", "R12"}}, {"trcomp", {"gn", "P"}}, {"ellipsoid", {"rgd", "0"}}};
    s.methods = cfg.get_list("solver", "method", {defaults.at(app).first});
    s.metrics = cfg.get_list("solver", "metric", {defaults.at(app).second});
    for (const auto& m : s.methods)
        if (!(m == "rgd" || m == "rcg" || (tr && m == "gn")))
            throw Error("config: [solver].method '" + m + "' not available for " + app);

    s.ls.s0 = cfg.get_double("solver", "s0", s.ls.s0);
    s.ls.rho = cfg.get_double("solver", "rho", s.ls.rho);
    s.ls.a = cfg.get_double("solver", "a", s.ls.a);
    s.ls.max_backtracks = int(cfg.get_long("solver", "max_backtracks", s.ls.max_backtracks));
    if (cfg.has("solver", "warm_start")) s.ls.warm_start = parse_warm_start(cfg.get_string("solver", "warm_start", ""));
    s.ls.validate();

    s.stop.gnorm_tol = cfg.get_double("solver", "gnorm_tol", s.stop.gnorm_tol);
    s.stop.max_iters = cfg.get_long("solver", "max_iters", s.stop.max_iters);
    s.stop.rel_change_tol = cfg.get_double("solver", "rel_change_tol", s.stop.rel_change_tol);
    s.stop.min_stepsize = cfg.get_double("solver", "min_stepsize", s.stop.min_stepsize);
    s.stop.cost_tol = cfg.get_double("solver", "cost_tol", s.stop.cost_tol);
    s.stop.validate();

    if (cfg.has("solver", "beta")) s.cg.beta_rule = parse_beta(cfg.get_string("solver", "beta", ""));
    s.gn.damping = cfg.get_double("solver", "damping", s.gn.damping);
    s.gn.max_halvings = int(cfg.get_long("solver", "max_halvings", s.gn.max_halvings));
    s.gn.safeguard = cfg.get_bool("solver", "safeguard", s.gn.safeguard);
    if (s.gn.damping < 0 || s.gn.max_halvings < 0) throw Error("config: GN damping and max_halvings must be nonnegative");
    return s;
}

inline Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), Eigen::Index(v.size())); }

inline json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline json final_record(const RunReport& rep)
{
    json f;
    const IterRecord& r = rep.last();
    f["cost"] = r.cost;
    f["gnorm"] = r.gnorm;
    f["stepsize"] = r.stepsize;
    for (std::size_t i = 0; i < rep.extra_names.size() && i < r.extras.size(); ++i) f[rep.extra_names[i]] = r.extras[i];
    return f;
}

struct RunContext {
    std::string app;
    fs::path out;
    std::uint64_t run_seed = 0;
    int repeat_index = 0;
    std::string suffix;
    bool timing = true;
    json config;
};

// One solver run: writes <stem>.csv and <stem>.json and returns false on a runtime error.
template <class Fn>
bool execute(const RunContext& ctx, const std::string& method, const std::string& metric, json extra, Fn&& fn)
{
    const std::string stem = ctx.app + "_" + method + (metric.empty() ? "" : "_" + metric) + ctx.suffix;
    json s;
    s["application"] = ctx.app;
    s["method"] = method;
    s["metric"] = metric.empty() ? json(nullptr) : json(metric);
    s["seed"] = ctx.run_seed;
    s["repeat_index"] = ctx.repeat_index;
    s["trace"] = stem + ".csv";
    bool ok = true;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const RunReport rep = fn();
        io::write_trace(ctx.out / (stem + ".csv"), rep, ctx.timing);
        s["termination"] = rep.termination;
        s["iterations"] = rep.iterations();
        s["cost_evals"] = rep.cost_evals;
        s["grad_evals"] = rep.grad_evals;
        s["restarts"] = rep.restarts;
        s["safeguard_halvings"] = rep.safeguard_halvings;
        s["final"] = final_record(rep);
    } catch (const std::exception& e) {
        ok = false;
        s["termination"] = "error";
        s["error"] = e.what();
        io::write_trace(ctx.out / (stem + ".csv"), RunReport{}, ctx.timing);
    }
    if (ctx.timing) s["time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (auto& [k, v] : extra.items()) s[k] = v;
    s["config"] = ctx.config;
    io::write_json(ctx.out / (stem + ".json"), s);
    return ok;
}

inline RunReport run_descent(const std::string& method, const Problem& P, const ProductPoint& x0,
                             const SolverSettings& s)
{
    return method == "rgd" ? rgd(P, x0, s.ls, s.stop) : rcg(P, x0, s.ls, s.stop, s.cg);
}

inline json numerical_kappa(const Problem& P, const ProductPoint& xs, const Config& cfg)
{
    SpectrumOptions opt;
    opt.step_scale = cfg.get_double("spectrum", "step_scale", opt.step_scale);
    try {
        const SpectrumReport r = numerical_spectrum(P, xs, opt);
        json j{{"kappa", r.kappa}, {"dimension", r.dimension}, {"asymmetry", r.asymmetry}};
        if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
        return j;
    } catch (const std::exception& e) {
        return json{{"error", e.what()}};
    }
}

// ---- cca ----

struct CcaData {
    cca::CcaProblem base;
    std::shared_ptr<const cca::CcaSolution> ref;
    std::string ref_error;
};

inline CcaData build_cca(const Config& cfg, std::uint64_t seed)
{
    const long m = cfg.get_long("problem", "m", 5);
    if (m < 1) throw Error("config: [problem].m must be positive");
    Vector N = cca::default_weights(m);
    if (cfg.has("problem", "weights")) N = to_vector(cfg.get_doubles("problem", "weights", {}));
    if (N.size() != m) throw Error("config: [problem].weights must have m entries");
    const double delta = cfg.get_double("problem", "delta", 1e-15);
    CcaData d;
    Rng rng(seed);
    if (cfg.has("problem", "sigma")) {
        const long dx = cfg.get_long("problem", "dx", 60), dy = cfg.get_long("problem", "dy", 40);
        d.base = cca::build_constructed(dx, dy, to_vector(cfg.get_doubles("problem", "sigma", {})), N, delta,
                                        cca::Metric::LR12, rng);
    } else {
        const double lx = cfg.get_double("problem", "lambda_x", 1e-6), ly = cfg.get_double("problem", "lambda_y", 1e-6);
        Matrix X, Y;
        if (cfg.has("problem", "x_file") != cfg.has("problem", "y_file"))
            throw Error("config: [problem].x_file and [problem].y_file go together");
        if (cfg.has("problem", "x_file")) {
            X = io::read_matrix(cfg.get_string("problem", "x_file", ""));
            Y = io::read_matrix(cfg.get_string("problem", "y_file", ""));
        } else {
            const long n = cfg.get_long("problem", "n", 2000);
            const long dx = cfg.get_long("problem", "dx", 120), dy = cfg.get_long("problem", "dy", 80);
            if (n < 1 || dx < 1 || dy < 1) throw Error("config: [problem] sizes must be positive");
            X = rng.uniform_matrix(n, dx);
            Y = rng.uniform_matrix(n, dy);
        }
        d.base = cca::build_from_data(X, Y, lx, ly, N, delta, cca::Metric::LR12);
    }
    try {
        d.ref = std::make_shared<const cca::CcaSolution>(cca::closed_form_solution(d.base));
    } catch (const Error& e) {
        d.ref_error = e.what();
    }
    return d;
}

inline json cca_kappa(const cca::CcaProblem& P)
{
    const SpectrumInputs in{cca::whitened_spectrum(P), P.N, P.delta};
    json k;
    try {
        k["L12"] = kappa_cca_l12(in);
        k["LR12"] = kappa_cca_lr12(in);
    } catch (const std::exception& e) {
        k["error"] = e.what();
    }
    return k;
}

inline bool run_cca(const Config& cfg, const SolverSettings& s, const RunContext& ctx, bool with_spectrum)
{
    const CcaData d = build_cca(cfg, ctx.run_seed);
    Rng irng(init_seed(ctx.run_seed));
    const ProductPoint x0 = cca::random_feasible_point(d.base, irng);
    const bool numerical = cfg.get_bool("spectrum", "numerical", false);
    bool ok = true;
    for (const auto& tag : s.metrics) {
        auto P = std::make_shared<cca::CcaProblem>(d.base);
        P->metric = cca::parse_metric(tag);
        const Problem pr = cca::make_problem(P, d.ref);
        json extra;
        extra["canonical_correlations"] = to_json(d.ref ? d.ref->sigma : Vector());
        if (!d.ref_error.empty()) extra["reference_error"] = d.ref_error;
        if (with_spectrum) {
            extra["kappa"] = cca_kappa(*P);
            if (numerical && d.ref) extra["kappa"]["numerical"] = numerical_kappa(pr, {d.ref->U, d.ref->V}, cfg);
        }
        for (const auto& method : s.methods)
            ok &= execute(ctx, method, cca::to_string(P->metric), extra, [&] { return run_descent(method, pr, x0, s); });
    }
    return ok;
}

// ---- tsvd ----

struct SvdData {
    tsvd::SvdProblem base;
    Matrix Ustar, Vstar;
    Vector sigma;  // leading p+1 singular values
};

inline SvdData build_tsvd(const Config& cfg, std::uint64_t seed)
{
    const double delta = cfg.get_double("problem", "delta", 1e-15);
    SvdData d;
    if (cfg.has("problem", "a_file")) {
        const Matrix A = io::read_matrix(cfg.get_string("problem", "a_file", ""));
        const long p = cfg.get_long("problem", "p", 10);
        Vector N = cca::default_weights(p);
        if (cfg.has("problem", "weights")) N = to_vector(cfg.get_doubles("problem", "weights", {}));
        d.base = tsvd::make(A, N, delta, tsvd::Metric::R12);
        const ThinSvd sv = svd_thin(A);
        d.Ustar = sv.U.leftCols(p);
        d.Vstar = sv.V.leftCols(p);
        d.sigma = sv.sigma.head(p + 1);
    } else {
        if (cfg.has("problem", "weights")) throw Error("config: [problem].weights requires a_file");
        tsvd::BenchmarkSpec spec;
        spec.m = cfg.get_long("problem", "m", spec.m);
        spec.n = cfg.get_long("problem", "n", spec.n);
        spec.p = cfg.get_long("problem", "p", spec.p);
        spec.gamma = cfg.get_double("problem", "gamma", spec.gamma);
        if (spec.m < 1 || spec.n < 1 || spec.p < 1) throw Error("config: [problem] sizes must be positive");
        Rng rng(seed);
        tsvd::Benchmark b = tsvd::build_benchmark(spec, delta, tsvd::Metric::R12, rng);
        d.base = b.problem;
        d.Ustar = b.Ustar;
        d.Vstar = b.Vstar;
        d.sigma = b.sigma;
    }
    return d;
}

inline json tsvd_kappa(const SvdData& d)
{
    const SpectrumInputs in{d.sigma, d.base.N, d.base.delta};
    json k;
    try {
        k["E"] = kappa_svd(in, SvdMetric::E);
        k["R12"] = kappa_svd(in, SvdMetric::R12);
    } catch (const std::exception& e) {
        k["error"] = e.what();
    }
    return k;
}

inline bool run_tsvd(const Config& cfg, const SolverSettings& s, const RunContext& ctx, bool with_spectrum)
{
    const SvdData d = build_tsvd(cfg, ctx.run_seed);
    Rng irng(init_seed(ctx.run_seed));
    const ProductPoint x0 = tsvd::random_initial_point(d.base, irng);
    const bool numerical = cfg.get_bool("spectrum", "numerical", false);
    bool ok = true;
    for (const auto& tag : s.metrics) {
        auto P = std::make_shared<tsvd::SvdProblem>(d.base);
        P->metric = tsvd::parse_metric(tag);
        const Problem pr = tsvd::make_problem(P, &d.Ustar, &d.Vstar);
        json extra;
        if (with_spectrum) {
            extra["kappa"] = tsvd_kappa(d);
            if (numerical) extra["kappa"]["numerical"] = numerical_kappa(pr, {d.Ustar, d.Vstar}, cfg);
        }
        for (const auto& method : s.methods)
            ok &= execute(ctx, method, tsvd::to_string(P->metric), extra, [&] { return run_descent(method, pr, x0, s); });
    }
    return ok;
}

// ---- trcomp ----

inline tr::TrInstance build_trcomp(const Config& cfg, std::uint64_t seed)
{
    const bool paper = cfg.get_bool("problem", "paper_scale", false);
    const std::vector<int> dims = cfg.get_ints("problem", "dims", paper ? std::vector<int>{100, 100, 100}
                                                                           : std::vector<int>{20, 20, 20});
    std::vector<int> ranks = cfg.get_ints("problem", "ranks", std::vector<int>(dims.size(), 3));
    const double rate = cfg.get_double("problem", "rate", paper ? 0.05 : 0.3);
    const long test_count = cfg.get_long("problem", "test_count", 100);
    tr::TrInstance inst;
    if (cfg.has("problem", "omega_file")) {
        io::SampleFile f = io::read_samples(cfg.get_string("problem", "omega_file", ""));
        if (!f.ranks.empty() && !cfg.has("problem", "ranks")) ranks = f.ranks;
        inst.omega = std::move(f.set);
        if (cfg.has("problem", "gamma_file"))
            inst.gamma = io::read_samples(cfg.get_string("problem", "gamma_file", "")).set;
        else
            inst.gamma = tr::make_sampling_set(inst.omega.dims, {}, {});
        if (inst.gamma.dims != inst.omega.dims) throw Error("trcomp: test and training dims differ");
    } else {
        if (!(rate > 0 && rate <= 1)) throw Error("config: [problem].rate must lie in (0,1]");
        if (test_count < 0) throw Error("config: [problem].test_count must be nonnegative");
        Rng rng(seed);
        inst = tr::build_instance(dims, ranks, rate, test_count, rng);
    }
    Rng irng(init_seed(seed));
    inst.init = tr::random_cores(inst.omega.dims, ranks, irng);
    inst.delta = cfg.get_double("problem", "delta", 1e-15);
    return inst;
}

inline bool run_trcomp(const Config& cfg, const SolverSettings& s, const RunContext& ctx)
{
    auto I = std::make_shared<const tr::TrInstance>(build_trcomp(cfg, ctx.run_seed));
    json extra;
    extra["samples"] = I->omega.size();
    extra["test_samples"] = I->gamma.size();
    bool ok = true;
    for (const auto& method : s.methods) {
        if (method == "gn") {
            ok &= execute(ctx, "gn", "", extra, [&] {
                return gauss_newton(tr::make_residual_problem(I), tr::flatten(I->init), s.stop, s.gn).run;
            });
            continue;
        }
        for (const auto& tag : s.metrics) {
            if (tag != "P" && tag != "E") throw Error("config: trcomp metric must be P or E");
            Problem pr = tr::make_problem(I);
            if (tag == "E") pr.metric = nullptr;
            ok &= execute(ctx, method, tag, extra, [&] { return run_descent(method, pr, I->init.W, s); });
        }
    }
    return ok;
}

// ---- ellipsoid ----

struct EllipsoidData {
    Matrix B;
    Vector b;
};

inline EllipsoidData build_ellipsoid(const Config& cfg)
{
    EllipsoidData d;
    if (cfg.has("problem", "b_matrix_file")) {
        if (cfg.has("problem", "B")) throw Error("config: [problem].B and [problem].b_matrix_file are exclusive");
        d.B = io::read_matrix(cfg.get_string("problem", "b_matrix_file", ""));
    } else {
        d.B = to_vector(cfg.get_doubles("problem", "B", {4, 9, 1})).asDiagonal();
    }
    d.b = to_vector(cfg.get_doubles("problem", "b", std::vector<double>(d.B.rows(), 1.0)));
    return d;
}

inline double parse_lambda(const std::string& tag)
{
    if (tag == "E") return 1.0;
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(tag, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != tag.size() || !std::isfinite(v)) throw Error("config: ellipsoid metric must be E or a number");
    return v;
}

inline void write_sweep(const fs::path& path, const std::vector<ellipsoid::SweepPoint>& sweep)
{
    auto out = io::open_out(path);
    out << "lambda,kappa,status\n";
    for (const auto& p : sweep)
        out << io::fmt(p.lambda) << ',' << (p.ok ? io::fmt(p.kappa) : "nan") << ',' << (p.ok ? "ok" : "indefinite")
            << '\n';
}

inline std::vector<double> sweep_grid(const Config& cfg)
{
    return cfg.get_doubles("problem", "grid", ellipsoid::default_grid());
}

inline bool run_ellipsoid(const Config& cfg, const SolverSettings& s, const RunContext& ctx, bool with_spectrum)
{
    const EllipsoidData d = build_ellipsoid(cfg);
    if (cfg.get_bool("problem", "sweep", true))
        write_sweep(ctx.out / ("ellipsoid_sweep" + ctx.suffix + ".csv"), ellipsoid::kappa_sweep(d.B, d.b, sweep_grid(cfg)));
    const SpdMatrix B(d.B);
    Vector x0;
    if (cfg.has("problem", "x0")) {
        x0 = to_vector(cfg.get_doubles("problem", "x0", {}));
        if (x0.size() != d.B.rows()) throw Error("config: [problem].x0 must match B");
    } else {
        Rng irng(init_seed(ctx.run_seed));
        x0 = irng.symmetric_uniform_matrix(d.B.rows(), 1);
    }
    x0 /= std::sqrt(x0.dot(B.matrix() * x0));
    bool ok = true;
    for (const auto& tag : s.metrics) {
        const double lam = parse_lambda(tag);
        json extra;
        extra["lambda"] = lam;
        std::shared_ptr<const ellipsoid::EllipsoidProblem> P;
        Problem pr;
        Vector xs;
        try {
            P = std::make_shared<const ellipsoid::EllipsoidProblem>(ellipsoid::make(d.B, d.b, lam));
            xs = ellipsoid::solution(*P);
            pr = ellipsoid::make_problem(P);
            pr.monitor = [xs](const ProductPoint& x) { return (x[0] - xs).norm(); };
            pr.diagnostics = [xs](const ProductPoint& x) { return Diagnostics{{"dist_x", (x[0] - xs).norm()}}; };
            if (with_spectrum) extra["kappa"] = numerical_kappa(pr, {Matrix(xs)}, cfg);
        } catch (const std::exception& e) {
            for (const auto& method : s.methods)
                ok &= execute(ctx, method, tag, extra, [&]() -> RunReport { throw Error(e.what()); });
            continue;
        }
        for (const auto& method : s.methods)
            ok &= execute(ctx, method, tag, extra, [&] { return run_descent(method, pr, {Matrix(x0)}, s); });
    }
    return ok;
}

// ---- spectrum ----

inline void write_eigenvalues(const fs::path& path, const Vector& ev)
{
    auto out = io::open_out(path);
    out << "index,eigenvalue\n";
    for (Eigen::Index i = 0; i < ev.size(); ++i) out << i << ',' << io::fmt(ev(i)) << '\n';
}

inline bool run_spectrum(const Config& cfg, const RunContext& ctx)
{
    const std::string target = cfg.get_string("problem", "target", "tsvd");
    SpectrumOptions opt;
    opt.step_scale = cfg.get_double("spectrum", "step_scale", opt.step_scale);
    const bool numerical = cfg.get_bool("spectrum", "numerical", true);
    json s;
    s["application"] = "spectrum";
    s["target"] = target;
    s["seed"] = ctx.run_seed;
    bool ok = true;
    auto numeric = [&](const std::string& tag, const Problem& pr, const ProductPoint& xs) {
        json j;
        try {
            const SpectrumReport r = numerical_spectrum(pr, xs, opt);
            j = {{"kappa", r.kappa}, {"dimension", r.dimension}, {"asymmetry", r.asymmetry},
                 {"lambda_min", r.eigenvalues(0)}, {"lambda_max", r.eigenvalues(r.eigenvalues.size() - 1)}};
            if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
            write_eigenvalues(ctx.out / ("spectrum_" + target + "_" + tag + ctx.suffix + ".csv"), r.eigenvalues);
        } catch (const std::exception& e) {
            ok = false;
            j = {{"error", e.what()}};
        }
        return j;
    };
    try {
        if (target == "tsvd") {
            const SvdData d = build_tsvd(cfg, ctx.run_seed);
            s["formula"] = tsvd_kappa(d);
            s["sigma"] = to_json(d.sigma);
            for (const auto& tag : cfg.get_list("solver", "metric", {"E", "R12"})) {
                auto P = std::make_shared<tsvd::SvdProblem>(d.base);
                P->metric = tsvd::parse_metric(tag);
                if (numerical) s["numerical"][tag] = numeric(tag, tsvd::make_problem(P), {d.Ustar, d.Vstar});
            }
        } else if (target == "cca") {
            const CcaData d = build_cca(cfg, ctx.run_seed);
            if (!d.ref) throw Error(d.ref_error);
            s["formula"] = cca_kappa(d.base);
            s["canonical_correlations"] = to_json(d.ref->sigma);
            for (const auto& tag : cfg.get_list("solver", "metric", {"L12", "LR12"})) {
                auto P = std::make_shared<cca::CcaProblem>(d.base);
                P->metric = cca::parse_metric(tag);
                if (numerical) s["numerical"][tag] = numeric(tag, cca::make_problem(P), {d.ref->U, d.ref->V});
            }
        } else if (target == "ellipsoid") {
            const EllipsoidData d = build_ellipsoid(cfg);
            const auto sweep = ellipsoid::kappa_sweep(d.B, d.b, sweep_grid(cfg));
            write_sweep(ctx.out / ("spectrum_ellipsoid_sweep" + ctx.suffix + ".csv"), sweep);
            const auto best = std::min_element(sweep.begin(), sweep.end(), [](const auto& a, const auto& b) {
                return a.ok && (!b.ok || a.kappa < b.kappa);
            });
            if (best != sweep.end() && best->ok) {
                s["argmin_lambda"] = best->lambda;
                s["min_kappa"] = best->kappa;
            }
        } else {
            throw Error("config: [problem].target must be tsvd, cca or ellipsoid");
        }
    } catch (const std::exception& e) {
        ok = false;
        s["error"] = e.what();
    }
    s["config"] = ctx.config;
    io::write_json(ctx.out / ("spectrum_" + target + ctx.suffix + ".json"), s);
    return ok;
}

// ---- driver ----

inline Config load_config(const std::string& path) { return path.empty() ? Config{} : Config::load(path); }

// Returns the process exit code: 0 when every run terminated normally.
inline int run(const std::string& app, const Options& opt)
{
    Config cfg = load_config(opt.config_path);
    cfg.validate(schema_for(app));
    if (cfg.has("run", "application") && cfg.get_string("run", "application", "") != app)
        throw Error("config: [run].application is '" + cfg.get_string("run", "application", "") + "', not " + app);
    const std::uint64_t seed =
        opt.seed ? *opt.seed : std::uint64_t(cfg.get_long("run", "seed", 1));
    const int repeat = opt.repeat ? *opt.repeat : int(cfg.get_long("run", "repeat", 1));
    if (repeat < 1) throw Error("config: [run].repeat must be at least 1");
    const fs::path out = opt.out ? *opt.out : fs::path(cfg.get_string("output", "dir", "out"));
    const bool timing = cfg.get_bool("output", "timing", true);
    const SolverSettings s = app == "spectrum" ? SolverSettings{} : read_solver(cfg, app);

    cfg.set("run", "seed", std::to_string(seed));
    cfg.set("run", "repeat", std::to_string(repeat));
    bool ok = true;
    for (int k = 0; k < repeat; ++k) {
        RunContext ctx{app, out, seed + std::uint64_t(k), k, repeat > 1 ? "_r" + std::to_string(k) : "", timing,
                       cfg.echo()};
        if (app == "cca") ok &= run_cca(cfg, s, ctx, opt.with_spectrum);
        else if (app == "tsvd") ok &= run_tsvd(cfg, s, ctx, opt.with_spectrum);
        else if (app == "trcomp") ok &= run_trcomp(cfg, s, ctx);
        else if (app == "ellipsoid") ok &= run_ellipsoid(cfg, s, ctx, opt.with_spectrum);
        else ok &= run_spectrum(cfg, ctx);
    }
    return ok ? 0 : 1;
}

// Writes the synthetic inputs of [run].application for one seed; returns the written paths.
inline std::vector<fs::path> generate(const Options& opt, const std::string& app_override = "")
{
    Config cfg = load_config(opt.config_path);
    const std::string app = app_override.empty() ? cfg.get_string("run", "application", "") : app_override;
    if (app.empty()) throw Error("generate: application missing ([run].application)");
    cfg.validate(schema_for(app));
    const std::uint64_t seed = opt.seed ? *opt.seed : std::uint64_t(cfg.get_long("run", "seed", 1));
    const fs::path out = opt.out ? *opt.out : fs::path(cfg.get_string("output", "dir", "out"));
    std::vector<fs::path> written;
    auto mat = [&](const std::string& name, const Matrix& A) {
        io::write_matrix(out / name, A);
        written.push_back(out / name);
    };
    if (app == "cca") {
        if (cfg.has("problem", "sigma")) throw Error("generate: constructed CCA instances have no data files");
        Rng rng(seed);
        const long n = cfg.get_long("problem", "n", 2000);
        const long dx = cfg.get_long("problem", "dx", 120), dy = cfg.get_long("problem", "dy", 80);
        if (n < 1 || dx < 1 || dy < 1) throw Error("config: [problem] sizes must be positive");
        const Matrix X = rng.uniform_matrix(n, dx);
        const Matrix Y = rng.uniform_matrix(n, dy);
        mat("X.txt", X);
        mat("Y.txt", Y);
    } else if (app == "tsvd") {
        const SvdData d = build_tsvd(cfg, seed);
        mat("A.txt", d.base.A);
        mat("Ustar.txt", d.Ustar);
        mat("Vstar.txt", d.Vstar);
    } else if (app == "trcomp") {
        const tr::TrInstance I = build_trcomp(cfg, seed);
        io::write_samples(out / "omega.txt", I.omega, I.init.ranks);
        io::write_samples(out / "gamma.txt", I.gamma, I.init.ranks);
        written.push_back(out / "omega.txt");
        written.push_back(out / "gamma.txt");
    } else if (app == "ellipsoid") {
        const EllipsoidData d = build_ellipsoid(cfg);
        mat("B.txt", d.B);
        mat("b.txt", d.b);
    } else {
        throw Error("generate: nothing to generate for " + app);
    }
    return written;
}

// ---- compare ----

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string csv() const
    {
        std::string s;
        auto line = [&](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i];
            s += '\n';
        };
        line(header);
        for (const auto& r : rows) line(r);
        return s;
    }

    std::string text() const
    {
        std::vector<std::size_t> w(header.size());
        for (std::size_t i = 0; i < header.size(); ++i) w[i] = header[i].size();
        for (const auto& r : rows)
            for (std::size_t i = 0; i < r.size(); ++i) w[i] = std::max(w[i], r[i].size());
        std::ostringstream ss;
        auto line = [&](const std::vector<std::string>& r) {
            std::string l;
            for (std::size_t i = 0; i < r.size(); ++i) l += (i ? "  " : "") + r[i] + std::string(w[i] - r[i].size(), ' ');
            ss << l.substr(0, l.find_last_not_of(' ') + 1) << '\n';
        };
        line(header);
        for (const auto& r : rows) line(r);
        return ss.str();
    }
};

inline std::string cell(const json& j)
{
    if (j.is_null()) return "";
    if (j.is_number_float()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", j.get<double>());
        return buf;
    }
    if (j.is_string()) return j.get<std::string>();
    return j.dump();
}

// Rows sharing method and seed compete on iteration count; the fewest are marked with '*'.
inline Table compare(const std::vector<fs::path>& paths)
{
    if (paths.empty()) throw Error("compare: no reports given");
    std::vector<json> reps;
    for (const auto& p : paths) {
        if (!fs::exists(p)) throw Error("compare: missing report " + p.string());
        reps.push_back(io::read_json(p));
        if (!reps.back().contains("application") || !reps.back().contains("method"))
            throw Error("compare: " + p.string() + " is not a run summary");
    }
    const std::string app = reps.front()["application"];
    std::vector<std::string> extras;
    for (std::size_t i = 0; i < reps.size(); ++i) {
        if (reps[i]["application"] != app)
            throw Error("compare: mixed applications (" + app + ", " + reps[i]["application"].get<std::string>() + ")");
        if (reps[i].contains("final"))
            for (auto& [k, v] : reps[i]["final"].items())
                if (k != "cost" && k != "gnorm" && k != "stepsize" &&
                    std::find(extras.begin(), extras.end(), k) == extras.end())
                    extras.push_back(k);
    }
    Table t;
    t.header = {"method", "metric", "seed", "iter", "time_s", "cost", "gnorm"};
    t.header.insert(t.header.end(), extras.begin(), extras.end());
    t.header.insert(t.header.end(), {"termination", "winner"});
    auto iters = [](const json& r) { return r.contains("iterations") ? r["iterations"].get<long>() : -1L; };
    for (const auto& r : reps) {
        const json f = r.value("final", json::object());
        std::vector<std::string> row{cell(r["method"]), cell(r.value("metric", json())), cell(r.value("seed", json())),
                                     cell(r.value("iterations", json())), cell(r.value("time_s", json())),
                                     cell(f.value("cost", json())), cell(f.value("gnorm", json()))};
        for (const auto& e : extras) row.push_back(cell(f.value(e, json())));
        row.push_back(cell(r.value("termination", json())));
        long best = -1;
        for (const auto& o : reps)
            if (o["method"] == r["method"] && o.value("seed", json()) == r.value("seed", json()) && iters(o) >= 0)
                best = best < 0 ? iters(o) : std::min(best, iters(o));
        row.push_back(iters(r) >= 0 && iters(r) == best ? "*" : "");
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace rpo::app
