#pragma once

#include "rwre/env_json.hpp"
#include "rwre/io.hpp"
#include "rwre/level2.hpp"
#include "rwre/mc.hpp"
#include "rwre/rate.hpp"
#include "rwre/tilt.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace rwre {

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_divergence = 3, exit_invariant = 4 };

struct RunOptions {
    bool strict = false;
    std::optional<std::string> out_dir;  // overrides the config's "output"
    unsigned threads = 1;
};

struct Tolerances {
    double u_limit = 1e-12;
    double r_c = 1e-8;
    double lambda_prime_gate = 1e-6;
    double mc_gate = 3.0;
};

/// Parsed run configuration. Task-specific blocks stay as JSON and are read
/// by the task itself so error pointers stay exact.
struct RunConfig {
    std::string task;
    nlohmann::json raw;
    Tolerances tol;
    std::uint64_t seed = 1;
    std::string output = "out";

    RateOptions rate_options() const {
        RateOptions o;
        o.u.tol = tol.u_limit;
        o.rc.tol = tol.r_c;
        return o;
    }
};

inline const std::vector<std::string>& known_tasks() {
    static const std::vector<std::string> t = {"lambda-curve", "rate-curve",    "tilt-report",   "level2-min",
                                               "mc-verify",    "counterexample", "symmetry-check"};
    return t;
}

/// {"min","max","points"} or an explicit array of values.
inline std::vector<double> parse_grid(const cfg::Node& n) {
    if (n.raw().is_array()) return n.numbers();
    double lo = n.at("min").number(), hi = n.at("max").number();
    long long k = n.at("points").integer();
    if (k < 1) throw ConfigError(n.child_pointer("points"), "grid needs at least one point");
    if (hi < lo) throw ConfigError(n.child_pointer("max"), "max is below min");
    if (k == 1) return {lo};
    std::vector<double> g;
    for (long long i = 0; i < k; ++i) g.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1));
    return g;
}

inline RunConfig parse_run_config(const nlohmann::json& j) {
    cfg::Node root(j, "");
    RunConfig c;
    c.raw = j;
    c.task = root.at("task").string();
    bool known = false;
    for (const auto& t : known_tasks()) known = known || t == c.task;
    if (!known) throw ConfigError("/task", "unknown task '" + c.task + "'");
    if (root.has("tolerances")) {
        cfg::Node t = root.at("tolerances");
        c.tol.u_limit = t.positive_or("u_limit", c.tol.u_limit);
        c.tol.r_c = t.positive_or("r_c", c.tol.r_c);
        c.tol.lambda_prime_gate = t.positive_or("lambda_prime_gate", c.tol.lambda_prime_gate);
        c.tol.mc_gate = t.positive_or("mc_gate", c.tol.mc_gate);
    }
    if (root.has("seed")) c.seed = root.at("seed").seed();
    if (root.has("output")) c.output = root.at("output").string();
    return c;
}

namespace detail {

inline Environment require_env(const cfg::Node& root) { return cfg::parse_environment(root.at("environment")); }

inline Environment require_finite_env(const cfg::Node& root) {
    Environment env = require_env(root);
    if (!env.is_finite_class())
        throw ConfigError("/environment/type", "task '" + root.at("task").string() +
                                                   "' needs a homogeneous or periodic environment");
    return env;
}

struct TaskContext {
    const RunConfig& cfg;
    const RunOptions& opt;
    std::filesystem::path dir;
    std::string hash;
    std::ostream& log;
    int status = exit_ok;

    io::OutputFile file(const std::string& name) const { return io::OutputFile((dir / name).string(), hash); }
    cfg::Node root() const { return cfg::Node(cfg.raw, ""); }
};

inline void task_lambda_curve(TaskContext& t) {
    cfg::Node root = t.root();
    Environment env = require_env(root);
    std::vector<double> grid = parse_grid(root.at("grid"));
    ULimitOptions u;
    u.tol = t.cfg.tol.u_limit;
    std::vector<LambdaCurveRow> rows(grid.size());
    Environment ref = reflect(env);
    parallel_for(grid.size(), t.opt.threads, [&](std::size_t i) {
        LambdaValue l = lambda(env, grid[i], u);
        LambdaValue lb = lambda(ref, grid[i], u);
        rows[i] = {grid[i], l.value, lb.value, l.converged && lb.converged, l.n_used, l.M_used};
    });
    auto f = t.file("lambda_curve.csv");
    io::write_lambda_curve(f, rows);
    f.write();
}

inline void task_rate_curve(TaskContext& t) {
    cfg::Node root = t.root();
    Environment env = require_env(root);
    std::vector<double> grid = parse_grid(root.at("grid"));
    RateSolver solver(env, t.cfg.rate_options());
    std::vector<RateValue> rows = solver.curve(grid, t.opt.threads);
    auto f = t.file("rate_curve.csv");
    io::write_rate_curve(f, rows);
    f.write();

    const XiCritical& xc = solver.xi_c();
    RateValue at0 = solver.rate(0.0);
    nlohmann::json s = {{"r_c", io::to_json(solver.rc())},
                        {"xi_c", {io::num(xc.lo), io::num(xc.hi)}},
                        {"xi_bar_c", {io::num(xc.bar_lo), io::num(xc.bar_hi)}},
                        {"xi_c_widened", xc.widened},
                        {"lambda_rc", io::num(solver.lambda_rc(false))},
                        {"lambda_bar_rc", io::num(solver.lambda_rc(true))},
                        {"I_at_0", io::num(at0.value)}};
    auto g = t.file("rate_summary.json");
    g.json_line(s);
    g.write();
}

inline void task_tilt_report(TaskContext& t) {
    cfg::Node root = t.root();
    Environment env = require_finite_env(root);
    std::vector<double> rs = parse_grid(root.at("r"));
    ULimitOptions u;
    u.tol = t.cfg.tol.u_limit;
    std::vector<nlohmann::json> lines(rs.size());
    parallel_for(rs.size(), t.opt.threads, [&](std::size_t i) {
        const double r = rs[i];
        TiltBundle b = tilt_bundle(env, r, u);
        AnsatzMeasure a = ansatz_measure(b);
        Corrector F = corrector(env, r, b.u, b.lambda.value);
        LambdaPrime lp = lambda_prime(env, r, 1e-4, t.cfg.tol.lambda_prime_gate, u);
        InvariantDensity occ = invariant_density(b.kernel, InvariantDensity::Mode::occupation);
        double occ_gap = 0.0;
        for (std::size_t s = 0; s < b.density.phi.size(); ++s)
            occ_gap = std::max(occ_gap, std::abs(occ.at(static_cast<long long>(s)) - b.density.phi[s]));
        double ent = entropy(a.mu, env);
        lines[i] = {{"r", io::num(r)},
                    {"lambda", io::num(a.lambda)},
                    {"xi", io::num(a.xi)},
                    {"row_sum_defect", io::num(a.row_sum_defect)},
                    {"invariance_residual", io::num(a.invariance_residual)},
                    {"ellipticity_floor", io::num(a.ellipticity_floor)},
                    {"min_kernel_pm1", io::num(a.min_pm1)},
                    {"density_floor_ok", b.density.floor_ok()},
                    {"occupation_density_gap", io::num(occ_gap)},
                    {"cocycle_defect", io::num(cocycle_defect(b.u))},
                    {"corrector_oscillation", io::num(F.oscillation())},
                    {"lambda_prime", io::num(lp.value)},
                    {"lambda_prime_gap", io::num(lp.gap)},
                    {"entropy", io::num(ent)},
                    {"entropy_identity_gap", io::num(ent - (r - a.xi * a.lambda))}};
        if (a.row_sum_defect > 1e-9 || !b.density.floor_ok() || a.min_pm1 < a.ellipticity_floor * (1 - 1e-12))
            throw Inconsistency("tilted kernel invariant violated at r=" + io::fmt(r));
    });
    auto f = t.file("tilt_report.jsonl");
    for (const auto& l : lines) f.json_line(l);
    f.write();
}

inline void task_level2_min(TaskContext& t) {
    cfg::Node root = t.root();
    Environment env = require_finite_env(root);
    cfg::Node xn = root.at("xi");
    std::vector<double> xs = xn.numbers();
    SolverConfig sc;
    if (root.has("solver")) {
        cfg::Node s = root.at("solver");
        sc.gradient_tol = s.positive_or("gradient_tol", sc.gradient_tol);
        sc.constraint_tol = s.positive_or("constraint_tol", sc.constraint_tol);
        sc.max_iter = s.integer_or("max_iter", sc.max_iter);
    }
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (!(std::abs(xs[i]) < env.B()))
            throw ConfigError(xn.pointer() + "/" + std::to_string(i), "xi must satisfy |xi| < B");
    RateSolver solver(env, t.cfg.rate_options());
    std::vector<RateValue> rates = solver.curve(xs, t.opt.threads);
    std::vector<MinimizeReport> reps(xs.size());
    std::vector<nlohmann::json> lines(xs.size());
    parallel_for(xs.size(), t.opt.threads, [&](std::size_t i) {
        reps[i] = minimize_entropy(env, xs[i], sc);
        nlohmann::json j = io::to_json(reps[i], xs[i]);
        const RateValue& rv = rates[i];
        j["rate"] = io::num(rv.value);
        j["branch"] = to_string(rv.branch);
        j["r_star"] = io::num(rv.r_star);
        if (rv.branch == Branch::right || rv.branch == Branch::left) {
            AnsatzMeasure a = ansatz_measure(env, rv.r_star, solver.options().u);
            j["ansatz_value"] = io::num(entropy(a.mu, env));
            j["ansatz_drift"] = io::num(a.xi);
            j["total_variation"] = io::num(total_variation(reps[i].minimizer, a.mu));
        }
        lines[i] = std::move(j);
    });
    auto f = t.file("level2_report.jsonl");
    for (const auto& l : lines) f.json_line(l);
    f.write();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        auto g = t.file("pair_measure_" + std::to_string(i) + ".csv");
        io::write_pair_measure(g, reps[i].minimizer);
        g.write();
        if (!reps[i].converged) {
            t.log << "level2-min: xi=" << io::fmt(xs[i]) << " did not reach the gradient tolerance\n";
            if (t.status == exit_ok) t.status = exit_divergence;
        }
    }
}

inline void task_mc_verify(TaskContext& t) {
    cfg::Node root = t.root();
    Environment env = require_env(root);
    cfg::Node m = root.at("mc");
    const double r = m.at("r").number();
    const long long n = m.integer_or("n", 10000);
    const long long replicas = m.integer_or("replicas", 200);
    const long long steps = m.integer_or("steps", n);
    if (n < 1) throw ConfigError(m.child_pointer("n"), "must be >= 1");
    if (replicas < 2) throw ConfigError(m.child_pointer("replicas"), "must be >= 2");
    McOptions mo;
    mo.gate = t.cfg.tol.mc_gate;
    mo.threads = t.opt.threads;
    mo.u.tol = t.cfg.tol.u_limit;
    RcOptions rco;
    rco.tol = t.cfg.tol.r_c;

    std::vector<McReport> reps;
    reps.push_back(passage_lln_check(env, r, n, replicas, t.cfg.seed, mo));
    reps.push_back(empirical_velocity_check(env, r, steps, replicas, t.cfg.seed + 1, mo));
    if (m.has("moment")) {
        cfg::Node mm = m.at("moment");
        const double mr = mm.at("r").number();
        cfg::Node orders = mm.at("orders");
        std::vector<double> os = orders.numbers();
        const long long mrep = mm.integer_or("replicas", replicas);
        for (std::size_t i = 0; i < os.size(); ++i) {
            long long o = orders.at(i).integer();
            if (o < 1) throw ConfigError(orders.at(i).pointer(), "moment order must be >= 1");
            reps.push_back(moment_bound_check(env, mr, static_cast<int>(o), mrep, t.cfg.seed + 2 + i, mo, rco));
        }
    }
    if (m.has("corrector")) {
        cfg::Node c = m.at("corrector");
        reps.push_back(corrector_sublinearity_check(env, c.number_or("r", r), c.integer_or("steps", steps),
                                                    c.integer_or("replicas", 8), t.cfg.seed + 100,
                                                    c.positive_or("eps_gate", 1e-3), mo));
    }
    auto f = t.file("mc_report.jsonl");
    for (const auto& rep : reps) f.json_line(io::to_json(rep));
    f.write();
    for (const auto& rep : reps) {
        if (rep.hard_violation) {
            t.log << "mc-verify: hard invariant violated in " << rep.check << "\n";
            t.status = exit_invariant;
        } else if (!rep.pass) {
            t.log << "mc-verify: warning: " << rep.check << " failed its statistical gate (z=" << io::fmt(rep.z_score)
                  << ")\n";
            if (t.opt.strict) t.status = exit_invariant;
        }
    }
}

inline const JumpLaw& counterexample_law() {
    static const JumpLaw law(2, {{-2, 1.0 / 7}, {-1, 3.0 / 7}, {1, 1.0 / 7}, {2, 2.0 / 7}});
    return law;
}

inline void task_counterexample(TaskContext& t) {
    cfg::Node root = t.root();
    JumpLaw law = counterexample_law();
    double delta = 1.0 / 7;
    if (root.has("law")) {
        cfg::Node ln = root.at("law");
        law = cfg::parse_law(ln, static_cast<int>(root.at("B").integer()));
        delta = root.at("delta").number();
        cfg::check_law(law, delta, ln.pointer());
    }
    std::vector<double> rs = root.has("r") ? parse_grid(root.at("r")) : std::vector<double>{-0.25, -0.5, -1.0, -2.0};
    JumpLaw control = JumpLaw::nearest_neighbor(0.7);
    if (root.has("control")) {
        cfg::Node cn = root.at("control");
        control = cfg::parse_law(cn, 1);
        cfg::check_law(control, 0.1, cn.pointer());
    }
    ULimitOptions u;
    u.tol = t.cfg.tol.u_limit;
    AsymmetryReport rep = asymmetry_demo(law, delta, rs, u);
    AsymmetryReport ctl = asymmetry_demo(control, std::min(control(1), control(-1)), rs, u);

    auto f = t.file("counterexample.csv");
    f.row({"r", "lambda", "lambda_bar", "gap", "poly_lambda", "poly_lambda_bar", "control_gap"});
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const auto& w = rep.rows[i];
        f.row({io::fmt(w.r), io::fmt(w.lambda), io::fmt(w.lambda_bar), io::fmt(w.gap()), io::fmt(w.poly_lambda),
               io::fmt(w.poly_lambda_bar), io::fmt(ctl.rows[i].gap())});
    }
    f.write();

    char line[200];
    auto g = t.file("counterexample_summary.md");
    g << "# Bounded-jump asymmetry\n\n";
    g << "Jump law p(z) for z = ";
    for (int z : law.offsets()) g << z << (z == law.B() ? "" : ", ");
    g << ": ";
    for (int z : law.offsets()) g << io::fmt(law(z)) << (z == law.B() ? "" : ", ");
    g << "\n\n| r | lambda(r) | lambda_bar(r) | lambda_bar - lambda | nearest-neighbor control |\n";
    g << "|---|---|---|---|---|\n";
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const auto& w = rep.rows[i];
        std::snprintf(line, sizeof line, "| %.4g | %.12f | %.12f | %.12f | %.12f |\n", w.r, w.lambda, w.lambda_bar,
                      w.gap(), ctl.rows[i].gap());
        g << line;
    }
    std::snprintf(line, sizeof line,
                  "\nVariation of lambda_bar - lambda across r: %.6e (control: %.6e).\n"
                  "Largest deviation from the characteristic-polynomial roots: %.3e.\n",
                  rep.variation, ctl.variation, rep.max_oracle_diff);
    g << line;
    g << (rep.variation > 1e-3 ? "The gap depends on r, so no r-independent symmetry constant exists for this law.\n"
                               : "The gap is constant across r at this resolution.\n");
    g.write();
}

inline void task_symmetry_check(TaskContext& t) {
    cfg::Node root = t.root();
    Environment env = require_finite_env(root);
    if (env.B() != 1) throw ConfigError("/environment/B", "symmetry-check needs nearest-neighbor jumps (B = 1)");
    std::vector<double> rs = root.has("r") ? parse_grid(root.at("r")) : std::vector<double>{};
    std::vector<double> xs = root.has("xi") ? parse_grid(root.at("xi")) : std::vector<double>{};
    SymmetryReport rep = symmetry_gap(env, rs, xs, t.cfg.rate_options(), t.opt.threads);
    auto f = t.file("symmetry.csv");
    f.row({"kind", "x", "gap"});
    for (std::size_t i = 0; i < rep.r_grid.size(); ++i)
        f.row({"lambda_bar_minus_lambda", io::fmt(rep.r_grid[i]), io::fmt(rep.lambda_gap[i])});
    for (std::size_t i = 0; i < rep.xi_grid.size(); ++i)
        f.row({"rate_identity_residual", io::fmt(rep.xi_grid[i]), io::fmt(rep.rate_gap[i])});
    f.write();
    auto g = t.file("symmetry_summary.json");
    g.json_line({{"mean_log_rho", io::num(rep.mean_log_rho)},
                 {"lambda_gap_spread", io::num(rep.lambda_gap_spread)},
                 {"max_rate_gap", io::num(rep.max_rate_gap)}});
    g.write();
}

inline void write_diagnostics(const TaskContext& t, const std::string& kind, const std::string& message,
                              const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json j = {{"error", kind}, {"message", message}, {"task", t.cfg.task}};
    for (const auto& [k, v] : extra.items()) j[k] = v;
    auto f = t.file("diagnostics.json");
    f.json_line(j);
    f.write();
}

} // namespace detail

/// Runs one parsed config. Library errors map to exit codes; the caller
/// handles ConfigError raised while reading the file.
inline int run_config(const nlohmann::json& config, const RunOptions& opt, std::ostream& log = std::cerr) {
    RunConfig cfg;
    try {
        cfg = parse_run_config(config);
    } catch (const ConfigError& e) {
        log << "config error at " << e.what() << "\n";
        return exit_config;
    }
    detail::TaskContext t{cfg, opt, opt.out_dir.value_or(cfg.output), io::config_hash(config), log};
    try {
        std::filesystem::create_directories(t.dir);
        if (cfg.task == "lambda-curve") detail::task_lambda_curve(t);
        else if (cfg.task == "rate-curve") detail::task_rate_curve(t);
        else if (cfg.task == "tilt-report") detail::task_tilt_report(t);
        else if (cfg.task == "level2-min") detail::task_level2_min(t);
        else if (cfg.task == "mc-verify") detail::task_mc_verify(t);
        else if (cfg.task == "counterexample") detail::task_counterexample(t);
        else detail::task_symmetry_check(t);
        return t.status;
    } catch (const ConfigError& e) {
        log << "config error at " << e.what() << "\n";
        return exit_config;
    } catch (const Supercritical& e) {
        log << "divergence: " << e.what() << "\n";
        detail::write_diagnostics(t, "supercritical", e.what(), {{"r", io::num(e.r())}});
        return exit_divergence;
    } catch (const NotConverged& e) {
        log << "divergence: " << e.what() << "\n";
        detail::write_diagnostics(t, "not_converged", e.what(), {{"gap", io::num(e.gap())}});
        return exit_divergence;
    } catch (const Infeasible& e) {
        log << "infeasible: " << e.what() << "\n";
        detail::write_diagnostics(t, "infeasible", e.what());
        return exit_divergence;
    } catch (const Inconsistency& e) {
        log << "invariant violation: " << e.what() << "\n";
        detail::write_diagnostics(t, "invariant_violation", e.what());
        return exit_invariant;
    } catch (const WindowExhausted& e) {
        log << "divergence: " << e.what() << "\n";
        detail::write_diagnostics(t, "window_exhausted", e.what(), {{"site", e.site()}});
        return exit_divergence;
    } catch (const InvalidArgument& e) {
        log << "config error: " << e.what() << "\n";
        return exit_config;
    }
}

inline int run(const std::string& config_path, const RunOptions& opt = {}, std::ostream& log = std::cerr) {
    std::ifstream in(config_path);
    if (!in) {
        log << "config error: cannot read " << config_path << "\n";
        return exit_config;
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        log << "config error at /: " << e.what() << "\n";
        return exit_config;
    }
    return run_config(j, opt, log);
}

} // namespace rwre
