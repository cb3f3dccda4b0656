#pragma once

#include "rwre/environment.hpp"
#include "rwre/error.hpp"
#include "rwre/parallel.hpp"
#include "rwre/passage.hpp"
#include "rwre/tilt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace rwre {

enum class Branch { right, left, zero, affine };

inline const char* to_string(Branch b) {
    switch (b) {
    case Branch::right: return "right";
    case Branch::left: return "left";
    case Branch::zero: return "zero";
    case Branch::affine: return "affine";
    }
    return "?";
}

struct RateValue {
    double xi = 0.0;
    double value = 0.0;
    double r_star = std::numeric_limits<double>::quiet_NaN();
    Branch branch = Branch::zero;
    /// "ok", "ambiguous", "endpoint", "infinite" or "not-converged".
    std::string flag = "ok";
    /// Other branch's value when ambiguous; endpoint stabilization diff otherwise.
    double alt_value = std::numeric_limits<double>::quiet_NaN();
    double error_bar = 0.0;
    /// lambda(r_star) on the strictly convex branch (lambda-bar on the left).
    double lambda_at_r_star = std::numeric_limits<double>::quiet_NaN();
};

/// xi_c in [lo, hi] and xi-bar_c in [bar_lo, bar_hi] (both <= 0).
struct XiCritical {
    double lo = 0.0, hi = 0.0;
    double bar_lo = 0.0, bar_hi = 0.0;
    bool widened = false;
};

struct RateOptions {
    RcOptions rc;
    ULimitOptions u;
    /// Distance below the r_c bracket where lambda' is still evaluated.
    double edge_gap = 1e-6;
    /// Most negative tilt tried before treating xi as the endpoint B.
    double r_floor = -40.0;
    double root_tol = 1e-11;
};

/// Legendre duality for one environment, caching r_c, xi_c and lambda(r_c-).
class RateSolver {
public:
    explicit RateSolver(Environment env, RateOptions opt = {})
        : env_(std::move(env)), ref_(reflect(env_)), opt_(opt) {
        rc_ = estimate_rc(env_, opt_.rc);
    }

    const Environment& environment() const noexcept { return env_; }
    const RcEstimate& rc() const noexcept { return rc_; }
    const RateOptions& options() const noexcept { return opt_; }

    /// lambda'(r) of env (left = false) or of its reflection (left = true).
    double lambda_prime_at(double r, bool left) const {
        const Environment& e = left ? ref_ : env_;
        if (e.is_finite_class()) return lambda_prime_stationary(e, r, opt_.u);
        double edge = left ? rc_.lo_bar : rc_.lo;
        double h = std::min(1e-3, 0.25 * (edge - r));
        return lambda_prime_fd(e, r, h, opt_.u);
    }

    double lambda_at(double r, bool left) const {
        return lambda(left ? ref_ : env_, r, opt_.u).value;
    }

    const XiCritical& xi_c() {
        if (!xic_) xic_ = compute_xi_c();
        return *xic_;
    }

    /// lambda at the lower edge of the r_c bracket: the monotone limit from below.
    double lambda_rc(bool left) {
        auto& slot = left ? lam_rc_bar_ : lam_rc_;
        if (!slot) slot = lambda_at(left ? rc_.lo_bar : rc_.lo, left);
        return *slot;
    }

    RateValue rate(double xi) {
        const int B = env_.B();
        RateValue out;
        out.xi = xi;
        if (std::abs(xi) > B) {
            out.value = std::numeric_limits<double>::infinity();
            out.branch = xi > 0 ? Branch::right : Branch::left;
            out.flag = "infinite";
            return out;
        }
        if (xi == 0.0) {
            out.value = 0.5 * (rc_.lo + rc_.hi);
            out.r_star = out.value;
            out.branch = Branch::zero;
            out.error_bar = rc_.width();
            return out;
        }
        const bool left = xi < 0.0;
        const double a = std::abs(xi);
        out.branch = left ? Branch::left : Branch::right;
        if (a == static_cast<double>(B)) return endpoint(out, left);

        const XiCritical& xc = xi_c();
        const double c_lo = left ? -xc.bar_hi : xc.lo;
        const double c_hi = left ? -xc.bar_lo : xc.hi;
        const double rc_lo = left ? rc_.lo_bar : rc_.lo;
        const double rc_mid = left ? 0.5 * (rc_.lo_bar + rc_.hi_bar) : rc_.mid();

        auto affine = [&] { return rc_mid - a * lambda_rc(left); };
        if (a < c_lo) {
            out.value = affine();
            out.r_star = rc_mid;
            out.branch = Branch::affine;
            out.error_bar = rc_.width() * (1.0 + a * lambda_prime_at(rc_lo - opt_.edge_gap, left));
            return out;
        }
        std::optional<double> rs = solve_r_star(a, left);
        if (!rs) {
            if (a <= c_hi) {
                out.value = affine();
                out.r_star = rc_mid;
                out.branch = Branch::affine;
                out.flag = "ambiguous";
                return out;
            }
            return endpoint(out, left);
        }
        double lam = lambda_at(*rs, left);
        out.r_star = *rs;
        out.lambda_at_r_star = lam;
        out.value = *rs - a * lam;
        if (a <= c_hi) {
            out.flag = "ambiguous";
            out.alt_value = affine();
        }
        return out;
    }

    std::vector<RateValue> curve(const std::vector<double>& grid, unsigned threads = 1) {
        xi_c();
        lambda_rc(false);
        lambda_rc(true);
        std::vector<RateValue> out(grid.size());
        parallel_for(grid.size(), threads, [&](std::size_t i) { out[i] = rate(grid[i]); });
        return out;
    }

private:
    /// Solves lambda'(r) = 1/a with lambda' increasing in r; nullopt if 1/a is
    /// not bracketed on [r_floor, r_c - edge_gap].
    std::optional<double> solve_r_star(double a, bool left) const {
        const double target = 1.0 / a;
        const double rc_lo = left ? rc_.lo_bar : rc_.lo;
        double hi = rc_lo - opt_.edge_gap;
        double f_hi = lambda_prime_at(hi, left) - target;
        if (f_hi < 0.0) return std::nullopt;
        double lo = hi - 1.0;
        double f_lo = lambda_prime_at(lo, left) - target;
        while (f_lo > 0.0) {
            if (lo <= opt_.r_floor) return std::nullopt;
            hi = lo;
            f_hi = f_lo;
            lo = std::max(opt_.r_floor, hi - 2.0 * (rc_lo - hi));
            f_lo = lambda_prime_at(lo, left) - target;
        }
        // Illinois false position with a bisection safeguard.
        int side = 0;
        double r = lo;
        for (int it = 0; it < 200; ++it) {
            double fl = f_lo, fh = f_hi;
            r = (lo * fh - hi * fl) / (fh - fl);
            if (!(r > lo && r < hi) || it % 8 == 7) r = 0.5 * (lo + hi);
            double f = lambda_prime_at(r, left) - target;
            if (std::abs(f) <= opt_.root_tol * std::max(1.0, target) || hi - lo < 1e-15) break;
            if (f < 0.0) {
                lo = r;
                f_lo = f;
                if (side == -1) f_hi *= 0.5;
                side = -1;
            } else {
                hi = r;
                f_hi = f;
                if (side == 1) f_lo *= 0.5;
                side = 1;
            }
        }
        return r;
    }

    /// r - B lambda(r) at the most negative r >= r_floor where u converged;
    /// alt_value is the change against r + 5.
    RateValue& endpoint(RateValue& out, bool left) const {
        const int B = env_.B();
        const Environment& e = left ? ref_ : env_;
        const double top = (left ? rc_.lo_bar : rc_.lo) - 5.0;
        auto f = [&](const LambdaValue& l) { return l.r - B * l.value; };
        out.flag = "not-converged";
        for (double r = opt_.r_floor; r <= top; r += 2.5) {
            LambdaValue l = lambda(e, r, opt_.u);
            if (!l.converged || !l.finite) continue;
            LambdaValue l5 = lambda(e, r + 5.0, opt_.u);
            out.r_star = r;
            out.value = f(l);
            out.alt_value = l5.converged ? std::abs(out.value - f(l5)) : kInf;
            out.flag = "endpoint";
            break;
        }
        if (out.flag != "endpoint") out.value = std::numeric_limits<double>::quiet_NaN();
        return out;
    }

    /// 1/lambda'(r_c - d) for d -> 0, extrapolated in sqrt(d).
    std::pair<double, double> xi_limit(bool left, bool& widened) const {
        const double rc_lo = left ? rc_.lo_bar : rc_.lo;
        const double hi = 1.0 / lambda_prime_at(rc_lo - opt_.edge_gap, left);
        std::vector<double> xs;
        for (double d : {64e-6, 16e-6, 4e-6, 1e-6}) xs.push_back(1.0 / lambda_prime_at(rc_lo - d, left));
        std::vector<double> r1, r2;
        for (std::size_t i = 0; i + 1 < xs.size(); ++i) r1.push_back(2.0 * xs[i + 1] - xs[i]);
        for (std::size_t i = 0; i + 1 < r1.size(); ++i) r2.push_back((4.0 * r1[i + 1] - r1[i]) / 3.0);
        double est = r2.back();
        double err = std::abs(r2[1] - r2[0]) + std::abs(r1.back() - est);
        double lo = std::max(0.0, est - 3.0 * err);
        if (!std::isfinite(lo) || lo > hi) {
            lo = 0.0;
            widened = true;
        }
        return {lo, hi};
    }

    XiCritical compute_xi_c() const {
        XiCritical x;
        auto [lo, hi] = xi_limit(false, x.widened);
        auto [blo, bhi] = xi_limit(true, x.widened);
        x.lo = lo;
        x.hi = hi;
        x.bar_lo = -bhi;
        x.bar_hi = blo == 0.0 ? 0.0 : -blo;
        const double B = env_.B();
        if (!(x.hi < B && x.bar_lo > -B && x.lo >= 0.0 && x.bar_hi <= 0.0))
            throw Inconsistency("xi_c bounds -B < xi-bar_c <= 0 <= xi_c < B violated");
        return x;
    }

    Environment env_, ref_;
    RateOptions opt_;
    RcEstimate rc_;
    std::optional<XiCritical> xic_;
    std::optional<double> lam_rc_, lam_rc_bar_;
};

inline RateValue rate(const Environment& env, double xi, const RateOptions& opt = {}) {
    RateSolver s(env, opt);
    return s.rate(xi);
}

inline XiCritical xi_c(const Environment& env, const RateOptions& opt = {}) {
    RateSolver s(env, opt);
    return s.xi_c();
}

// ---------------------------------------------------------------------------
// Cramer oracle
// ---------------------------------------------------------------------------

/// sup_theta { theta xi - log sum_z p(z) e^{theta z} } for a homogeneous walk.
/// At the largest (smallest) charged offset the value is -log p of it.
inline double cramer_oracle(const JumpLaw& law, double xi) {
    int zmax = 0, zmin = 0;
    for (int z : law.offsets())
        if (law(z) > 0.0) {
            zmax = std::max(zmax, z);
            zmin = std::min(zmin, z);
        }
    if (xi > zmax || xi < zmin) return std::numeric_limits<double>::infinity();
    if (xi == zmax) return -std::log(law(zmax));
    if (xi == zmin) return -std::log(law(zmin));
    // Lambda'(theta) = E_theta[Z], computed with shifted exponents.
    auto tilted_mean = [&](double th) {
        double shift = th > 0 ? th * zmax : th * zmin;
        double s = 0.0, m = 0.0;
        for (int z : law.offsets()) {
            double w = law(z) * std::exp(th * z - shift);
            s += w;
            m += z * w;
        }
        return m / s;
    };
    auto log_mgf = [&](double th) {
        double shift = th > 0 ? th * zmax : th * zmin;
        double s = 0.0;
        for (int z : law.offsets()) s += law(z) * std::exp(th * z - shift);
        return std::log(s) + shift;
    };
    double lo = -1.0, hi = 1.0;
    while (tilted_mean(lo) > xi) lo *= 2.0;
    while (tilted_mean(hi) < xi) hi *= 2.0;
    for (int it = 0; it < 400 && hi - lo > 1e-16 * (1.0 + std::abs(lo)); ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (tilted_mean(mid) < xi ? lo : hi) = mid;
    }
    double th = 0.5 * (lo + hi);
    return th * xi - log_mgf(th);
}

// ---------------------------------------------------------------------------
// Nearest-neighbor symmetry and bounded-jump asymmetry
// ---------------------------------------------------------------------------

struct SymmetryReport {
    double mean_log_rho = 0.0;
    std::vector<double> r_grid;
    std::vector<double> lambda_gap;  // lambda-bar(r) - lambda(r)
    double lambda_gap_spread = 0.0;  // max |lambda_gap - mean_log_rho|
    std::vector<double> xi_grid;
    std::vector<double> rate_gap;    // I(xi) - I(-xi) - xi E[log rho]
    double max_rate_gap = 0.0;
};

inline double mean_log_rho(const Environment& env) {
    double s = 0.0;
    for (const JumpLaw& law : env.laws()) s += std::log(law(-1) / law(1));
    return s / static_cast<double>(env.laws().size());
}

inline SymmetryReport symmetry_gap(const Environment& env, std::vector<double> r_grid = {},
                                   std::vector<double> xi_grid = {}, const RateOptions& opt = {},
                                   unsigned threads = 1) {
    if (env.B() != 1) throw InvalidArgument("symmetry_gap: nearest-neighbor environments only");
    RateSolver solver(env, opt);
    SymmetryReport rep;
    rep.mean_log_rho = mean_log_rho(env);
    if (r_grid.empty())
        for (double d : {0.05, 0.1, 0.25, 0.5, 1.0}) r_grid.push_back(solver.rc().lo - d);
    if (xi_grid.empty())
        for (int k = 0; k <= 10; ++k) xi_grid.push_back(0.09 * k);
    rep.r_grid = r_grid;
    rep.xi_grid = xi_grid;
    for (double r : r_grid) {
        double g = solver.lambda_at(r, true) - solver.lambda_at(r, false);
        rep.lambda_gap.push_back(g);
        rep.lambda_gap_spread = std::max(rep.lambda_gap_spread, std::abs(g - rep.mean_log_rho));
    }
    std::vector<double> both;
    for (double x : xi_grid) {
        both.push_back(x);
        both.push_back(-x);
    }
    std::vector<RateValue> vals = solver.curve(both, threads);
    for (std::size_t k = 0; k < xi_grid.size(); ++k) {
        double g = vals[2 * k].value - vals[2 * k + 1].value - xi_grid[k] * rep.mean_log_rho;
        rep.rate_gap.push_back(g);
        rep.max_rate_gap = std::max(rep.max_rate_gap, std::abs(g));
    }
    return rep;
}

struct AsymmetryRow {
    double r = 0.0;
    double lambda = 0.0, lambda_bar = 0.0;  // pipeline
    double poly_lambda = 0.0, poly_lambda_bar = 0.0;
    double gap() const noexcept { return lambda_bar - lambda; }
};

struct AsymmetryReport {
    std::vector<AsymmetryRow> rows;
    double variation = 0.0;       // max - min of lambda-bar - lambda over the rows
    double max_oracle_diff = 0.0; // pipeline vs characteristic polynomial
    double max_poly_residual = 0.0;
};

inline AsymmetryReport asymmetry_demo(const JumpLaw& law, double delta,
                                      std::vector<double> r_grid = {-0.25, -0.5, -1.0, -2.0},
                                      const ULimitOptions& opt = {}) {
    Environment env = Environment::homogeneous(law, delta);
    AsymmetryReport rep;
    double mn = std::numeric_limits<double>::infinity(), mx = -mn;
    for (double r : r_grid) {
        AsymmetryRow row;
        row.r = r;
        row.lambda = lambda(env, r, opt).value;
        row.lambda_bar = lambda_bar(env, r, opt).value;
        CharPolyResult cp = char_poly_roots(law, r);
        if (!cp.x_right || !cp.x_left) throw Supercritical("characteristic polynomial lacks a root pair", r);
        row.poly_lambda = -std::log(*cp.x_right);
        row.poly_lambda_bar = std::log(*cp.x_left);
        rep.max_poly_residual = std::max(rep.max_poly_residual, cp.max_residual);
        rep.max_oracle_diff = std::max({rep.max_oracle_diff, std::abs(row.lambda - row.poly_lambda),
                                        std::abs(row.lambda_bar - row.poly_lambda_bar)});
        mn = std::min(mn, row.gap());
        mx = std::max(mx, row.gap());
        rep.rows.push_back(row);
    }
    rep.variation = mx - mn;
    return rep;
}

} // namespace rwre
