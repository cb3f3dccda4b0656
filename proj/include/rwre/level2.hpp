#pragma once

#include "rwre/environment.hpp"
#include "rwre/error.hpp"
#include "rwre/linalg.hpp"
#include "rwre/pair_measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace rwre {

/// Conditional relative entropy sum w log(w / (m1 p)) of a pair measure
/// against the environment's jump laws; +inf if w charges a forbidden jump.
inline double entropy(const PairMeasure& mu, const Environment& env) {
    if (mu.L != class_count(env) || mu.B != env.B()) throw InvalidArgument("entropy: shape mismatch");
    Marginals m = marginals(mu);
    double s = 0.0;
    for (std::size_t i = 0; i < mu.L; ++i) {
        const JumpLaw& law = env.law_at(static_cast<long long>(i));
        for (int z : JumpLaw::offsets(mu.B)) {
            double w = mu.at(i, z);
            if (w <= 0.0) continue;
            if (law(z) <= 0.0) return std::numeric_limits<double>::infinity();
            s += w * std::log(w / (m.m1[i] * law(z)));
        }
    }
    return s;
}

/// w(i, z) = law_i(z) s(i) with s the stationary law of the untilted projected chain.
inline PairMeasure untilted_pair_measure(const Environment& env) {
    const std::size_t L = class_count(env);
    const int B = env.B();
    linalg::Matrix P(L, L, 0.0);
    for (std::size_t i = 0; i < L; ++i)
        for (int z : JumpLaw::offsets(B)) {
            PairMeasure tmp(L, B);
            P(i, tmp.wrap(static_cast<long long>(i) + z)) += env.law_at(static_cast<long long>(i))(z);
        }
    std::vector<double> s = linalg::stationary_gth(P);
    PairMeasure mu(L, B);
    for (std::size_t i = 0; i < L; ++i)
        for (int z : JumpLaw::offsets(B)) mu.at(i, z) = s[i] * env.law_at(static_cast<long long>(i))(z);
    return mu;
}

/// w(i, z) = (1/n) #{k < n : X_k = i mod L, X_{k+1} - X_k = z}.
inline PairMeasure empirical_pair_measure(std::span<const long long> path, std::size_t L, int B) {
    if (path.size() < 2) throw InvalidArgument("empirical_pair_measure: path has no steps");
    PairMeasure mu(L, B);
    const double inv = 1.0 / static_cast<double>(path.size() - 1);
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        long long z = path[k + 1] - path[k];
        if (z == 0 || std::abs(z) > B) throw InvalidArgument("empirical_pair_measure: illegal increment");
        mu.at(mu.wrap(path[k]), static_cast<int>(z)) += inv;
    }
    return mu;
}

inline PairMeasure empirical_pair_measure(std::span<const long long> path, const Environment& env) {
    return empirical_pair_measure(path, class_count(env), env.B());
}

// ---------------------------------------------------------------------------
// Entropy minimization over A_xi
// ---------------------------------------------------------------------------

struct SolverConfig {
    double floor = 1e-12;           // lower bound kept on every active weight
    double gradient_tol = 1e-7;     // Euclidean norm of the projected gradient
    double constraint_tol = 1e-9;
    long long max_iter = 200'000;
    double armijo = 1e-4;
};

struct MinimizeReport {
    PairMeasure minimizer;
    double value = 0.0;
    double projected_gradient = kInfinity;
    double mass_residual = 0.0;
    double stationarity_residual = 0.0;
    double drift_residual = 0.0;
    long long iterations = 0;
    bool converged = false;
    double start_theta = 0.0;
    /// Multiplier of the drift constraint; equals -lambda(r_star) at the optimum.
    double drift_multiplier = 0.0;

    static constexpr double kInfinity = std::numeric_limits<double>::infinity();
};

namespace detail {

/// Stationary pair measure of the exponentially tilted chain
/// q_i(z) = p_i(z) e^{theta z} / Z_i(theta).
inline PairMeasure exp_tilted_measure(const Environment& env, double theta) {
    const std::size_t L = class_count(env);
    const int B = env.B();
    PairMeasure q(L, B);
    for (std::size_t i = 0; i < L; ++i) {
        const JumpLaw& law = env.law_at(static_cast<long long>(i));
        double zsum = 0.0;
        for (int z : JumpLaw::offsets(B)) zsum += law(z) * std::exp(theta * z);
        for (int z : JumpLaw::offsets(B)) q.at(i, z) = law(z) * std::exp(theta * z) / zsum;
    }
    linalg::Matrix P(L, L, 0.0);
    for (std::size_t i = 0; i < L; ++i)
        for (int z : JumpLaw::offsets(B)) P(i, q.wrap(static_cast<long long>(i) + z)) += q.at(i, z);
    std::vector<double> s = linalg::stationary_gth(P);
    for (std::size_t i = 0; i < L; ++i)
        for (int z : JumpLaw::offsets(B)) q.at(i, z) *= s[i];
    return q;
}

struct Problem {
    std::size_t L = 1;
    int B = 1;
    std::vector<std::size_t> index;  // active slot in PairMeasure::w
    std::vector<std::size_t> site;
    std::vector<int> offset;
    std::vector<double> logp;
    linalg::Matrix A;
    std::vector<double> b;

    std::size_t n() const { return index.size(); }
    std::size_t m() const { return b.size(); }

    std::vector<double> residual(const std::vector<double>& w) const {
        std::vector<double> r(m(), 0.0);
        for (std::size_t c = 0; c < m(); ++c) {
            double s = -b[c];
            for (std::size_t k = 0; k < n(); ++k) s += A(c, k) * w[k];
            r[c] = s;
        }
        return r;
    }
    std::vector<double> m1(const std::vector<double>& w) const {
        std::vector<double> out(L, 0.0);
        for (std::size_t k = 0; k < n(); ++k) out[site[k]] += w[k];
        return out;
    }
    double objective(const std::vector<double>& w) const {
        auto mm = m1(w);
        double s = 0.0;
        for (std::size_t k = 0; k < n(); ++k) s += w[k] * (std::log(w[k] / mm[site[k]]) - logp[k]);
        return s;
    }
    std::vector<double> gradient(const std::vector<double>& w) const {
        auto mm = m1(w);
        std::vector<double> g(n());
        for (std::size_t k = 0; k < n(); ++k) g[k] = std::log(w[k] / mm[site[k]]) - logp[k];
        return g;
    }
    /// Solves (A diag(s) A^T) y = v.
    std::vector<double> gram_solve(const std::vector<double>& s, const std::vector<double>& v) const {
        linalg::Matrix G(m(), m(), 0.0);
        for (std::size_t a = 0; a < m(); ++a)
            for (std::size_t c = 0; c < m(); ++c) {
                double t = 0.0;
                for (std::size_t k = 0; k < n(); ++k) t += A(a, k) * s[k] * A(c, k);
                G(a, c) = t;
            }
        return linalg::solve(std::move(G), v);
    }
    /// diag(s) (x - A^T y) with y chosen so that the result lies in ker A.
    std::vector<double> project(const std::vector<double>& s, const std::vector<double>& x,
                                std::vector<double>* mult = nullptr) const {
        std::vector<double> v(m(), 0.0);
        for (std::size_t c = 0; c < m(); ++c)
            for (std::size_t k = 0; k < n(); ++k) v[c] += A(c, k) * s[k] * x[k];
        std::vector<double> y = gram_solve(s, v);
        std::vector<double> out(n());
        for (std::size_t k = 0; k < n(); ++k) {
            double t = x[k];
            for (std::size_t c = 0; c < m(); ++c) t -= A(c, k) * y[c];
            out[k] = s[k] * t;
        }
        if (mult) *mult = std::move(y);
        return out;
    }
    /// Pulls w back onto {A w = b} along the w-weighted metric.
    void restore(std::vector<double>& w) const {
        for (int pass = 0; pass < 3; ++pass) {
            std::vector<double> r = residual(w);
            std::vector<double> y = gram_solve(w, r);
            for (std::size_t k = 0; k < n(); ++k) {
                double t = 0.0;
                for (std::size_t c = 0; c < m(); ++c) t += A(c, k) * y[c];
                w[k] -= w[k] * t;
            }
        }
    }
};

inline Problem build_problem(const Environment& env, double xi) {
    Problem p;
    p.L = class_count(env);
    p.B = env.B();
    PairMeasure shape(p.L, p.B);
    for (std::size_t i = 0; i < p.L; ++i) {
        const JumpLaw& law = env.law_at(static_cast<long long>(i));
        for (int z : JumpLaw::offsets(p.B)) {
            if (law(z) <= 0.0) continue;
            p.index.push_back(i * shape.stride() + JumpLaw::slot(p.B, z));
            p.site.push_back(i);
            p.offset.push_back(z);
            p.logp.push_back(std::log(law(z)));
        }
    }
    // Rows: mass, stationarity for classes 0..L-2 (the last is implied), drift.
    const std::size_t m = 1 + (p.L - 1) + 1;
    p.A = linalg::Matrix(m, p.n(), 0.0);
    p.b.assign(m, 0.0);
    for (std::size_t k = 0; k < p.n(); ++k) {
        p.A(0, k) = 1.0;
        std::size_t dest = shape.wrap(static_cast<long long>(p.site[k]) + p.offset[k]);
        if (p.site[k] + 1 < p.L) p.A(1 + p.site[k], k) += 1.0;
        if (dest + 1 < p.L) p.A(1 + dest, k) -= 1.0;
        p.A(m - 1, k) = p.offset[k];
    }
    p.b[0] = 1.0;
    p.b[m - 1] = xi;
    return p;
}

} // namespace detail

/// Minimizes the level-2 entropy over stationary pair measures with mean jump
/// xi by projected gradient descent with Barzilai-Borwein steps and Armijo
/// backtracking. The projection is the w-weighted orthogonal projection onto
/// the constraint nullspace, so iterates stay interior.
inline MinimizeReport minimize_entropy(const Environment& env, double xi, const SolverConfig& cfg = {}) {
    const std::size_t L = class_count(env);
    const int B = env.B();
    if (!(std::abs(xi) < B)) throw Infeasible("drift " + std::to_string(xi) + " is outside (-B, B)");

    // Feasible start: exponential tilt whose stationary drift is xi.
    auto drift_at = [&](double th) { return detail::exp_tilted_measure(env, th).drift(); };
    double lo = -1.0, hi = 1.0;
    while (drift_at(lo) > xi) {
        lo *= 2.0;
        if (lo < -200.0)
            throw Infeasible("drift " + std::to_string(xi) + " below the attainable range, infimum " +
                             std::to_string(drift_at(lo)));
    }
    while (drift_at(hi) < xi) {
        hi *= 2.0;
        if (hi > 200.0)
            throw Infeasible("drift " + std::to_string(xi) + " above the attainable range, supremum " +
                             std::to_string(drift_at(hi)));
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
        double mid = 0.5 * (lo + hi);
        (drift_at(mid) < xi ? lo : hi) = mid;
    }
    MinimizeReport rep;
    rep.start_theta = 0.5 * (lo + hi);
    PairMeasure start = detail::exp_tilted_measure(env, rep.start_theta);

    detail::Problem p = detail::build_problem(env, xi);
    const std::size_t n = p.n();
    std::vector<double> w(n);
    for (std::size_t k = 0; k < n; ++k) w[k] = std::max(start.w[p.index[k]], cfg.floor);
    p.restore(w);

    const std::vector<double> ones(n, 1.0);
    std::vector<double> g = p.gradient(w), w_prev, g_prev, mult;
    double f = p.objective(w);
    auto pg_norm = [&](const std::vector<double>& grad) {
        std::vector<double> e = p.project(ones, grad, &mult);
        double s = 0.0;
        for (double v : e) s += v * v;
        return std::sqrt(s);
    };
    rep.projected_gradient = pg_norm(g);
    double alpha = 1.0;
    for (long long it = 1; it <= cfg.max_iter && rep.projected_gradient > cfg.gradient_tol; ++it) {
        std::vector<double> d = p.project(w, g);
        for (double& v : d) v = -v;
        if (!w_prev.empty()) {
            double sds = 0.0, sy = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                double s = w[k] - w_prev[k];
                sds += s * s / w[k];
                sy += s * (g[k] - g_prev[k]);
            }
            alpha = sy > 0.0 ? std::clamp(sds / sy, 1e-8, 1e8) : 1.0;
        }
        double amax = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n; ++k)
            if (d[k] < 0.0) amax = std::min(amax, 0.95 * (w[k] - cfg.floor) / -d[k]);
        alpha = std::min(alpha, amax);
        double slope = 0.0;
        for (std::size_t k = 0; k < n; ++k) slope += g[k] * d[k];
        std::vector<double> trial(n);
        double f_trial = f;
        bool accepted = false;
        for (int bt = 0; bt < 80; ++bt) {
            for (std::size_t k = 0; k < n; ++k) trial[k] = w[k] + alpha * d[k];
            f_trial = p.objective(trial);
            if (f_trial <= f + cfg.armijo * alpha * slope + 4e-16 * std::abs(f)) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        rep.iterations = it;
        if (!accepted) break;
        p.restore(trial);
        w_prev = std::move(w);
        g_prev = std::move(g);
        w = std::move(trial);
        f = p.objective(w);
        g = p.gradient(w);
        rep.projected_gradient = pg_norm(g);
    }

    rep.minimizer = PairMeasure(L, B);
    for (std::size_t k = 0; k < n; ++k) rep.minimizer.w[p.index[k]] = w[k];
    rep.value = entropy(rep.minimizer, env);
    std::vector<double> res = p.residual(w);
    rep.mass_residual = std::abs(res.front());
    rep.drift_residual = std::abs(res.back());
    rep.stationarity_residual = marginals(rep.minimizer).stationarity_residual;
    rep.drift_multiplier = mult.empty() ? 0.0 : mult.back();
    rep.converged = rep.projected_gradient <= cfg.gradient_tol && rep.mass_residual <= cfg.constraint_tol &&
                    rep.drift_residual <= cfg.constraint_tol && rep.stationarity_residual <= cfg.constraint_tol;
    return rep;
}

} // namespace rwre
