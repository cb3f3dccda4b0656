#pragma once

#include "rwre/environment.hpp"
#include "rwre/error.hpp"
#include "rwre/linalg.hpp"
#include "rwre/pair_measure.hpp"
#include "rwre/passage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace rwre {

// ---------------------------------------------------------------------------
// Tilted kernel k(x, z) = p_x(z) e^r u_r(T_x omega, z)
// ---------------------------------------------------------------------------

struct TiltedKernel {
    double r = 0.0;
    int B = 1;
    /// Wrap period; 0 means a finite window [x_lo, x_hi].
    std::size_t period = 0;
    long long x_lo = 0, x_hi = 0;
    std::vector<double> k;  // [(x - x_lo) * 2B + slot(z)]
    double row_sum_defect = 0.0;
    double min_pm1 = 1.0;            // smallest k(x, +-1)
    double ellipticity_floor = 0.0;  // (delta e^r)^2

    bool has(long long x) const noexcept { return period != 0 || (x >= x_lo && x <= x_hi); }
    long long resolve(long long x) const {
        if (period == 0) {
            if (x < x_lo || x > x_hi) throw WindowExhausted(x, x_lo, x_hi);
            return x;
        }
        long long L = static_cast<long long>(period), m = x % L;
        return m < 0 ? m + L : m;
    }
    const double* row(long long x) const {
        return &k[static_cast<std::size_t>(resolve(x) - x_lo) * static_cast<std::size_t>(2 * B)];
    }
    double at(long long x, int z) const { return row(x)[JumpLaw::slot(B, z)]; }
    std::size_t sites() const noexcept { return k.size() / static_cast<std::size_t>(2 * B); }
};

/// Rows are not renormalized; their defect measures how well u converged.
inline TiltedKernel tilt_kernel(const Environment& env, double r, const ULimit& u,
                                double max_defect = 1e-6) {
    if (u.r != r) throw InvalidArgument("tilt_kernel: u was computed at a different r");
    const int B = env.B();
    TiltedKernel out;
    out.r = r;
    out.B = B;
    out.period = u.period;
    out.x_lo = u.x_lo;
    out.x_hi = u.x_hi;
    out.ellipticity_floor = std::pow(env.delta() * std::exp(r), 2);
    const double er = std::exp(r);
    for (long long x = u.x_lo; x <= u.x_hi; ++x) {
        const JumpLaw& law = env.law_at(x);
        double sum = 0.0;
        for (int z : JumpLaw::offsets(B)) {
            double v = law(z) * er * u.at(x, z);
            out.k.push_back(v);
            sum += v;
        }
        out.row_sum_defect = std::max(out.row_sum_defect, std::abs(sum - 1.0));
        out.min_pm1 = std::min({out.min_pm1, law(1) * er * u.at(x, 1), law(-1) * er * u.at(x, -1)});
    }
    if (out.row_sum_defect > max_defect)
        throw NotConverged("tilted kernel rows off by " + std::to_string(out.row_sum_defect) +
                               "; u is stale or under-converged",
                           out.row_sum_defect);
    return out;
}

/// Mean jump of the tilted chain in stationarity, from the projected chain.
inline double stationary_drift(const TiltedKernel& k);

// ---------------------------------------------------------------------------
// Invariant density
// ---------------------------------------------------------------------------

struct InvariantDensity {
    enum class Mode { periodic_exact, occupation };

    Mode mode = Mode::periodic_exact;
    std::size_t period = 0;
    long long x_lo = 0, x_hi = 0;
    /// Density w.r.t. the uniform (counting) measure, mean 1 over the stored sites.
    std::vector<double> phi;
    /// Mean expected visit count per site, 1/velocity; phi * occupation_mean is
    /// the occupation-scale density.
    double occupation_mean = 0.0;
    double residual = 0.0;
    double floor = 0.0;           // eps^B with eps = min k(x, +-1)
    double min_occupation = 0.0;  // min of phi * occupation_mean
    bool converged = true;
    long long x_start = 0;
    double last_change = 0.0;
    std::vector<double> previous;  // last two iterates on non-convergence

    bool floor_ok(double tol = 1e-9) const noexcept { return min_occupation >= floor - tol; }
    double at(long long x) const {
        if (period) {
            long long L = static_cast<long long>(period), m = x % L;
            return phi[static_cast<std::size_t>(m < 0 ? m + L : m)];
        }
        return phi.at(static_cast<std::size_t>(x - x_lo));
    }
};

namespace detail {

inline linalg::Matrix projected_chain(const TiltedKernel& k) {
    const std::size_t L = k.period;
    linalg::Matrix P(L, L, 0.0);
    for (std::size_t i = 0; i < L; ++i)
        for (int z : JumpLaw::offsets(k.B)) {
            long long j = (static_cast<long long>(i) + z) % static_cast<long long>(L);
            if (j < 0) j += static_cast<long long>(L);
            P(i, static_cast<std::size_t>(j)) += k.at(static_cast<long long>(i), z);
        }
    return P;
}

/// Expected visits to each site of [lo, hi] for the chain started at start and
/// killed on leaving [lo, hi]: the solution of (I - Q^T) g = e_start.
inline std::vector<double> occupation(const TiltedKernel& k, long long start, long long lo, long long hi) {
    const int B = k.B;
    const std::size_t n = static_cast<std::size_t>(hi - lo + 1);
    linalg::BandedMatrix A(n, static_cast<std::size_t>(B));
    for (std::size_t i = 0; i < n; ++i) A.at(i, i) = 1.0;
    for (long long w = lo; w <= hi; ++w)
        for (int z : JumpLaw::offsets(B)) {
            long long y = w + z;
            if (y < lo || y > hi) continue;
            A.at(static_cast<std::size_t>(y - lo), static_cast<std::size_t>(w - lo)) -= k.at(w, z);
        }
    A.factor();
    std::vector<double> e(n, 0.0);
    e[static_cast<std::size_t>(start - lo)] = 1.0;
    return A.solve(std::move(e));
}

inline double invariance_residual(const TiltedKernel& k, const InvariantDensity& d) {
    double worst = 0.0;
    const long long a = d.period ? 0 : d.x_lo + k.B;
    const long long b = d.period ? static_cast<long long>(d.period) - 1 : d.x_hi - k.B;
    for (long long x = a; x <= b; ++x) {
        double s = 0.0;
        for (int z : JumpLaw::offsets(k.B)) s += d.at(x - z) * k.at(x - z, z);
        worst = std::max(worst, std::abs(s - d.at(x)));
    }
    return worst;
}

} // namespace detail

inline double stationary_drift(const TiltedKernel& k) {
    if (k.period == 0) throw InvalidArgument("stationary_drift: needs a periodic kernel");
    std::vector<double> pi = linalg::stationary_gth(detail::projected_chain(k));
    double v = 0.0;
    for (std::size_t i = 0; i < k.period; ++i)
        for (int z : JumpLaw::offsets(k.B)) v += pi[i] * z * k.at(static_cast<long long>(i), z);
    return v;
}

struct DensityOptions {
    double tol = 1e-10;
    long long initial_depth = 16;
    long long max_depth = 1LL << 20;
};

/// periodic_exact: stationary law of the projected L-state chain, phi = L * pi.
/// occupation: expected visits from x_start, for x_start doubling to the left
/// until the per-site change is below tol. Windows only support occupation.
inline InvariantDensity invariant_density(const TiltedKernel& k, InvariantDensity::Mode mode,
                                          const DensityOptions& opt = {}) {
    InvariantDensity out;
    out.mode = mode;
    out.period = k.period;
    double eps = k.min_pm1;
    out.floor = std::pow(eps, k.B);

    if (mode == InvariantDensity::Mode::periodic_exact) {
        if (k.period == 0) throw InvalidArgument("periodic-exact density needs a periodic kernel");
        const std::size_t L = k.period;
        std::vector<double> pi = linalg::stationary_gth(detail::projected_chain(k));
        out.phi.resize(L);
        for (std::size_t i = 0; i < L; ++i) out.phi[i] = static_cast<double>(L) * pi[i];
        double v = stationary_drift(k);
        out.occupation_mean = v > 0.0 ? 1.0 / v : kInf;
        out.min_occupation = *std::min_element(out.phi.begin(), out.phi.end()) * out.occupation_mean;
        out.x_hi = static_cast<long long>(L) - 1;
        out.residual = detail::invariance_residual(k, out);
        return out;
    }

    // Target sites: one period, or the central half of a window.
    long long a = 0, b = 0;
    if (k.period) {
        b = static_cast<long long>(k.period) - 1;
    } else {
        long long span = k.x_hi - k.x_lo;
        a = k.x_lo + span / 4;
        b = k.x_hi - span / 4;
    }
    out.x_lo = a;
    out.x_hi = b;
    const std::size_t count = static_cast<std::size_t>(b - a + 1);
    std::vector<double> prev;
    out.converged = false;
    for (long long D = opt.initial_depth; D <= opt.max_depth; D *= 2) {
        long long start = a - D, lo = a - 2 * D, hi = b + D;
        if (!k.has(lo) || !k.has(hi)) break;
        std::vector<double> g = detail::occupation(k, start, lo, hi);
        std::vector<double> cur(g.begin() + (a - lo), g.begin() + (a - lo) + static_cast<long long>(count));
        out.x_start = start;
        if (!prev.empty()) {
            double change = 0.0;
            for (std::size_t i = 0; i < count; ++i) change = std::max(change, std::abs(cur[i] - prev[i]));
            out.last_change = change;
            if (change <= opt.tol * std::max(1.0, *std::max_element(cur.begin(), cur.end()))) {
                out.converged = true;
                prev = std::move(cur);
                break;
            }
        }
        prev = std::move(cur);
    }
    if (prev.empty()) throw NotConverged("occupation density: kernel range too short", kInf);
    double mean = 0.0;
    for (double v : prev) mean += v;
    mean /= static_cast<double>(count);
    out.occupation_mean = mean;
    out.min_occupation = *std::min_element(prev.begin(), prev.end());
    out.phi.resize(count);
    for (std::size_t i = 0; i < count; ++i) out.phi[i] = prev[i] / mean;
    if (!out.converged) out.previous = prev;
    // Periodic targets wrap; windows keep their own coordinates.
    if (k.period) out.x_lo = 0;
    out.residual = detail::invariance_residual(k, out);
    return out;
}

// ---------------------------------------------------------------------------
// Corrector F(x, z) = log u(x, z) + z lambda
// ---------------------------------------------------------------------------

struct Corrector {
    double r = 0.0, lambda = 0.0;
    int B = 1;
    std::size_t period = 0;
    long long x_lo = 0, x_hi = 0;
    std::vector<double> F;  // [(x - x_lo) * 2B + slot(z)]
    /// Potential with F(x, z) = H(x + z) - H(x); H(x_lo) = 0. Periodic: one period.
    std::vector<double> H;

    double moment_bound = 0.0;   // B (-log(delta e^r) + |lambda|)
    double max_abs = 0.0;
    double antisymmetry_defect = 0.0;
    double mean_defect = 0.0;    // max_z |period average of F(., z)|
    double loop_defect = 0.0;    // |sum of F(i, 1) over one period|
    double telescoping_defect = 0.0;

    long long resolve(long long x) const {
        if (period == 0) {
            if (x < x_lo || x > x_hi) throw InvalidArgument("Corrector: site outside stored range");
            return x;
        }
        long long L = static_cast<long long>(period), m = x % L;
        return m < 0 ? m + L : m;
    }
    double at(long long x, int z) const {
        return F[static_cast<std::size_t>(resolve(x) - x_lo) * static_cast<std::size_t>(2 * B) + JumpLaw::slot(B, z)];
    }
    double potential(long long x) const {
        if (period) return H[static_cast<std::size_t>(resolve(x))];
        return H.at(static_cast<std::size_t>(x - x_lo));
    }
    double oscillation() const {
        auto [mn, mx] = std::minmax_element(H.begin(), H.end());
        return *mx - *mn;
    }
};

struct CorrectorTolerances {
    double moment = 1e-10;
    double antisymmetry = 1e-10;
    double mean = 1e-8;
    double loop = 1e-10;
};

/// Builds F and checks the class-K surrogates (moment bound, mean zero over a
/// period, closed loops). Throws Inconsistency naming the first failing site.
inline Corrector corrector(const Environment& env, double r, const ULimit& u, double lambda_val,
                           const CorrectorTolerances& tol = {}) {
    if (u.r != r) throw InvalidArgument("corrector: u was computed at a different r");
    const int B = env.B();
    Corrector c;
    c.r = r;
    c.lambda = lambda_val;
    c.B = B;
    c.period = u.period;
    c.x_lo = u.x_lo;
    c.x_hi = u.x_hi;
    c.moment_bound = B * (-std::log(env.delta() * std::exp(r)) + std::abs(lambda_val));
    for (long long x = u.x_lo; x <= u.x_hi; ++x)
        for (int z : JumpLaw::offsets(B)) c.F.push_back(u.log_at(x, z) + z * lambda_val);

    auto fail = [](const std::string& what, long long x) {
        throw Inconsistency("corrector: " + what + " at site " + std::to_string(x));
    };
    const bool periodic = c.period != 0;
    for (long long x = c.x_lo; x <= c.x_hi; ++x)
        for (int z : JumpLaw::offsets(B)) {
            double f = c.at(x, z);
            c.max_abs = std::max(c.max_abs, std::abs(f));
            if (std::abs(f) > c.moment_bound + tol.moment) fail("moment bound violated", x);
            if (!periodic && (x + z < c.x_lo || x + z > c.x_hi)) continue;
            double d = std::abs(f + c.at(x + z, -z));
            c.antisymmetry_defect = std::max(c.antisymmetry_defect, d);
            if (d > tol.antisymmetry) fail("antisymmetry F(x,z) = -F(x+z,-z) violated", x);
        }

    // Potential along +1 steps.
    const long long span = c.x_hi - c.x_lo + 1;
    c.H.assign(static_cast<std::size_t>(span), 0.0);
    for (long long i = 1; i < span; ++i)
        c.H[static_cast<std::size_t>(i)] = c.H[static_cast<std::size_t>(i - 1)] + c.at(c.x_lo + i - 1, 1);
    if (periodic) {
        c.loop_defect = std::abs(c.H.back() + c.at(c.x_hi, 1));
        if (c.loop_defect > tol.loop) fail("loop sum over one period is nonzero", c.x_lo);
        for (int z : JumpLaw::offsets(B)) {
            double s = 0.0;
            for (long long x = c.x_lo; x <= c.x_hi; ++x) s += c.at(x, z);
            c.mean_defect = std::max(c.mean_defect, std::abs(s / static_cast<double>(span)));
        }
        if (c.mean_defect > tol.mean) fail("period average of F is nonzero", c.x_lo);
    }
    for (long long x = c.x_lo; x <= c.x_hi; ++x)
        for (int z : JumpLaw::offsets(B)) {
            if (!periodic && (x + z < c.x_lo || x + z > c.x_hi)) continue;
            double d = std::abs(c.at(x, z) - (c.potential(x + z) - c.potential(x)));
            c.telescoping_defect = std::max(c.telescoping_defect, d);
        }
    if (c.telescoping_defect > 1e-8) fail("F does not telescope through its potential", c.x_lo);
    return c;
}

// ---------------------------------------------------------------------------
// Ansatz measure mu(i, z) = phi(i) k(i, z) / Z and lambda'
// ---------------------------------------------------------------------------

struct AnsatzMeasure {
    double r = 0.0;
    double lambda = 0.0;
    double xi = 0.0;
    PairMeasure mu;
    double row_sum_defect = 0.0;
    double invariance_residual = 0.0;
    double stationarity_residual = 0.0;
    double ellipticity_floor = 0.0;
    double min_pm1 = 0.0;
};

struct TiltBundle {
    ULimit u;
    LambdaValue lambda;
    TiltedKernel kernel;
    InvariantDensity density;
};

/// u, lambda, kernel and exact density on one period at r.
inline TiltBundle tilt_bundle(const Environment& env, double r, const ULimitOptions& opt = {}) {
    class_count(env);
    TiltBundle t;
    t.u = u_limit(env, r, opt);
    if (!t.u.converged) throw NotConverged("u_limit did not converge at r=" + std::to_string(r), t.u.cauchy_gap);
    t.lambda = lambda_from(t.u);
    t.kernel = tilt_kernel(env, r, t.u);
    t.density = invariant_density(t.kernel, InvariantDensity::Mode::periodic_exact);
    return t;
}

inline AnsatzMeasure ansatz_measure(const TiltBundle& t) {
    const TiltedKernel& k = t.kernel;
    AnsatzMeasure a;
    a.r = k.r;
    a.lambda = t.lambda.value;
    a.mu = PairMeasure(k.period, k.B);
    double Z = 0.0;
    for (std::size_t i = 0; i < k.period; ++i)
        for (int z : JumpLaw::offsets(k.B)) {
            double v = t.density.phi[i] * k.at(static_cast<long long>(i), z);
            a.mu.at(i, z) = v;
            Z += v;
        }
    for (double& v : a.mu.w) v /= Z;
    a.xi = a.mu.drift();
    a.row_sum_defect = k.row_sum_defect;
    a.invariance_residual = t.density.residual;
    a.stationarity_residual = marginals(a.mu).stationarity_residual;
    a.ellipticity_floor = k.ellipticity_floor;
    a.min_pm1 = k.min_pm1;
    return a;
}

inline AnsatzMeasure ansatz_measure(const Environment& env, double r, const ULimitOptions& opt = {}) {
    return ansatz_measure(tilt_bundle(env, r, opt));
}

struct LambdaPrime {
    double r = 0.0;
    double h = 0.0;
    double finite_difference = 0.0;
    /// 1 / drift of the tilted stationary chain; NaN for windows.
    double stationary_chain = std::numeric_limits<double>::quiet_NaN();
    double gap = 0.0;  // relative
    double value = 0.0;
};

/// Stationary-chain lambda' = 1 / xi(r), periodic and homogeneous environments.
inline double lambda_prime_stationary(const Environment& env, double r, const ULimitOptions& opt = {}) {
    TiltBundle t = tilt_bundle(env, r, opt);
    return 1.0 / stationary_drift(t.kernel);
}

/// Richardson-extrapolated central difference of lambda.
inline double lambda_prime_fd(const Environment& env, double r, double h, const ULimitOptions& opt = {}) {
    auto lam = [&](double s) {
        LambdaValue v = lambda(env, s, opt);
        if (!v.finite) throw Supercritical("lambda_prime: r + h is above r_c", s);
        return v.value;
    };
    double d1 = (lam(r + h) - lam(r - h)) / (2.0 * h);
    double d2 = (lam(r + 0.5 * h) - lam(r - 0.5 * h)) / h;
    return (4.0 * d2 - d1) / 3.0;
}

/// Both routes to lambda'(r). The reported value is the stationary-chain one
/// when it exists; a relative gap above gate throws Inconsistency.
inline LambdaPrime lambda_prime(const Environment& env, double r, double h = 1e-3, double gate = 1e-6,
                                const ULimitOptions& opt = {}) {
    LambdaPrime out;
    out.r = r;
    out.h = h;
    out.finite_difference = lambda_prime_fd(env, r, h, opt);
    out.value = out.finite_difference;
    if (env.is_finite_class()) {
        out.stationary_chain = lambda_prime_stationary(env, r, opt);
        out.value = out.stationary_chain;
        out.gap = std::abs(out.finite_difference - out.stationary_chain) / std::abs(out.stationary_chain);
        if (out.gap > gate)
            throw Inconsistency("lambda' methods disagree at r=" + std::to_string(r) + ": finite difference " +
                                std::to_string(out.finite_difference) + " vs stationary chain " +
                                std::to_string(out.stationary_chain));
    }
    return out;
}

} // namespace rwre
