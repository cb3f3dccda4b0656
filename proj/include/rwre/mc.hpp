#pragma once

#include "rwre/environment.hpp"
#include "rwre/error.hpp"
#include "rwre/parallel.hpp"
#include "rwre/passage.hpp"
#include "rwre/rng.hpp"
#include "rwre/tilt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace rwre {

// ---------------------------------------------------------------------------
// Step sampling
// ---------------------------------------------------------------------------

/// Per-site cumulative jump tables, from an environment or a tilted kernel.
class StepSampler {
public:
    static StepSampler from(const Environment& env) {
        StepSampler s;
        s.B_ = env.B();
        s.tag_ = "original";
        if (env.is_finite_class()) {
            s.period_ = env.period();
            s.x_hi_ = static_cast<long long>(s.period_) - 1;
        } else {
            s.x_lo_ = env.x_lo();
            s.x_hi_ = env.x_hi();
        }
        for (long long x = s.x_lo_; x <= s.x_hi_; ++x) s.push_row(env.law_at(x).probs());
        return s;
    }

    static StepSampler from(const TiltedKernel& k) {
        StepSampler s;
        s.B_ = k.B;
        s.tag_ = "tilted";
        s.period_ = k.period;
        s.x_lo_ = k.x_lo;
        s.x_hi_ = k.x_hi;
        const std::size_t w = static_cast<std::size_t>(2 * k.B);
        for (long long x = k.x_lo; x <= k.x_hi; ++x) s.push_row(std::span<const double>(k.row(x), w));
        return s;
    }

    int B() const noexcept { return B_; }
    const std::string& tag() const noexcept { return tag_; }
    bool has(long long x) const noexcept { return period_ != 0 || (x >= x_lo_ && x <= x_hi_); }

    /// Inverse-CDF draw of the jump from x for a uniform u in [0, 1).
    int draw(long long x, double u) const {
        const double* c = &cdf_[row_index(x) * static_cast<std::size_t>(2 * B_)];
        const double t = u * c[2 * B_ - 1];
        int k = 0;
        while (k < 2 * B_ - 1 && !(t < c[k])) ++k;
        return JumpLaw::offset_at(B_, static_cast<std::size_t>(k));
    }

private:
    void push_row(std::span<const double> p) {
        double s = 0.0;
        for (double v : p) cdf_.push_back(s += v);
    }
    std::size_t row_index(long long x) const {
        if (period_ == 0) return static_cast<std::size_t>(x - x_lo_);
        long long L = static_cast<long long>(period_), m = x % L;
        return static_cast<std::size_t>(m < 0 ? m + L : m);
    }

    int B_ = 1;
    std::string tag_;
    std::size_t period_ = 0;
    long long x_lo_ = 0, x_hi_ = 0;
    std::vector<double> cdf_;
};

struct WalkPath {
    std::vector<long long> sites;
    std::string kernel_tag;
    std::uint64_t seed = 0, stream = 0;
    /// The walk left the sampled window before completing all steps.
    bool truncated = false;
};

inline WalkPath simulate(const StepSampler& s, long long start, long long steps, std::uint64_t seed,
                         std::uint64_t stream = 0) {
    WalkPath p;
    p.kernel_tag = s.tag();
    p.seed = seed;
    p.stream = stream;
    p.sites.reserve(static_cast<std::size_t>(steps) + 1);
    p.sites.push_back(start);
    CounterRng rng(seed, stream);
    long long x = start;
    for (long long k = 0; k < steps; ++k) {
        if (!s.has(x)) {
            p.truncated = true;
            break;
        }
        x += s.draw(x, rng.uniform());
        p.sites.push_back(x);
    }
    return p;
}

inline WalkPath simulate(const Environment& env, long long start, long long steps, std::uint64_t seed,
                         std::uint64_t stream = 0) {
    return simulate(StepSampler::from(env), start, steps, seed, stream);
}

inline WalkPath simulate(const TiltedKernel& k, long long start, long long steps, std::uint64_t seed,
                         std::uint64_t stream = 0) {
    return simulate(StepSampler::from(k), start, steps, seed, stream);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct McReport {
    enum class Kind { two_sided, upper_bound };

    std::string check;
    Kind kind = Kind::two_sided;
    double estimate = 0.0;
    double std_error = 0.0;
    long long replicas = 0;
    double target = 0.0;
    double z_score = 0.0;
    double gate = 3.0;
    bool pass = false;
    long long failures = 0;     // censored or truncated replicas
    bool invalidated = false;   // failures above 1% of replicas
    bool hard_violation = false;
    /// Power of the gate against an estimate twice the target (or bound).
    double power_2x = 0.0;
    std::map<std::string, double> extra;

    void finalize() {
        z_score = std_error > 0.0 ? (estimate - target) / std_error
                                  : (estimate == target ? 0.0 : std::copysign(kInf, estimate - target));
        pass = kind == Kind::two_sided ? std::abs(z_score) <= gate : z_score <= gate;
        invalidated = failures * 100 > replicas;
        if (invalidated || hard_violation) pass = false;
        if (std_error > 0.0) {
            double shift = std::abs(target) / std_error;
            power_2x = 0.5 * std::erfc(-(shift - gate) / std::numbers::sqrt2);
        } else {
            power_2x = target != 0.0 ? 1.0 : 0.0;  // zero variance sees any shift
        }
    }
};

namespace detail {

struct Moments {
    double mean = 0.0, se = 0.0;
};

/// Mean and standard error over the successful replicas, summed in index order.
inline Moments moments(const std::vector<double>& v, const std::vector<char>& ok) {
    double s = 0.0, q = 0.0;
    long long n = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (ok[i]) {
            s += v[i];
            ++n;
        }
    Moments m;
    if (n == 0) return m;
    m.mean = s / static_cast<double>(n);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (ok[i]) q += (v[i] - m.mean) * (v[i] - m.mean);
    if (n > 1) m.se = std::sqrt(q / static_cast<double>(n - 1) / static_cast<double>(n));
    return m;
}

/// Kernel of env at r on one period (or the central half of a window).
inline TiltedKernel kernel_at(const Environment& env, double r, const ULimitOptions& opt = {}) {
    ULimit u = u_limit(env, r, opt);
    if (!u.converged) throw NotConverged("u_limit did not converge", u.cauchy_gap);
    return tilt_kernel(env, r, u);
}

/// First passage time to [level, inf) from 0, or -1 when the step cap or the
/// window is exhausted.
inline long long passage_time(const StepSampler& s, long long level, long long cap, std::uint64_t seed,
                              std::uint64_t stream) {
    CounterRng rng(seed, stream);
    long long x = 0;
    for (long long k = 1; k <= cap; ++k) {
        if (!s.has(x)) return -1;
        x += s.draw(x, rng.uniform());
        if (x >= level) return k;
    }
    return -1;
}

} // namespace detail

struct McOptions {
    double gate = 3.0;
    unsigned threads = 1;
    ULimitOptions u;
};

/// tau_n / n under the tilted kernel against lambda'(r).
inline McReport passage_lln_check(const Environment& env, double r, long long n, long long replicas,
                                  std::uint64_t seed, const McOptions& opt = {}) {
    TiltedKernel k = detail::kernel_at(env, r, opt.u);
    StepSampler s = StepSampler::from(k);
    LambdaPrime lp = lambda_prime(env, r, 1e-3, 1e-6, opt.u);
    const long long cap = static_cast<long long>(std::ceil(50.0 * static_cast<double>(n) * lp.value));
    std::vector<double> v(static_cast<std::size_t>(replicas));
    std::vector<char> ok(v.size());
    parallel_for(v.size(), opt.threads, [&](std::size_t i) {
        long long t = detail::passage_time(s, n, cap, seed, i);
        ok[i] = t > 0;
        v[i] = t > 0 ? static_cast<double>(t) / static_cast<double>(n) : 0.0;
    });
    McReport rep;
    rep.check = "passage_lln";
    rep.gate = opt.gate;
    rep.replicas = replicas;
    rep.target = lp.value;
    rep.failures = static_cast<long long>(std::count(ok.begin(), ok.end(), 0));
    auto m = detail::moments(v, ok);
    rep.estimate = m.mean;
    rep.std_error = m.se;
    rep.extra = {{"r", r}, {"n", static_cast<double>(n)}, {"step_cap", static_cast<double>(cap)},
                 {"lambda_prime_fd", lp.finite_difference}, {"lambda_prime_gap", lp.gap}};
    rep.finalize();
    return rep;
}

/// X_N / N under the tilted kernel against 1 / lambda'(r).
inline McReport empirical_velocity_check(const Environment& env, double r, long long steps, long long replicas,
                                         std::uint64_t seed, const McOptions& opt = {}) {
    TiltedKernel k = detail::kernel_at(env, r, opt.u);
    StepSampler s = StepSampler::from(k);
    LambdaPrime lp = lambda_prime(env, r, 1e-3, 1e-6, opt.u);
    std::vector<double> v(static_cast<std::size_t>(replicas));
    std::vector<char> ok(v.size());
    parallel_for(v.size(), opt.threads, [&](std::size_t i) {
        WalkPath p = simulate(s, 0, steps, seed, i);
        ok[i] = !p.truncated;
        v[i] = static_cast<double>(p.sites.back()) / static_cast<double>(steps);
    });
    McReport rep;
    rep.check = "empirical_velocity";
    rep.gate = opt.gate;
    rep.replicas = replicas;
    rep.target = 1.0 / lp.value;
    rep.failures = static_cast<long long>(std::count(ok.begin(), ok.end(), 0));
    auto m = detail::moments(v, ok);
    rep.estimate = m.mean;
    rep.std_error = m.se;
    rep.extra = {{"r", r}, {"steps", static_cast<double>(steps)}};
    rep.finalize();
    return rep;
}

/// One-sided check E[tau_1^m] <= m! / (r_c - r)^m (delta e^r)^{-2B} under the tilt.
/// r_c is taken at the lower edge of its bracket, which only loosens the bound.
inline McReport moment_bound_check(const Environment& env, double r, int m, long long replicas,
                                   std::uint64_t seed, const McOptions& opt = {},
                                   const RcOptions& rc_opt = {}) {
    if (m < 1) throw InvalidArgument("moment_bound_check: m must be >= 1");
    RcEstimate rc = estimate_rc(env, rc_opt);
    if (!(r < rc.lo)) throw InvalidArgument("moment_bound_check: r must lie below the r_c bracket");
    TiltedKernel k = detail::kernel_at(env, r, opt.u);
    StepSampler s = StepSampler::from(k);
    double fact = std::tgamma(m + 1.0);
    double bound = fact / std::pow(rc.lo - r, m) * std::pow(env.delta() * std::exp(r), -2.0 * env.B());
    // tau_1 has exponential tails under the tilt; a generous cap only censors
    // paths far beyond the bound.
    const long long cap = static_cast<long long>(std::min(1e9, 50.0 * std::pow(bound, 1.0 / m) + 1000.0));
    std::vector<double> v(static_cast<std::size_t>(replicas));
    std::vector<char> ok(v.size());
    parallel_for(v.size(), opt.threads, [&](std::size_t i) {
        long long t = detail::passage_time(s, 1, cap, seed, i);
        ok[i] = t > 0;
        v[i] = t > 0 ? std::pow(static_cast<double>(t), m) : 0.0;
    });
    McReport rep;
    rep.check = "moment_bound_m" + std::to_string(m);
    rep.kind = McReport::Kind::upper_bound;
    rep.gate = opt.gate;
    rep.replicas = replicas;
    rep.target = bound;
    rep.failures = static_cast<long long>(std::count(ok.begin(), ok.end(), 0));
    auto mm = detail::moments(v, ok);
    rep.estimate = mm.mean;
    rep.std_error = mm.se;
    rep.extra = {{"r", r}, {"m", static_cast<double>(m)}, {"r_c_lo", rc.lo}, {"step_cap", static_cast<double>(cap)}};
    rep.finalize();
    return rep;
}

/// S_n = sum_{k<n} F(X_k, X_{k+1} - X_k) along untilted and tilted paths.
/// Hard invariant: S_n = H(X_n) - H(X_0), so |S_n| <= osc(H). The statistical
/// part bounds |S_N| / N by eps_gate.
inline McReport corrector_sublinearity_check(const Environment& env, double r, long long steps,
                                             long long replicas, std::uint64_t seed, double eps_gate = 1e-3,
                                             const McOptions& opt = {}) {
    class_count(env);
    TiltBundle t = tilt_bundle(env, r, opt.u);
    Corrector F = corrector(env, r, t.u, t.lambda.value);
    const double osc = F.oscillation();
    StepSampler kernels[2] = {StepSampler::from(env), StepSampler::from(t.kernel)};

    const std::size_t R = static_cast<std::size_t>(replicas);
    std::vector<double> v(2 * R), worst_tel(2 * R), worst_abs(2 * R);
    std::vector<char> ok(2 * R, 1);
    parallel_for(2 * R, opt.threads, [&](std::size_t i) {
        const StepSampler& s = kernels[i % 2];
        CounterRng rng(seed, i);
        long long x = 0;
        double S = 0.0, tel = 0.0, mx = 0.0;
        for (long long k = 1; k <= steps; ++k) {
            int z = s.draw(x, rng.uniform());
            S += F.at(x, z);
            x += z;
            double exact = F.potential(x) - F.potential(0);
            tel = std::max(tel, std::abs(S - exact));
            mx = std::max(mx, std::abs(S));
        }
        v[i] = std::abs(S) / static_cast<double>(steps);
        worst_tel[i] = tel;
        worst_abs[i] = mx;
    });
    McReport rep;
    rep.check = "corrector_sublinearity";
    rep.kind = McReport::Kind::upper_bound;
    rep.gate = opt.gate;
    rep.replicas = 2 * replicas;
    rep.target = eps_gate;
    auto m = detail::moments(v, ok);
    rep.estimate = m.mean;
    rep.std_error = m.se;
    double tel = *std::max_element(worst_tel.begin(), worst_tel.end());
    double mabs = *std::max_element(worst_abs.begin(), worst_abs.end());
    const double slack = 1e-9 + 1e-13 * static_cast<double>(steps);
    rep.hard_violation = tel > slack || mabs > osc + slack;
    rep.extra = {{"r", r},
                 {"steps", static_cast<double>(steps)},
                 {"oscillation", osc},
                 {"max_abs_S", mabs},
                 {"telescoping_defect", tel},
                 {"max_abs_F", F.max_abs}};
    rep.finalize();
    return rep;
}

} // namespace rwre
