#pragma once

#include "rwre/environment.hpp"
#include "rwre/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace rwre {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Geometric rate c(r) = (1 - (delta e^r)^{2B})^{1/B} of the Cauchy estimate
/// for u_{r,n} as n grows.
inline double contraction_rate(double delta, double r, int B) {
    double de = delta * std::exp(r);
    return std::pow(1.0 - std::pow(de, 2.0 * B), 1.0 / B);
}

// ---------------------------------------------------------------------------
// Passage-time MGF by value iteration
// ---------------------------------------------------------------------------

struct MgfOptions {
    double tol = 1e-13;
    long long max_iter = 5'000'000;
    double value_cap = 1e30;
    int growth_window = 50;
};

struct MgfSolve {
    enum class Status { converged, supercritical_or_diverged, slow_convergence };

    double r = 0.0;
    long long n = 0;
    long long M = 0;
    /// h(x) = E_x[e^{r tau_n}; tau_n < inf, walk stays >= -M] for x in [-M, n + B).
    std::vector<double> h;
    long long iterations = 0;
    Status status = Status::slow_convergence;
    double sup_update = kInf;

    bool converged() const noexcept { return status == Status::converged; }
    long long first_site() const noexcept { return -M; }
    double at(long long x) const {
        if (x < -M) return 0.0;
        return h.at(static_cast<std::size_t>(x + M));
    }
};

inline const char* to_string(MgfSolve::Status s) {
    switch (s) {
    case MgfSolve::Status::converged: return "converged";
    case MgfSolve::Status::supercritical_or_diverged: return "supercritical-or-diverged";
    case MgfSolve::Status::slow_convergence: return "slow-convergence";
    }
    return "?";
}

/// Monotone value iteration (Th)(x) = sum_z p_x(z) e^r h(x+z) on [-M, n), with
/// h = 1 on [n, n+B) and h = 0 below -M, started from the indicator of [n, n+B).
inline MgfSolve hit_mgf(const Environment& env, double r, long long n, long long M,
                        const MgfOptions& opt = {}) {
    const int B = env.B();
    if (n < 1) throw InvalidArgument("hit_mgf: n must be >= 1");
    if (M < B) throw InvalidArgument("hit_mgf: truncation depth M must be >= B");

    MgfSolve out;
    out.r = r;
    out.n = n;
    out.M = M;
    const std::size_t len = static_cast<std::size_t>(n + M + B);
    const std::size_t interior = static_cast<std::size_t>(n + M);

    // Pre-scaled kernel rows a(x, z) = p_x(z) e^r.
    const double er = std::exp(r);
    std::vector<double> a(interior * static_cast<std::size_t>(2 * B));
    for (std::size_t i = 0; i < interior; ++i) {
        const JumpLaw& law = env.law_at(static_cast<long long>(i) - M);
        for (std::size_t k = 0; k < static_cast<std::size_t>(2 * B); ++k)
            a[i * 2 * B + k] = law.probs()[k] * er;
    }

    std::vector<double> h(len, 0.0), next(len, 0.0);
    for (std::size_t i = interior; i < len; ++i) h[i] = next[i] = 1.0;

    double prev_update = kInf;
    int growth_run = 0;
    const long long transient = n + M + B;
    for (long long it = 1; it <= opt.max_iter; ++it) {
        double sup = 0.0, rel = 0.0, hmax = 0.0;
        for (std::size_t i = 0; i < interior; ++i) {
            double s = 0.0;
            const double* row = &a[i * 2 * B];
            for (int k = 0; k < 2 * B; ++k) {
                long long j = static_cast<long long>(i) + JumpLaw::offset_at(B, static_cast<std::size_t>(k));
                if (j >= 0) s += row[k] * h[static_cast<std::size_t>(j)];
            }
            next[i] = s;
            sup = std::max(sup, s - h[i]);
            if (s > 0.0) rel = std::max(rel, (s - h[i]) / s);
            hmax = std::max(hmax, s);
        }
        std::swap(h, next);
        out.iterations = it;
        out.sup_update = rel;
        if (!(hmax <= opt.value_cap)) {
            out.status = MgfSolve::Status::supercritical_or_diverged;
            break;
        }
        growth_run = (it > transient && sup > prev_update) ? growth_run + 1 : 0;
        prev_update = sup;
        if (growth_run >= opt.growth_window) {
            out.status = MgfSolve::Status::supercritical_or_diverged;
            break;
        }
        // relative per site, and only once every site has been reached
        if (it > transient / B && rel <= opt.tol) {
            out.status = MgfSolve::Status::converged;
            break;
        }
    }
    out.h = std::move(h);
    return out;
}

// ---------------------------------------------------------------------------
// Direct solve of the truncated passage problem in scaled arithmetic
// ---------------------------------------------------------------------------

/// Positive values stored as mantissa * 2^exponent so that long products of
/// (delta e^r)-sized factors never underflow.
struct ScaledValues {
    long long first = 0;
    std::vector<double> mant;
    std::vector<long long> exp2;

    double log_at(long long x) const {
        auto i = static_cast<std::size_t>(x - first);
        return std::log(mant.at(i)) + static_cast<double>(exp2[i]) * std::numbers::ln2;
    }
    /// log h(y) - log h(x) without forming either logarithm's large offset.
    double log_ratio(long long y, long long x) const {
        auto iy = static_cast<std::size_t>(y - first), ix = static_cast<std::size_t>(x - first);
        return std::log(mant.at(iy) / mant.at(ix)) +
               static_cast<double>(exp2[iy] - exp2[ix]) * std::numbers::ln2;
    }
};

namespace detail {

/// Gaussian elimination of the banded system
///   h(s) = sum_z p_s(z) e^r h(s+z),  s in [lo, n),  h = 1 on [n, n+B), h = 0 below lo,
/// eliminating left to right. All elimination coefficients are nonnegative,
/// and a nonpositive pivot certifies that the truncated operator has spectral
/// radius >= 1. Coefficients for s >= store_from are appended to coef as
/// (c_1..c_B, d) with h(s) = sum_j c_j h(s+j) + d.
template <class LawAt>
bool eliminate(int B, double er, long long lo, long long n, LawAt&& law_at, long long store_from,
               std::vector<double>* coef) {
    const std::size_t W = static_cast<std::size_t>(B) + 1;
    // rep[k-1] expresses h(s-k) in h(s..s+B-1) plus a constant in slot B.
    std::vector<double> rep(static_cast<std::size_t>(B) * W, 0.0), next(rep.size());
    std::vector<double> alpha(W, 0.0);
    if (coef) coef->clear();
    for (long long s = lo; s < n; ++s) {
        const JumpLaw& law = law_at(s);
        std::fill(alpha.begin(), alpha.end(), 0.0);
        double beta = 0.0;
        for (int z = -B; z <= -1; ++z) {
            double a = law(z) * er;
            if (a == 0.0) continue;
            const double* row = &rep[static_cast<std::size_t>(-z - 1) * W];
            for (int j = 0; j < B; ++j) alpha[static_cast<std::size_t>(j)] += a * row[j];
            beta += a * row[B];
        }
        for (int z = 1; z <= B; ++z) alpha[static_cast<std::size_t>(z)] += law(z) * er;
        for (int j = 1; j <= B; ++j) {
            if (s + j >= n) {
                beta += alpha[static_cast<std::size_t>(j)];
                alpha[static_cast<std::size_t>(j)] = 0.0;
            }
        }
        const double pivot = 1.0 - alpha[0];
        if (!(pivot > 0.0) || !std::isfinite(pivot)) return false;
        for (int j = 1; j <= B; ++j) alpha[static_cast<std::size_t>(j)] /= pivot;
        const double d = beta / pivot;
        if (coef && s >= store_from) {
            for (int j = 1; j <= B; ++j) coef->push_back(alpha[static_cast<std::size_t>(j)]);
            coef->push_back(d);
        }
        // Shift the frontier to s+1.
        for (int j = 1; j <= B; ++j) next[static_cast<std::size_t>(j - 1)] = alpha[static_cast<std::size_t>(j)];
        next[static_cast<std::size_t>(B)] = d;
        for (int k = 2; k <= B; ++k) {
            const double* old = &rep[static_cast<std::size_t>(k - 2) * W];
            double* out = &next[static_cast<std::size_t>(k - 1) * W];
            for (int j = 1; j <= B; ++j)
                out[j - 1] = old[0] * alpha[static_cast<std::size_t>(j)] + (j <= B - 1 ? old[j] : 0.0);
            out[B] = old[B] + old[0] * d;
        }
        std::swap(rep, next);
    }
    return true;
}

} // namespace detail

/// Exact minimal solution of the truncated problem on [-M, n) by banded
/// elimination; h is returned in scaled form on [store_from, n + B).
/// Throws Supercritical when the truncated operator is not subcritical.
inline ScaledValues hit_mgf_direct(const Environment& env, double r, long long n, long long M,
                                   std::optional<long long> store_from = std::nullopt) {
    const int B = env.B();
    const long long lo = -M;
    const long long from = std::max(lo, store_from.value_or(lo));
    if (from >= n) throw InvalidArgument("hit_mgf_direct: store_from must be < n");
    std::vector<double> coef;
    auto law = [&env](long long s) -> const JumpLaw& { return env.law_at(s); };
    if (!detail::eliminate(B, std::exp(r), lo, n, law, from, &coef))
        throw Supercritical("passage MGF diverges (nonpositive pivot) at r=" + std::to_string(r), r);

    ScaledValues out;
    out.first = from;
    const std::size_t len = static_cast<std::size_t>(n + B - from);
    out.mant.assign(len, 1.0);
    out.exp2.assign(len, 0);
    for (long long s = n - 1; s >= from; --s) {
        const std::size_t i = static_cast<std::size_t>(s - from);
        const double* c = &coef[i * static_cast<std::size_t>(B + 1)];
        const long long ref = out.exp2[i + 1];
        double v = std::ldexp(c[B], static_cast<int>(std::clamp<long long>(-ref, -2000, 2000)));
        for (int j = 1; j <= B; ++j) {
            if (c[j - 1] == 0.0) continue;
            const std::size_t k = i + static_cast<std::size_t>(j);
            v += c[j - 1] * std::ldexp(out.mant[k], static_cast<int>(out.exp2[k] - ref));
        }
        int e = 0;
        out.mant[i] = std::frexp(v, &e);
        out.exp2[i] = ref + e;
    }
    return out;
}

/// True when the passage problem truncated to [lo, hi) is subcritical at r.
inline bool subcritical_on(const Environment& env, double r, long long lo, long long hi) {
    auto law = [&env](long long s) -> const JumpLaw& { return env.law_at(s); };
    return detail::eliminate(env.B(), std::exp(r), lo, hi, law, hi, nullptr);
}

// ---------------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------------

struct BruteMgf {
    double value = 0.0;
    double tail_bound = 0.0;
    int max_len = 0;
};

/// Sums e^{r len} * P(path) over every path from 0 that first reaches [n, inf)
/// at step len <= max_len. Paths are aggregated by current site, which is an
/// exact regrouping of the path sum. The discarded mass is at most
/// e^{r max_len} / (1 - e^r).
inline BruteMgf brute_mgf(const Environment& env, double r, long long n, int max_len) {
    if (!(r < 0.0)) throw InvalidArgument("brute_mgf: r must be < 0 for the tail bound");
    if (n < 1 || max_len < 1) throw InvalidArgument("brute_mgf: n, max_len must be >= 1");
    const int B = env.B();
    const long long lo = -static_cast<long long>(max_len) * B;
    const std::size_t width = static_cast<std::size_t>(n - lo);
    std::vector<double> mass(width, 0.0), next(width, 0.0);
    mass[static_cast<std::size_t>(-lo)] = 1.0;
    BruteMgf out;
    out.max_len = max_len;
    double weight = 1.0;
    for (int step = 1; step <= max_len; ++step) {
        weight *= std::exp(r);
        std::fill(next.begin(), next.end(), 0.0);
        double hit = 0.0;
        for (std::size_t i = 0; i < width; ++i) {
            if (mass[i] == 0.0) continue;
            const long long x = lo + static_cast<long long>(i);
            const JumpLaw& law = env.law_at(x);
            for (int z : law.offsets()) {
                double m = mass[i] * law(z);
                if (m == 0.0) continue;
                if (x + z >= n)
                    hit += m;
                else
                    next[static_cast<std::size_t>(x + z - lo)] += m;
            }
        }
        out.value += weight * hit;
        std::swap(mass, next);
    }
    out.tail_bound = std::exp(r * max_len) / (1.0 - std::exp(r));
    return out;
}

// ---------------------------------------------------------------------------
// Harmonic ratios u_r(T_x omega, z)
// ---------------------------------------------------------------------------

struct ULimitOptions {
    double tol = 1e-12;
    long long initial_pad = 32;
    long long max_pad = 1LL << 21;
};

struct ULimit {
    double r = 0.0;
    int B = 1;
    long long x_lo = 0, x_hi = 0;
    /// Wrap period for periodic/homogeneous environments, 0 for windows.
    std::size_t period = 0;
    /// log u(x, z) at [(x - x_lo) * 2B + slot(z)].
    std::vector<double> log_u;
    long long n_used = 0, M_used = 0;
    double cauchy_gap = kInf;
    bool converged = false;
    /// c(r) and the level n it would prescribe for the requested tol.
    double certificate_rate = 0.0;
    double certificate_n = kInf;

    long long resolve(long long x) const {
        if (period == 0) {
            if (x < x_lo || x > x_hi) throw InvalidArgument("ULimit: site outside stored range");
            return x;
        }
        long long L = static_cast<long long>(period);
        long long m = x % L;
        return m < 0 ? m + L : m;
    }
    double log_at(long long x, int z) const {
        long long s = resolve(x);
        return log_u[static_cast<std::size_t>(s - x_lo) * 2 * B + JumpLaw::slot(B, z)];
    }
    double at(long long x, int z) const { return std::exp(log_at(x, z)); }
};

/// u_r(T_x omega, z) = lim_n h_n(x+z) / h_n(x) for x in [x_lo, x_hi], by
/// doubling the truncation pad on both sides until the log-ratios stabilize.
inline ULimit u_limit(const Environment& env, double r, long long x_lo, long long x_hi,
                      const ULimitOptions& opt = {}) {
    const int B = env.B();
    ULimit out;
    out.r = r;
    out.B = B;
    out.x_lo = x_lo;
    out.x_hi = x_hi;
    out.period = env.is_finite_class() ? env.period() : 0;
    out.certificate_rate = contraction_rate(env.delta(), r, B);
    {
        double de = env.delta() * std::exp(r);
        double lc = std::log(out.certificate_rate);
        if (lc < 0.0) out.certificate_n = std::log(opt.tol * std::pow(de, 8.0 * (B - 1))) / lc;
    }
    const std::size_t stride = static_cast<std::size_t>(2 * B);
    const std::size_t count = static_cast<std::size_t>(x_hi - x_lo + 1);
    std::vector<double> prev;
    for (long long pad = opt.initial_pad; pad <= opt.max_pad; pad *= 2) {
        long long M = -(x_lo - B - pad);
        long long n = x_hi + B + 1 + pad;
        if (!env.is_finite_class() && (-M < env.x_lo() || n - 1 > env.x_hi())) break;
        ScaledValues h = hit_mgf_direct(env, r, n, M, x_lo - B);
        std::vector<double> cur(count * stride);
        for (long long x = x_lo; x <= x_hi; ++x)
            for (int z : JumpLaw::offsets(B))
                cur[static_cast<std::size_t>(x - x_lo) * stride + JumpLaw::slot(B, z)] = h.log_ratio(x + z, x);
        out.n_used = n;
        out.M_used = M;
        if (!prev.empty()) {
            double gap = 0.0;
            for (std::size_t i = 0; i < cur.size(); ++i) gap = std::max(gap, std::abs(cur[i] - prev[i]));
            out.cauchy_gap = gap;
            if (gap <= opt.tol) {
                out.converged = true;
                out.log_u = std::move(cur);
                return out;
            }
        }
        prev = std::move(cur);
    }
    out.log_u = std::move(prev);
    return out;
}

/// u_limit over one period (or over [x_lo, x_hi] for windows).
inline ULimit u_limit(const Environment& env, double r, const ULimitOptions& opt = {}) {
    if (env.is_finite_class())
        return u_limit(env, r, 0, static_cast<long long>(env.period()) - 1, opt);
    return u_limit(env, r, env.x_lo() / 2, env.x_hi() / 2, opt);
}

/// Largest |log u(x, z+z') - log u(x, z) - log u(x+z, z')| over stored triples.
inline double cocycle_defect(const ULimit& u) {
    double worst = 0.0;
    for (long long x = u.x_lo; x <= u.x_hi; ++x)
        for (int z : JumpLaw::offsets(u.B))
            for (int zp : JumpLaw::offsets(u.B)) {
                int zz = z + zp;
                if (zz == 0 || std::abs(zz) > u.B) {
                    if (zz == 0) {
                        if (u.period == 0 && (x + z < u.x_lo || x + z > u.x_hi)) continue;
                        worst = std::max(worst, std::abs(u.log_at(x, z) + u.log_at(x + z, zp)));
                    }
                    continue;
                }
                if (u.period == 0 && (x + z < u.x_lo || x + z > u.x_hi)) continue;
                worst = std::max(worst, std::abs(u.log_at(x, zz) - u.log_at(x, z) - u.log_at(x + z, zp)));
            }
    return worst;
}

// ---------------------------------------------------------------------------
// Nearest-neighbor zeta recursion
// ---------------------------------------------------------------------------

struct ZetaNN {
    double r = 0.0;
    long long x_lo = 0;
    std::size_t period = 0;
    /// zeta(r, T_x omega) = E_x[e^{r tau_{x+1}}, tau_{x+1} < inf].
    std::vector<double> zeta;
    double residual = 0.0;
    long long sweeps = 0;

    double at(long long x) const {
        if (period) {
            long long L = static_cast<long long>(period), m = x % L;
            return zeta[static_cast<std::size_t>(m < 0 ? m + L : m)];
        }
        return zeta.at(static_cast<std::size_t>(x - x_lo));
    }
};

/// Forward recursion zeta(x) = p_x(1) e^r / (1 - p_x(-1) e^r zeta(x-1)) from a
/// zero seed on the left. Periodic environments cycle to the fixed point;
/// windows sweep from the left edge and report [x_lo, x_hi].
inline ZetaNN zeta_nn(const Environment& env, double r, long long x_lo, long long x_hi,
                      double tol = 1e-14, long long max_sweeps = 50'000'000) {
    if (env.B() != 1) throw InvalidArgument("zeta_nn: nearest-neighbor environments only");
    const double er = std::exp(r);
    ZetaNN out;
    out.r = r;
    auto step = [&](long long x, double left) {
        const JumpLaw& law = env.law_at(x);
        double den = 1.0 - law(-1) * er * left;
        if (!(den > 0.0)) throw Supercritical("zeta recursion denominator <= 0", r);
        return law(1) * er / den;
    };
    if (env.is_finite_class()) {
        const std::size_t L = env.period();
        out.period = L;
        out.zeta.assign(L, 0.0);
        double left = 0.0;
        for (long long sweep = 1; sweep <= max_sweeps; ++sweep) {
            double change = 0.0;
            for (std::size_t i = 0; i < L; ++i) {
                double v = step(static_cast<long long>(i), left);
                if (!std::isfinite(v) || v > 1e300) throw Supercritical("zeta recursion diverged", r);
                change = std::max(change, std::abs(v - out.zeta[i]));
                out.zeta[i] = v;
                left = v;
            }
            out.sweeps = sweep;
            if (change <= tol * std::max(1.0, left)) break;
            if (sweep == max_sweeps) throw NotConverged("zeta recursion did not settle", change);
        }
    } else {
        if (x_lo <= env.x_lo() || x_hi > env.x_hi()) throw WindowExhausted(x_lo, env.x_lo(), env.x_hi());
        out.x_lo = x_lo;
        double left = 0.0;
        for (long long x = env.x_lo(); x <= x_hi; ++x) {
            left = step(x, left);
            if (x >= x_lo) out.zeta.push_back(left);
        }
        out.sweeps = 1;
    }
    const long long a = out.period ? 0 : x_lo + 1;
    const long long b = out.period ? static_cast<long long>(out.period) - 1 : x_hi;
    for (long long x = a; x <= b; ++x) {
        const JumpLaw& law = env.law_at(x);
        double res = law(1) * er / out.at(x) + law(-1) * er * out.at(x - 1) - 1.0;
        out.residual = std::max(out.residual, std::abs(res));
    }
    return out;
}

inline ZetaNN zeta_nn(const Environment& env, double r, double tol = 1e-14) {
    return zeta_nn(env, r, 0, 0, tol);
}

// ---------------------------------------------------------------------------
// Lyapunov exponents and r_c
// ---------------------------------------------------------------------------

struct LambdaValue {
    double r = 0.0;
    double value = kInf;
    /// Standard error of the site average (sampled windows only).
    double std_error = 0.0;
    bool finite = false;
    bool converged = false;
    long long n_used = 0, M_used = 0;
    double cauchy_gap = kInf;
};

/// lambda(r) = -E[log u_r(., 1)]: exact period average for periodic and
/// homogeneous environments, site average with standard error for windows.
inline LambdaValue lambda_from(const ULimit& u) {
    LambdaValue out;
    out.r = u.r;
    out.n_used = u.n_used;
    out.M_used = u.M_used;
    out.cauchy_gap = u.cauchy_gap;
    out.converged = u.converged;
    const long long cnt = u.x_hi - u.x_lo + 1;
    double sum = 0.0, sq = 0.0;
    for (long long x = u.x_lo; x <= u.x_hi; ++x) {
        double v = -u.log_at(x, 1);
        sum += v;
        sq += v * v;
    }
    out.value = sum / static_cast<double>(cnt);
    out.finite = std::isfinite(out.value);
    if (u.period == 0 && cnt > 1) {
        double var = (sq - sum * sum / static_cast<double>(cnt)) / static_cast<double>(cnt - 1);
        out.std_error = std::sqrt(std::max(0.0, var) / static_cast<double>(cnt));
    }
    return out;
}

inline LambdaValue lambda(const Environment& env, double r, const ULimitOptions& opt = {}) {
    try {
        return lambda_from(u_limit(env, r, opt));
    } catch (const Supercritical&) {
        LambdaValue out;
        out.r = r;
        return out;
    }
}

inline LambdaValue lambda_bar(const Environment& env, double r, const ULimitOptions& opt = {}) {
    return lambda(reflect(env), r, opt);
}

struct RcEstimate {
    double lo = 0.0, hi = 0.0;          // right passage bracket
    double lo_bar = 0.0, hi_bar = 0.0;  // left passage bracket
    long long interval = 0;             // truncation length used by the predicate
    double truncation_bias = 0.0;       // bound on the upward shift from truncation

    double width() const noexcept { return hi - lo; }
    double mid() const noexcept { return 0.5 * (lo + hi); }
    double direction_gap() const noexcept { return std::abs(mid() - 0.5 * (lo_bar + hi_bar)); }
};

struct RcOptions {
    double tol = 1e-8;
    double lower_start = 0.0;
};

namespace detail {

inline std::pair<double, double> bisect_rc(const Environment& env, double tol, double lower,
                                           long long lo_site, long long hi_site) {
    auto ok = [&](double r) { return subcritical_on(env, r, lo_site, hi_site); };
    double a = lower;
    while (!ok(a)) a -= 1.0 + std::abs(a);
    double b = -std::log(env.delta());
    if (b <= a) b = a + 1.0;
    while (ok(b)) b += 1.0 + std::abs(b);
    while (b - a > tol) {
        double m = 0.5 * (a + b);
        (ok(m) ? a : b) = m;
    }
    return {a, b};
}

} // namespace detail

/// Bisection for r_c between a lower start and -log(delta), on the predicate
/// "the passage problem truncated to an interval of length N is subcritical".
/// Truncation can only raise the apparent r_c, by at most 2 B^2 pi^2 / N^2
/// (a Dirichlet eigenvalue bound), and N is chosen so that this bias fits
/// inside the bracket. The same search runs on the reflected environment.
inline RcEstimate estimate_rc(const Environment& env, const RcOptions& opt = {}) {
    const int B = env.B();
    RcEstimate out;
    long long lo_site = 0, hi_site = 0;
    if (env.is_finite_class()) {
        const double N = std::ceil(3.0 * std::numbers::pi * B * 2.0 / std::sqrt(opt.tol));
        const long long L = static_cast<long long>(env.period());
        long long len = std::max<long long>(1024, static_cast<long long>(N));
        len = (len / L + 1) * L;
        lo_site = -len / 2;
        hi_site = lo_site + len;
    } else {
        lo_site = env.x_lo();
        hi_site = env.x_hi() + 1;
    }
    out.interval = hi_site - lo_site;
    const double Nd = static_cast<double>(out.interval);
    out.truncation_bias = 2.0 * B * B * std::numbers::pi * std::numbers::pi / (Nd * Nd);
    const double search_tol = std::max(opt.tol - out.truncation_bias, 0.25 * opt.tol);
    auto [a, b] = detail::bisect_rc(env, search_tol, opt.lower_start, lo_site, hi_site);
    out.lo = a - out.truncation_bias;
    out.hi = b;
    Environment ref = reflect(env);
    auto [ab, bb] = detail::bisect_rc(ref, search_tol, opt.lower_start, -hi_site + 1, -lo_site + 1);
    out.lo_bar = ab - out.truncation_bias;
    out.hi_bar = bb;
    return out;
}

// ---------------------------------------------------------------------------
// Characteristic polynomial of a homogeneous walk
// ---------------------------------------------------------------------------

struct CharPolyResult {
    double r = 0.0;
    /// Ascending coefficients of sum_z p(z) e^r x^{z+B} - x^B (degree 2B).
    std::vector<double> coefficients;
    std::vector<double> positive_roots;
    std::optional<double> x_right;  // root > 1, equals e^{-lambda(r)}
    std::optional<double> x_left;   // root < 1, equals e^{lambda_bar(r)}
    double max_residual = 0.0;
    double coefficient_scale = 0.0;

    double eval(double x) const {
        double v = 0.0;
        for (std::size_t k = coefficients.size(); k-- > 0;) v = v * x + coefficients[k];
        return v;
    }
};

/// Positive roots of sum_z p(z) e^r x^{z+B} - x^B. With t = log x the
/// polynomial divided by x^B is e^r sum_z p(z) e^{tz} - 1, a strictly convex
/// function of t, so there are at most two positive roots. They are bracketed
/// on either side of the minimizer and refined by bisection.
inline CharPolyResult char_poly_roots(const JumpLaw& law, double r) {
    const int B = law.B();
    CharPolyResult out;
    out.r = r;
    const double er = std::exp(r);
    out.coefficients.assign(static_cast<std::size_t>(2 * B + 1), 0.0);
    for (int z : law.offsets()) out.coefficients[static_cast<std::size_t>(z + B)] = law(z) * er;
    out.coefficients[static_cast<std::size_t>(B)] = -1.0;
    for (double c : out.coefficients) out.coefficient_scale = std::max(out.coefficient_scale, std::abs(c));

    auto g = [&](double t) {
        double s = 0.0;
        for (int z : law.offsets()) s += law(z) * std::exp(t * z);
        return er * s - 1.0;
    };
    auto dg = [&](double t) {
        double s = 0.0;
        for (int z : law.offsets()) s += z * law(z) * std::exp(t * z);
        return er * s;
    };
    double a = -1.0, b = 1.0;
    while (dg(a) > 0.0) a *= 2.0;
    while (dg(b) < 0.0) b *= 2.0;
    for (int i = 0; i < 200 && b - a > 1e-15 * (1.0 + std::abs(a)); ++i) {
        double m = 0.5 * (a + b);
        (dg(m) < 0.0 ? a : b) = m;
    }
    const double tmin = 0.5 * (a + b);
    if (!(g(tmin) < 0.0)) return out;

    auto root_between = [&](double lo, double hi) {
        // g(lo) and g(hi) have opposite signs.
        bool lo_neg = g(lo) < 0.0;
        for (int i = 0; i < 300; ++i) {
            double m = 0.5 * (lo + hi);
            if (m == lo || m == hi) break;
            ((g(m) < 0.0) == lo_neg ? lo : hi) = m;
        }
        return std::exp(0.5 * (lo + hi));
    };
    double tl = tmin - 1.0;
    while (g(tl) < 0.0) tl = tmin - 2.0 * (tmin - tl);
    double th = tmin + 1.0;
    while (g(th) < 0.0) th = tmin + 2.0 * (th - tmin);
    double left = root_between(tl, tmin);
    double right = root_between(tmin, th);
    out.positive_roots = {left, right};
    for (double x : out.positive_roots) {
        double scale = 0.0, xp = 1.0;
        for (double c : out.coefficients) {
            scale = std::max(scale, std::abs(c) * xp);
            xp *= x;
        }
        out.max_residual = std::max(out.max_residual, std::abs(out.eval(x)) / scale);
    }
    if (right > 1.0) out.x_right = right;
    if (left < 1.0) out.x_left = left;
    return out;
}

// ---------------------------------------------------------------------------
// Lambda curve
// ---------------------------------------------------------------------------

struct LambdaCurveRow {
    double r = 0.0;
    double lambda = kInf;
    double lambda_bar = kInf;
    bool converged = false;
    long long n_used = 0, M_used = 0;
};

inline std::vector<LambdaCurveRow> lambda_curve(const Environment& env, const std::vector<double>& grid,
                                                const ULimitOptions& opt = {}) {
    std::vector<LambdaCurveRow> rows;
    Environment ref = reflect(env);
    for (double r : grid) {
        LambdaValue l = lambda(env, r, opt);
        LambdaValue lb = lambda(ref, r, opt);
        rows.push_back({r, l.value, lb.value, l.converged && lb.converged, l.n_used, l.M_used});
    }
    return rows;
}

} // namespace rwre
