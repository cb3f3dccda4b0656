#pragma once

#include "rwre/environment.hpp"
#include "rwre/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace rwre {

/// Weights w(i, z) on (site class i in [0, L)) x (offsets -B..-1, 1..B).
struct PairMeasure {
    std::size_t L = 1;
    int B = 1;
    std::vector<double> w;  // [i * 2B + slot(z)]

    PairMeasure() = default;
    PairMeasure(std::size_t L_, int B_)
        : L(L_), B(B_), w(L_ * static_cast<std::size_t>(2 * B_), 0.0) {}

    std::size_t stride() const noexcept { return static_cast<std::size_t>(2 * B); }
    double& at(std::size_t i, int z) { return w[i * stride() + JumpLaw::slot(B, z)]; }
    double at(std::size_t i, int z) const { return w[i * stride() + JumpLaw::slot(B, z)]; }

    std::size_t wrap(long long x) const noexcept {
        long long l = static_cast<long long>(L), m = x % l;
        return static_cast<std::size_t>(m < 0 ? m + l : m);
    }

    double mass() const noexcept {
        double s = 0.0;
        for (double v : w) s += v;
        return s;
    }
    double drift() const noexcept {
        double s = 0.0;
        for (std::size_t i = 0; i < L; ++i)
            for (int z : JumpLaw::offsets(B)) s += z * at(i, z);
        return s;
    }
};

struct Marginals {
    std::vector<double> m1, m2;
    double stationarity_residual = 0.0;
};

/// m1(i) = sum_z w(i, z), m2(i) = sum_z w(i - z, z).
inline Marginals marginals(const PairMeasure& mu) {
    Marginals out;
    out.m1.assign(mu.L, 0.0);
    out.m2.assign(mu.L, 0.0);
    for (std::size_t i = 0; i < mu.L; ++i)
        for (int z : JumpLaw::offsets(mu.B)) {
            double v = mu.at(i, z);
            out.m1[i] += v;
            out.m2[mu.wrap(static_cast<long long>(i) + z)] += v;
        }
    for (std::size_t i = 0; i < mu.L; ++i)
        out.stationarity_residual = std::max(out.stationarity_residual, std::abs(out.m1[i] - out.m2[i]));
    return out;
}

inline double total_variation(const PairMeasure& a, const PairMeasure& b) {
    if (a.w.size() != b.w.size()) throw InvalidArgument("total_variation: shape mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < a.w.size(); ++k) s += std::abs(a.w[k] - b.w[k]);
    return 0.5 * s;
}

/// Site-class count for level-2 objects; windows have no finite class space.
inline std::size_t class_count(const Environment& env) {
    if (!env.is_finite_class())
        throw InvalidArgument("pair measures need a periodic or homogeneous environment");
    return env.period();
}

} // namespace rwre
