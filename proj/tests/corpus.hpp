#pragma once

#include "rwre/environment.hpp"

#include <vector>

namespace rwre::test {

inline JumpLaw law2(double m2, double m1, double p1, double p2) {
    return JumpLaw(2, {{-2, m2}, {-1, m1}, {1, p1}, {2, p2}});
}

inline JumpLaw nn(double p) { return JumpLaw::nearest_neighbor(p); }

inline JumpLaw counterexample_law() { return law2(1.0 / 7, 3.0 / 7, 1.0 / 7, 2.0 / 7); }

inline Environment symmetric() { return Environment::homogeneous(nn(0.5), 0.5); }

inline Environment two_cycle() { return Environment::periodic({nn(0.8), nn(0.4)}, 0.2); }

/// Periodic environments whose laws are drawn from a fixed seed.
inline Environment random_periodic(std::uint64_t seed, std::size_t L, int B, double delta = 0.1) {
    CounterRng rng(seed, 0);
    std::vector<JumpLaw> laws;
    for (std::size_t i = 0; i < L; ++i) {
        std::vector<double> w(static_cast<std::size_t>(2 * B));
        double s = 0.0;
        for (double& v : w) s += v = 0.2 + rng.uniform();
        JumpLaw law(B);
        // keep the +-1 floor: scale so the rest fits above 2 delta
        double free = 1.0 - 2.0 * delta;
        for (std::size_t k = 0; k < w.size(); ++k) {
            int z = JumpLaw::offset_at(B, k);
            law.set(z, free * w[k] / s + (std::abs(z) == 1 ? delta : 0.0));
        }
        laws.push_back(law);
    }
    return Environment::periodic(std::move(laws), delta);
}

/// Homogeneous laws used across suites.
inline std::vector<Environment> homogeneous_corpus() {
    return {
        Environment::homogeneous(nn(0.5), 0.5),
        Environment::homogeneous(nn(0.75), 0.25),
        Environment::homogeneous(nn(0.3), 0.3),
        Environment::homogeneous(counterexample_law(), 1.0 / 7),
        Environment::homogeneous(law2(0.05, 0.2, 0.4, 0.35), 0.2),
        Environment::homogeneous(law2(0.3, 0.2, 0.4, 0.1), 0.2),
    };
}

inline std::vector<Environment> periodic_corpus() {
    return {
        two_cycle(),
        Environment::periodic({nn(0.8), nn(0.4), nn(0.3)}, 0.2),
        random_periodic(11, 3, 2),
        random_periodic(12, 4, 2),
        random_periodic(13, 2, 1),
    };
}

} // namespace rwre::test
