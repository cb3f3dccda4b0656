#include "corpus.hpp"
#include "rwre/level2.hpp"
#include "rwre/tilt.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rwre;
using namespace rwre::test;

namespace {

constexpr double kZeta = 0.6346363729462067;        // symmetric walk, r = -0.1
constexpr double kLambdaPrime = 2.3487561742605372;  // same point
constexpr double kCeVelocity = 1.3448957670853788;   // counterexample law, r = -0.5

std::vector<double> power_stationary(const std::vector<std::vector<double>>& P) {
    std::vector<double> pi(P.size(), 1.0 / static_cast<double>(P.size()));
    for (int it = 0; it < 20000; ++it) {
        std::vector<double> nx(P.size(), 0.0);
        for (std::size_t i = 0; i < P.size(); ++i)
            for (std::size_t j = 0; j < P.size(); ++j) nx[j] += 0.5 * pi[i] * P[i][j];
        for (std::size_t j = 0; j < P.size(); ++j) nx[j] += 0.5 * pi[j];  // lazy, aperiodic
        pi = nx;
    }
    return pi;
}

} // namespace

TEST(TiltKernel, TransientAtZeroIsOriginal) {
    // positive drift: every level is hit a.s., so u = 1 at r = 0
    TiltBundle t = tilt_bundle(Environment::homogeneous(nn(0.75), 0.25), 0.0);
    EXPECT_NEAR(t.kernel.at(0, 1), 0.75, 1e-10);
    EXPECT_NEAR(t.kernel.at(0, -1), 0.25, 1e-10);
}

TEST(TiltKernel, SymmetricClosedForm) {
    const double r = -0.1;
    TiltBundle t = tilt_bundle(symmetric(), r);
    EXPECT_NEAR(t.kernel.at(0, 1), 0.5 * std::exp(r) / kZeta, 1e-11);
    EXPECT_NEAR(t.kernel.at(0, -1), 0.5 * std::exp(r) * kZeta, 1e-11);
    EXPECT_NEAR(t.kernel.at(0, 1) + t.kernel.at(0, -1), 1.0, 1e-11);
}

TEST(TiltKernel, RowsEllipticityAndUReuse) {
    for (const Environment& e : periodic_corpus())
        for (double r : {-3.0, -1.0, -0.3}) {
            TiltBundle t = tilt_bundle(e, r);
            EXPECT_LE(t.kernel.row_sum_defect, 1e-10);
            const double floor = std::pow(e.delta() * std::exp(r), 2);
            for (long long x = 0; x < static_cast<long long>(e.period()); ++x) {
                EXPECT_GE(t.kernel.at(x, 1), floor - 1e-12);
                EXPECT_GE(t.kernel.at(x, -1), floor - 1e-12);
            }
        }
    ULimit u = u_limit(two_cycle(), -0.5);
    EXPECT_THROW(tilt_kernel(two_cycle(), -0.6, u), InvalidArgument);
}

TEST(TiltKernel, InconsistentUFlagged) {
    // ratios of one finite-level h are exactly harmonic, so only mixed u shows up
    ULimit u = u_limit(two_cycle(), -0.3);
    EXPECT_NO_THROW(tilt_kernel(two_cycle(), -0.3, u, 1e-10));
    u.log_u[0] += 1e-3;
    EXPECT_THROW(tilt_kernel(two_cycle(), -0.3, u, 1e-6), NotConverged);
}

TEST(Density, HomogeneousConstant) {
    TiltBundle t = tilt_bundle(Environment::homogeneous(law2(0.05, 0.2, 0.4, 0.35), 0.2), -0.5);
    ASSERT_EQ(t.density.phi.size(), 1u);
    EXPECT_DOUBLE_EQ(t.density.phi[0], 1.0);
    InvariantDensity occ = invariant_density(t.kernel, InvariantDensity::Mode::occupation);
    EXPECT_NEAR(occ.phi[0], 1.0, 1e-12);
}

TEST(Density, TwoCycleModesAgree) {
    TiltBundle t = tilt_bundle(two_cycle(), -0.2);
    InvariantDensity occ = invariant_density(t.kernel, InvariantDensity::Mode::occupation);
    ASSERT_TRUE(occ.converged);
    for (long long i = 0; i < 2; ++i) EXPECT_NEAR(occ.at(i), t.density.at(i), 1e-6);
    // occupation_mean is the reciprocal velocity
    EXPECT_NEAR(occ.occupation_mean, t.density.occupation_mean, 1e-6 * t.density.occupation_mean);
}

TEST(Density, ThreeCycleAgainstPowerIteration) {
    Environment e = Environment::periodic({nn(0.8), nn(0.4), nn(0.3)}, 0.2);
    TiltBundle t = tilt_bundle(e, -0.4);
    std::vector<std::vector<double>> P(3, std::vector<double>(3, 0.0));
    for (int i = 0; i < 3; ++i) {
        P[static_cast<std::size_t>(i)][static_cast<std::size_t>((i + 1) % 3)] += t.kernel.at(i, 1);
        P[static_cast<std::size_t>(i)][static_cast<std::size_t>((i + 2) % 3)] += t.kernel.at(i, -1);
    }
    std::vector<double> pi = power_stationary(P);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(t.density.phi[i], 3 * pi[i], 1e-10);
    double spread = *std::max_element(pi.begin(), pi.end()) - *std::min_element(pi.begin(), pi.end());
    EXPECT_GT(spread, 1e-3);
    InvariantDensity occ = invariant_density(t.kernel, InvariantDensity::Mode::occupation);
    for (long long i = 0; i < 3; ++i) EXPECT_NEAR(occ.at(i), t.density.at(i), 1e-6);
}

TEST(Density, InvarianceAndFloorAcrossCorpus) {
    for (const Environment& e : periodic_corpus())
        for (double r : {-2.0, -0.5}) {
            TiltBundle t = tilt_bundle(e, r);
            EXPECT_LE(t.density.residual, 1e-8);
            EXPECT_TRUE(t.density.floor_ok());
            InvariantDensity occ = invariant_density(t.kernel, InvariantDensity::Mode::occupation);
            EXPECT_LE(occ.residual, 1e-8);
        }
}

TEST(Density, WindowOccupation) {
    std::vector<LawAtom> atoms = {{0.5, law2(0.1, 0.2, 0.4, 0.3)}, {0.5, law2(0.1, 0.4, 0.3, 0.2)}};
    Environment w = sample_iid(atoms, -3000, 3000, 9, 0.1);
    ULimit u = u_limit(w, -0.8, -600, 600);
    ASSERT_TRUE(u.converged);
    TiltedKernel k = tilt_kernel(w, -0.8, u, 1e-10);
    EXPECT_THROW(invariant_density(k, InvariantDensity::Mode::periodic_exact), InvalidArgument);
    InvariantDensity d = invariant_density(k, InvariantDensity::Mode::occupation);
    EXPECT_TRUE(d.converged);
    EXPECT_LE(d.residual, 1e-8);
    EXPECT_TRUE(d.floor_ok());
}

TEST(Corrector, SymmetricVanishes) {
    TiltBundle t = tilt_bundle(symmetric(), -0.1);
    Corrector F = corrector(symmetric(), -0.1, t.u, t.lambda.value);
    EXPECT_NEAR(F.at(0, 1), 0.0, 1e-12);
    EXPECT_NEAR(F.at(5, -1), 0.0, 1e-12);
}

TEST(Corrector, TwoCycleAntisymmetryAndLoop) {
    TiltBundle t = tilt_bundle(two_cycle(), -0.2);
    Corrector F = corrector(two_cycle(), -0.2, t.u, t.lambda.value);
    EXPECT_NEAR(F.at(0, 1), -F.at(1, -1), 1e-10);
    EXPECT_NEAR(F.at(0, 1) + F.at(1, 1), 0.0, 1e-10);
    EXPECT_GT(std::abs(F.at(0, 1)), 1e-3);
    EXPECT_LE(F.max_abs, F.moment_bound);
}

TEST(Corrector, TelescopesAcrossCorpus) {
    for (const Environment& e : periodic_corpus()) {
        TiltBundle t = tilt_bundle(e, -0.7);
        Corrector F = corrector(e, -0.7, t.u, t.lambda.value);
        EXPECT_LE(F.antisymmetry_defect, 1e-10);
        EXPECT_LE(F.loop_defect, 1e-10);
        EXPECT_LE(F.telescoping_defect, 1e-10);
        EXPECT_GE(F.oscillation(), 0.0);
    }
}

TEST(Corrector, WrongLambdaRejected) {
    TiltBundle t = tilt_bundle(two_cycle(), -0.2);
    EXPECT_THROW(corrector(two_cycle(), -0.2, t.u, t.lambda.value + 1e-3), Inconsistency);
}

TEST(Ansatz, UntiltedIsVelocity) {
    AnsatzMeasure a = ansatz_measure(Environment::homogeneous(nn(0.75), 0.25), 0.0);
    EXPECT_NEAR(a.xi, 0.5, 1e-10);
    EXPECT_NEAR(a.mu.at(0, 1), 0.75, 1e-10);
}

TEST(Ansatz, SymmetricDrift) {
    const double r = -0.1;
    AnsatzMeasure a = ansatz_measure(symmetric(), r);
    EXPECT_NEAR(a.xi, 1.0 / kLambdaPrime, 1e-10);
    TiltBundle t = tilt_bundle(symmetric(), r);
    EXPECT_NEAR(a.xi, t.kernel.at(0, 1) - t.kernel.at(0, -1), 1e-12);
}

TEST(Ansatz, CounterexampleVelocity) {
    AnsatzMeasure a = ansatz_measure(Environment::homogeneous(counterexample_law(), 1.0 / 7), -0.5);
    EXPECT_NEAR(a.xi, kCeVelocity, 1e-10);
}

TEST(Ansatz, DriftMatchesFiniteDifference) {
    for (const Environment& e : periodic_corpus())
        for (double r : {-2.0, -1.5, -1.0, -0.6, -0.3}) {
            AnsatzMeasure a = ansatz_measure(e, r);
            EXPECT_NEAR(a.xi, 1.0 / lambda_prime_fd(e, r, 1e-3), 1e-6) << r;
            EXPECT_LE(a.stationarity_residual, 1e-8);
        }
}

TEST(Ansatz, EntropyIdentity) {
    for (const Environment& e : periodic_corpus())
        for (double r : {-2.0, -1.0, -0.4}) {
            AnsatzMeasure a = ansatz_measure(e, r);
            EXPECT_NEAR(entropy(a.mu, e), r - a.xi * a.lambda, 1e-6);
        }
}

TEST(LambdaPrime, SymmetricClosedForm) {
    LambdaPrime lp = lambda_prime(symmetric(), -0.1);
    EXPECT_NEAR(lp.value, kLambdaPrime, 1e-9);
    EXPECT_LE(lp.gap, 1e-6);
}

TEST(LambdaPrime, DeepTiltLimitIsOne) {
    EXPECT_NEAR(lambda_prime(symmetric(), -12.0).value, 1.0, 1e-9);
}

TEST(LambdaPrime, StrictlyIncreasing) {
    for (const Environment& e : periodic_corpus()) {
        double prev = 0.0;
        for (double r : {-2.0, -1.5, -1.0, -0.5, -0.2}) {
            double v = lambda_prime(e, r).value;
            EXPECT_GT(v, prev);
            prev = v;
        }
    }
}

TEST(LambdaPrime, GateReportsBothValues) {
    try {
        lambda_prime(two_cycle(), -0.5, 0.2, 1e-12);
        FAIL() << "expected the gate to trip";
    } catch (const Inconsistency& e) {
        EXPECT_NE(std::string(e.what()).find("finite difference"), std::string::npos);
    }
}
