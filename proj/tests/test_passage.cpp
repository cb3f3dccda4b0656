#include "corpus.hpp"
#include "rwre/passage.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rwre;
using namespace rwre::test;

namespace {

// Symmetric nearest-neighbor walk at r = -0.1.
constexpr double kZeta = 0.6346363729462067;
constexpr double kXRight = 1.5757054632050885;
constexpr double kLambda = -0.45470308514053541;

// Two-cycle p0(1) = 0.8, p1(1) = 0.4.
constexpr double kZeta0 = 0.71395163814326199;
constexpr double kZeta1 = 0.50439340827382226;
constexpr double kTwoCycleRc = 0.02463800269179498;

struct CePoint {
    double r, lambda, lambda_bar;
};
constexpr CePoint kCe[] = {
    {-0.25, -0.47028150391800736, -0.49775959576110251},
    {-0.5, -0.67988873670601578, -0.73470567545674136},
    {-1.0, -1.0093784910117443, -1.1163481386431564},
    {-2.0, -1.5704307755957776, -1.7631827844158010},
};

} // namespace

TEST(HitMgf, RecurrentGamblersRuin) {
    // P_0(hit 1 before -M-1) = (M+1)/(M+2) for the symmetric walk at r = 0.
    for (long long M : {10LL, 50LL}) {
        MgfSolve s = hit_mgf(symmetric(), 0.0, 1, M);
        ASSERT_TRUE(s.converged()) << to_string(s.status);
        double expect = static_cast<double>(M + 1) / static_cast<double>(M + 2);
        EXPECT_NEAR(s.at(0), expect, 1e-8);
    }
}

TEST(HitMgf, SymmetricClosedForm) {
    MgfSolve s = hit_mgf(symmetric(), -0.1, 1, 300);
    ASSERT_TRUE(s.converged());
    EXPECT_NEAR(s.at(0), kZeta, 1e-10);
}

TEST(HitMgf, OneStepDominates) {
    const double r = -20.0;
    for (const Environment& e : homogeneous_corpus()) {
        MgfSolve s = hit_mgf(e, r, 1, 20);
        ASSERT_TRUE(s.converged());
        double one = (e.law_at(0)(1) + e.law_at(0)(2)) * std::exp(r);
        EXPECT_NEAR(s.at(0), one, std::exp(2 * r) / (1 - std::exp(r)));
    }
}

TEST(HitMgf, OvershootStatesAreOne) {
    Environment e = Environment::homogeneous(counterexample_law(), 1.0 / 7);
    MgfSolve s = hit_mgf(e, -0.5, 5, 30);
    EXPECT_EQ(s.at(5), 1.0);
    EXPECT_EQ(s.at(6), 1.0);
}

TEST(HitMgf, MonotoneInM) {
    for (const Environment& e : periodic_corpus()) {
        MgfSolve prev = hit_mgf(e, -0.5, 6, 4);
        for (long long M : {8LL, 16LL, 32LL}) {
            MgfSolve cur = hit_mgf(e, -0.5, 6, M);
            for (long long x = -prev.M; x < 6; ++x) EXPECT_GE(cur.at(x), prev.at(x) - 1e-15);
            prev = std::move(cur);
        }
    }
}

TEST(HitMgf, MonotoneInIterations) {
    Environment e = random_periodic(3, 3, 2);
    MgfOptions a, b;
    a.max_iter = 5;
    b.max_iter = 12;
    MgfSolve s5 = hit_mgf(e, -0.3, 8, 20, a), s12 = hit_mgf(e, -0.3, 8, 20, b);
    for (long long x = -20; x < 8; ++x) EXPECT_GE(s12.at(x), s5.at(x));
}

TEST(HitMgf, RatioSandwich) {
    for (const Environment& e : periodic_corpus()) {
        const double r = -0.4, n = 12, M = 40;
        MgfSolve s = hit_mgf(e, r, static_cast<long long>(n), static_cast<long long>(M));
        ASSERT_TRUE(s.converged());
        const double de = e.delta() * std::exp(r);
        for (long long x = -40 + e.B(); x < 12; ++x)
            for (long long y = x + 1; y < 12; ++y) {
                double q = s.at(y) / s.at(x);
                double lo = std::pow(de, static_cast<double>(y - x));
                EXPECT_GE(q, lo * (1 - 1e-8));
                EXPECT_LE(q, (1 / lo) * (1 + 1e-8));
            }
    }
}

TEST(HitMgf, DivergenceFlagAboveRc) {
    MgfSolve s = hit_mgf(symmetric(), 0.05, 1, 200);
    EXPECT_EQ(s.status, MgfSolve::Status::supercritical_or_diverged);
}

TEST(HitMgf, DirectSolveAgrees) {
    for (const Environment& e : periodic_corpus()) {
        MgfSolve s = hit_mgf(e, -0.5, 10, 60);
        ScaledValues d = hit_mgf_direct(e, -0.5, 10, 60);
        for (long long x = -50; x < 10; ++x) EXPECT_NEAR(std::exp(d.log_at(x)), s.at(x), 1e-11 * s.at(x) + 1e-12);
    }
}

TEST(BruteMgf, DominantPath) {
    const double eps = 1e-6;
    Environment e = Environment::homogeneous(JumpLaw(1, {{-1, eps}, {1, 1 - eps}}), eps);
    BruteMgf b = brute_mgf(e, -1.0, 1, 30);
    EXPECT_NEAR(b.value, (1 - eps) * std::exp(-1.0), 1e-5);
}

TEST(BruteMgf, SymmetricShortPaths) {
    BruteMgf b = brute_mgf(symmetric(), -0.1, 1, 25);
    MgfSolve s = hit_mgf(symmetric(), -0.1, 1, 300);
    EXPECT_LE(b.value, s.at(0) + 1e-12);
    EXPECT_GE(b.value + b.tail_bound, s.at(0));
}

TEST(BruteMgf, CounterexampleLaw) {
    Environment e = Environment::homogeneous(counterexample_law(), 1.0 / 7);
    BruteMgf b = brute_mgf(e, -1.0, 1, 200);
    MgfSolve s = hit_mgf(e, -1.0, 1, 200);
    EXPECT_LT(b.tail_bound, 1e-80);
    EXPECT_NEAR(b.value, s.at(0), 1e-12);
}

TEST(ULimit, SymmetricClosedForm) {
    ULimit u = u_limit(symmetric(), -0.1);
    ASSERT_TRUE(u.converged);
    EXPECT_NEAR(u.at(0, 1), kXRight, 1e-10);
    EXPECT_NEAR(u.at(0, 1), 1 / kZeta, 1e-10);
}

TEST(ULimit, HomogeneousTranslationInvariant) {
    Environment e = Environment::homogeneous(law2(0.05, 0.2, 0.4, 0.35), 0.2);
    ULimit u = u_limit(e, -0.7, -5, 5);
    for (long long x = -5; x <= 5; ++x)
        for (int z : {-2, -1, 1, 2}) EXPECT_NEAR(u.log_at(x, z), u.log_at(0, z), 1e-10);
}

TEST(ULimit, CocycleAndBounds) {
    for (const Environment& e : periodic_corpus()) {
        for (double r : {-2.0, -0.5, -0.1}) {
            ULimit u = u_limit(e, r);
            ASSERT_TRUE(u.converged);
            EXPECT_LE(cocycle_defect(u), 1e-8);
            const double de = e.delta() * std::exp(r);
            for (long long x = 0; x < static_cast<long long>(e.period()); ++x) {
                EXPECT_NEAR(u.log_at(x, 1) + u.log_at(x + 1, -1), 0.0, 1e-8);
                for (int z : JumpLaw::offsets(e.B())) {
                    double lo = std::abs(z) * std::log(de);
                    EXPECT_GE(u.log_at(x, z), lo - 1e-10);
                    EXPECT_LE(u.log_at(x, z), -lo + 1e-10);
                }
            }
        }
    }
}

TEST(ULimit, WindowCocycle) {
    std::vector<LawAtom> atoms = {{0.5, law2(0.1, 0.2, 0.4, 0.3)}, {0.5, law2(0.1, 0.4, 0.3, 0.2)}};
    Environment w = sample_iid(atoms, -3000, 3000, 7, 0.1);
    ULimit u = u_limit(w, -1.0, -20, 20);
    ASSERT_TRUE(u.converged);
    EXPECT_LE(cocycle_defect(u), 1e-8);
}

TEST(ULimit, QgotSandwich) {
    // u_{r,n}(x) E_0[e^{r tau_x}] with u_{r,n}(x) = h_n(x) / h_n(0).
    std::vector<Environment> envs = {Environment::homogeneous(counterexample_law(), 1.0 / 7), random_periodic(21, 3, 2),
                                     two_cycle()};
    for (const Environment& e : envs) {
        const double r = -0.5, n = 20;
        const double de = e.delta() * std::exp(r);
        const double bound = std::pow(de, 4.0 * (e.B() - 1));
        MgfSolve hn = hit_mgf(e, r, static_cast<long long>(n), 400);
        for (long long x = 1; x < 20; ++x) {
            MgfSolve hx = hit_mgf(e, r, x, 400);
            double q = hn.at(x) / hn.at(0) * hx.at(0);
            if (e.B() == 1) {
                EXPECT_NEAR(q, 1.0, 1e-10);
            } else {
                EXPECT_GE(q, bound * (1 - 1e-10));
                EXPECT_LE(q, (1 / bound) * (1 + 1e-10));
            }
        }
    }
}

TEST(Zeta, SymmetricRecurrent) {
    ZetaNN z = zeta_nn(symmetric(), 0.0, 1e-12);
    EXPECT_NEAR(z.at(0), 1.0, 1e-5);
}

TEST(Zeta, SymmetricClosedForm) {
    ZetaNN z = zeta_nn(symmetric(), -0.1);
    EXPECT_NEAR(z.at(0), kZeta, 1e-13);
    EXPECT_NEAR(z.at(17), kZeta, 1e-13);
}

TEST(Zeta, TwoCycle) {
    ZetaNN z = zeta_nn(two_cycle(), -0.2);
    EXPECT_NEAR(z.at(0), kZeta0, 1e-13);
    EXPECT_NEAR(z.at(1), kZeta1, 1e-13);
    EXPECT_NEAR(z.at(2), kZeta0, 1e-13);
    EXPECT_LE(z.residual, 1e-13);
}

TEST(Zeta, MatchesULimit) {
    ULimit u = u_limit(two_cycle(), -0.2);
    ZetaNN z = zeta_nn(two_cycle(), -0.2);
    EXPECT_NEAR(u.log_at(0, 1), -std::log(z.at(0)), 1e-10);
    EXPECT_NEAR(u.log_at(1, 1), -std::log(z.at(1)), 1e-10);
}

TEST(Lambda, SymmetricAtZero) {
    LambdaValue l = lambda(symmetric(), 0.0);
    EXPECT_TRUE(l.finite);
    EXPECT_NEAR(l.value, 0.0, 1e-6);
}

TEST(Lambda, SymmetricClosedForm) {
    LambdaValue l = lambda(symmetric(), -0.1);
    EXPECT_NEAR(l.value, kLambda, 1e-10);
    EXPECT_NEAR(lambda_bar(symmetric(), -0.1).value, l.value, 1e-12);
}

TEST(Lambda, CounterexampleRoots) {
    Environment e = Environment::homogeneous(counterexample_law(), 1.0 / 7);
    for (const CePoint& p : kCe) {
        EXPECT_NEAR(lambda(e, p.r).value, p.lambda, 1e-9) << p.r;
        EXPECT_NEAR(lambda_bar(e, p.r).value, p.lambda_bar, 1e-9) << p.r;
    }
}

TEST(Lambda, NearestNeighborGapIsMeanLogRho) {
    Environment e = two_cycle();
    const double rho = 0.5 * (std::log(0.25) + std::log(1.5));
    for (double r : {-0.2, -1.0, -3.0}) EXPECT_NEAR(lambda_bar(e, r).value - lambda(e, r).value, rho, 1e-9);
}

TEST(Lambda, ConvexAndBounded) {
    for (const Environment& e : periodic_corpus()) {
        std::vector<double> v;
        for (int k = 0; k <= 12; ++k) {
            double r = -3.0 + 0.2 * k;
            LambdaValue l = lambda(e, r);
            ASSERT_TRUE(l.finite);
            EXPECT_LE(l.value, -std::log(e.delta() * std::exp(r)));
            v.push_back(l.value);
        }
        for (std::size_t i = 1; i + 1 < v.size(); ++i) EXPECT_GE(v[i + 1] - 2 * v[i] + v[i - 1], -1e-9);
    }
}

TEST(Lambda, InfiniteAboveRc) {
    LambdaValue l = lambda(symmetric(), 0.1);
    EXPECT_FALSE(l.finite);
    EXPECT_TRUE(std::isinf(l.value));
}

TEST(LambdaCurve, RowsAndDivergence) {
    auto rows = lambda_curve(two_cycle(), {-1.0, -0.5, 0.5});
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_TRUE(rows[0].converged);
    EXPECT_GT(rows[0].n_used, 0);
    EXPECT_FALSE(rows[2].converged);
    EXPECT_TRUE(std::isinf(rows[2].lambda));
}

TEST(Rc, SymmetricIsZero) {
    RcEstimate rc = estimate_rc(symmetric());
    EXPECT_LE(rc.width(), 1e-8);
    EXPECT_LE(rc.lo - rc.truncation_bias, 0.0);
    EXPECT_GE(rc.hi, 0.0);
}

TEST(Rc, CounterexampleIsZero) {
    RcEstimate rc = estimate_rc(Environment::homogeneous(counterexample_law(), 1.0 / 7));
    EXPECT_LE(rc.lo - rc.truncation_bias, 0.0);
    EXPECT_GE(rc.hi, 0.0);
}

TEST(Rc, TwoCycle) {
    RcEstimate rc = estimate_rc(two_cycle());
    EXPECT_LE(rc.lo - rc.truncation_bias, kTwoCycleRc);
    EXPECT_GE(rc.hi, kTwoCycleRc);
}

TEST(Rc, ReflectionAgreesAndBelowLogDelta) {
    for (const Environment& e : periodic_corpus()) {
        RcOptions o;
        RcEstimate rc = estimate_rc(e, o);
        EXPECT_LE(rc.direction_gap(), 2 * o.tol);
        EXPECT_LE(rc.lo, -std::log(e.delta()));
    }
}

TEST(CharPoly, CounterexampleCoefficientsAtZero) {
    CharPolyResult c = char_poly_roots(counterexample_law(), 0.0);
    const double expect[] = {1, 3, -7, 1, 2};
    ASSERT_EQ(c.coefficients.size(), 5u);
    for (int k = 0; k < 5; ++k) EXPECT_NEAR(7 * c.coefficients[k], expect[k], 1e-14);
    EXPECT_NEAR(c.eval(1.0), 0.0, 1e-15);
}

TEST(CharPoly, SymmetricQuadratic) {
    CharPolyResult c = char_poly_roots(nn(0.5), -0.1);
    ASSERT_TRUE(c.x_right && c.x_left);
    EXPECT_NEAR(*c.x_right, kXRight, 1e-12);
    EXPECT_NEAR(*c.x_left, kZeta, 1e-12);
}

TEST(CharPoly, CounterexampleLawAtMinusOne) {
    CharPolyResult c = char_poly_roots(counterexample_law(), -1.0);
    ASSERT_TRUE(c.x_right && c.x_left);
    EXPECT_LE(c.max_residual, 1e-10);
    EXPECT_LE(c.positive_roots.size(), 2u);
    Environment e = Environment::homogeneous(counterexample_law(), 1.0 / 7);
    EXPECT_NEAR(-std::log(*c.x_right), lambda(e, -1.0).value, 1e-6);
}

TEST(CharPoly, OracleAgreementAcrossCorpus) {
    for (const Environment& e : homogeneous_corpus())
        for (double r : {-0.25, -0.5, -1.0, -2.0}) {
            CharPolyResult c = char_poly_roots(e.law_at(0), r);
            ASSERT_TRUE(c.x_right && c.x_left);
            EXPECT_NEAR(lambda(e, r).value, -std::log(*c.x_right), 1e-6);
            EXPECT_NEAR(lambda_bar(e, r).value, std::log(*c.x_left), 1e-6);
        }
}
