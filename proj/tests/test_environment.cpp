#include "corpus.hpp"
#include "rwre/environment.hpp"
#include "rwre/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rwre;
using namespace rwre::test;

TEST(Rng, KnownAnswers) {
    EXPECT_EQ(CounterRng(1, 0).at(0), 0x810145e2f14b896dULL);
    EXPECT_EQ(CounterRng(1, 0).at(1), 0x79e1e88840bb343bULL);
    EXPECT_EQ(CounterRng(42, 7).at(1000), 0xe7e5561ab69a5e60ULL);
}

TEST(Rng, SequentialMatchesCounter) {
    CounterRng a(9, 3);
    const CounterRng b(9, 3);
    for (std::uint64_t k = 0; k < 100; ++k) EXPECT_EQ(a(), b.at(k));
}

TEST(Rng, StreamsDiffer) {
    EXPECT_NE(CounterRng(5, 0).at(0), CounterRng(5, 1).at(0));
    EXPECT_NE(CounterRng(5, 0).at(0), CounterRng(6, 0).at(0));
}

TEST(Rng, UniformInUnitInterval) {
    CounterRng r(3);
    double s = 0.0;
    for (int k = 0; k < 100000; ++k) {
        double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        s += u;
    }
    EXPECT_NEAR(s / 100000, 0.5, 3 * std::sqrt(1.0 / 12 / 100000));
}

TEST(JumpLaw, RejectsZeroAndOutOfRange) {
    EXPECT_THROW(JumpLaw(2, {{0, 0.5}}), InvalidArgument);
    EXPECT_THROW(JumpLaw(1, {{2, 0.5}}), InvalidArgument);
    EXPECT_THROW(JumpLaw(0), InvalidArgument);
}

TEST(JumpLaw, SlotsRoundTrip) {
    for (int B = 1; B <= 4; ++B)
        for (std::size_t k = 0; k < static_cast<std::size_t>(2 * B); ++k)
            EXPECT_EQ(JumpLaw::slot(B, JumpLaw::offset_at(B, k)), k);
    EXPECT_EQ(JumpLaw::offsets(2), (std::vector<int>{-2, -1, 1, 2}));
}

TEST(JumpLaw, MeanAndReflection) {
    JumpLaw l = counterexample_law();
    EXPECT_NEAR(l.mean(), 0.0, 1e-15);
    JumpLaw r = nn(0.7).reflected();
    EXPECT_DOUBLE_EQ(r(1), 0.3);
    EXPECT_DOUBLE_EQ(r(-1), 0.7);
}

TEST(Environment, LawAtHomogeneous) {
    Environment e = Environment::homogeneous(nn(0.6), 0.3);
    for (long long x : {-1000LL, -1LL, 0LL, 7LL, 123456789LL}) EXPECT_EQ(e.law_at(x), nn(0.6));
}

TEST(Environment, LawAtPeriodicWraps) {
    JumpLaw p0 = nn(0.8), p1 = nn(0.4);
    Environment e = Environment::periodic({p0, p1}, 0.2);
    EXPECT_EQ(e.law_at(2), p0);
    EXPECT_EQ(e.law_at(-1), p1);
    for (long long x = -20; x <= 20; ++x)
        for (long long k : {-5LL, 3LL, 1000000LL}) EXPECT_EQ(e.law_at(x), e.law_at(x + 2 * k));
}

TEST(Environment, MixedBRejected) {
    EXPECT_THROW(Environment::periodic({nn(0.5), law2(0.1, 0.4, 0.4, 0.1)}, 0.1), InvalidArgument);
}

TEST(Environment, WindowBoundsAndExhaustion) {
    EXPECT_THROW(Environment::sampled_window({nn(0.5), nn(0.5)}, 0, 1, 0.1), InvalidArgument);
    Environment w = Environment::sampled_window({nn(0.5), nn(0.6), nn(0.7)}, -1, 1, 0.1);
    EXPECT_EQ(w.law_at(1), nn(0.7));
    EXPECT_THROW(w.law_at(2), WindowExhausted);
    EXPECT_THROW(w.law_at(-2), WindowExhausted);
}

TEST(Reflect, SymmetricFixedPoint) {
    Environment e = symmetric();
    EXPECT_EQ(reflect(e).law_at(0), e.law_at(0));
}

TEST(Reflect, NegatesOffsets) {
    Environment r = reflect(Environment::homogeneous(nn(0.7), 0.3));
    EXPECT_DOUBLE_EQ(r.law_at(0)(1), 0.3);
    EXPECT_DOUBLE_EQ(r.law_at(0)(-1), 0.7);
}

TEST(Reflect, PeriodicIndexMap) {
    Environment e = Environment::periodic({nn(0.8), nn(0.4), nn(0.3)}, 0.2);
    Environment r = reflect(e);
    for (long long i = -6; i <= 6; ++i) EXPECT_EQ(r.law_at(i), e.law_at(-i).reflected());
}

TEST(Reflect, Involution) {
    for (const Environment& e : periodic_corpus()) {
        Environment rr = reflect(reflect(e));
        ASSERT_EQ(rr.period(), e.period());
        for (long long i = 0; i < static_cast<long long>(e.period()); ++i) EXPECT_EQ(rr.law_at(i), e.law_at(i));
    }
    std::vector<LawAtom> atoms = {{0.5, nn(0.6)}, {0.5, nn(0.3)}};
    Environment w = sample_iid(atoms, -50, 60, 4, 0.2);
    Environment rr = reflect(reflect(w));
    EXPECT_EQ(rr.x_lo(), w.x_lo());
    EXPECT_EQ(rr.x_hi(), w.x_hi());
    for (long long x = w.x_lo(); x <= w.x_hi(); ++x) EXPECT_EQ(rr.law_at(x), w.law_at(x));
}

TEST(Validate, SymmetricClean) { EXPECT_TRUE(validate(symmetric()).ok()); }

TEST(Validate, EllipticityViolation) {
    Environment e = Environment::homogeneous(nn(0.99), 0.05);
    auto d = validate(e);
    ASSERT_FALSE(d.ok());
    EXPECT_EQ(d.violations.front().kind, EnvViolation::Kind::ellipticity);
}

TEST(Validate, NormalizationViolation) {
    Environment e = Environment::homogeneous(JumpLaw(1, {{-1, 0.49}, {1, 0.5}}), 0.1);
    auto d = validate(e);
    ASSERT_FALSE(d.ok());
    EXPECT_EQ(d.violations.front().kind, EnvViolation::Kind::normalization);
}

TEST(Validate, ZeroOffOneAllowed) {
    Environment e = Environment::homogeneous(law2(0.0, 0.5, 0.3, 0.2), 0.2);
    EXPECT_TRUE(validate(e).ok());
}

TEST(SampleIid, SingleAtomIsConstant) {
    std::vector<LawAtom> atoms = {{1.0, nn(0.6)}};
    Environment w = sample_iid(atoms, -100, 100, 1, 0.3);
    for (long long x = -100; x <= 100; ++x) EXPECT_EQ(w.law_at(x), nn(0.6));
}

TEST(SampleIid, Deterministic) {
    std::vector<LawAtom> atoms = {{0.5, nn(0.6)}, {0.5, nn(0.3)}};
    Environment a = sample_iid(atoms, -500, 500, 77, 0.2), b = sample_iid(atoms, -500, 500, 77, 0.2);
    for (long long x = -500; x <= 500; ++x) EXPECT_EQ(a.law_at(x), b.law_at(x));
}

TEST(SampleIid, AtomFrequency) {
    std::vector<LawAtom> atoms = {{0.5, nn(0.6)}, {0.5, nn(0.3)}};
    Environment w = sample_iid(atoms, -5000, 4999, 2024, 0.2);
    double hits = 0;
    for (long long x = -5000; x < 5000; ++x) hits += w.law_at(x) == nn(0.6);
    EXPECT_NEAR(hits / 1e4, 0.5, 3 * std::sqrt(0.25 / 1e4));
}

TEST(SampleIid, ValidWhenAtomsValid) {
    std::vector<LawAtom> atoms = {{0.2, law2(0.1, 0.3, 0.3, 0.3)}, {0.8, law2(0.25, 0.25, 0.25, 0.25)}};
    EXPECT_TRUE(validate(sample_iid(atoms, -300, 300, 5, 0.25)).ok());
}
