#include "qvh/market.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace qvh;

TEST(BlackScholes, ConvexClaims) {
    EXPECT_DOUBLE_EQ(bs_convex(Fn1::call(1.0), 1.3, 0.0), 0.3);
    EXPECT_NEAR(bs_convex(Fn1::call(1.0), 1.0, 0.04), 0.0797, 1e-4);
    EXPECT_NEAR(bs_convex(Fn1::square(), 1.0, 0.04), std::exp(0.04), 1e-12);
    auto cube = Fn1::custom([](double x) { return x * x * x; });
    EXPECT_NEAR(bs_convex(cube, 1.0, 0.04), std::exp(3 * 0.04), 1e-9);
}

TEST(BlackScholes, ImpliedSigmaRoundTrip) {
    double p = bs_convex(Fn1::neglog(), 1.0, 0.3 * 0.3 * 2.0);
    EXPECT_NEAR(bs_implied_sigma(Fn1::neglog(), 1.0, 2.0, p), 0.3, 1e-8);
}

TEST(CheckStrip, BlackScholesPasses) {
    auto a = check_strip(CallStrip::black_scholes(1.0, {0.9, 1.0, 1.1}, 0.2, 1.0));
    EXPECT_TRUE(a.pass);
    EXPECT_TRUE(a.violated.empty());
}

TEST(CheckStrip, ChordFails) {
    auto s = CallStrip::black_scholes(1.0, {0.9, 1.0, 1.1}, 0.2, 1.0);
    s.prices[1] = 0.5 * (s.prices[0] + s.prices[2]);
    auto a = check_strip(s);
    EXPECT_FALSE(a.pass);
    EXPECT_NEAR(a.delta_min, 0.0, 1e-14);
    EXPECT_NE(std::find(a.violated.begin(), a.violated.end(), "delta_min"), a.violated.end());
}

TEST(CheckStrip, ZeroTopPriceFails) {
    auto s = CallStrip::black_scholes(1.0, {0.9, 1.0, 1.1}, 0.2, 1.0);
    s.prices[2] = 0.0;
    auto a = check_strip(s);
    EXPECT_FALSE(a.pass);
    EXPECT_LE(a.v_min, 0.0);
}

TEST(CheckStrip, MalformedRejected) {
    CallStrip s{1.0, {1.0, 0.9}, {0.1, 0.2}};
    EXPECT_THROW(s.validate(), ParameterError);
}

TEST(Dupire, FlatOutsidePatchAndAnchors) {
    auto strip = CallStrip::black_scholes(1.0, {0.8, 0.9, 1.0, 1.1, 1.2}, 0.25, 1.0);
    auto S = dupire_calibrate(strip, 1.0);
    EXPECT_EQ(S(0.5 * S.a1, 0.8), S.sigma0);
    EXPECT_EQ(S(1.0, 0.3), S.sigma0);
    EXPECT_EQ(S(S.a2 * 1.5, 0.9), S.sigma0);
    for (std::size_t i = 0; i < strip.size(); ++i) EXPECT_NEAR(S.call(strip.strikes[i]), strip.prices[i], 1e-5);
    EXPECT_GT(S.l, 0.0);
}

TEST(Dupire, InfeasibleStripRejected) {
    auto s = CallStrip::black_scholes(1.0, {0.9, 1.0, 1.1}, 0.2, 1.0);
    s.prices[1] = 0.5 * (s.prices[0] + s.prices[2]);
    EXPECT_THROW(dupire_calibrate(s, 1.0), InfeasibleMarket);
}

TEST(Dupire, DeepInTheMoneyPinch) {
    auto strip = CallStrip::black_scholes(1.0, {0.8, 0.85, 0.9, 0.95, 1.0, 1.05, 1.1, 1.15, 1.2}, 0.05, 1.0);
    auto S = dupire_calibrate(strip, 1.0);
    EXPECT_GT(S.a1, 0.0);
    EXPECT_TRUE(std::isfinite(S.u));
    for (std::size_t i = 0; i < strip.size(); ++i) EXPECT_NEAR(S.call(strip.strikes[i]), strip.prices[i], 1e-5);
}

TEST(Reprice, FlatSurfaceAtTheMoney) {
    LocalVolSurface flat;
    flat.sigma0 = 0.2;
    flat.l = flat.u = 0.2;
    CallStrip atm{1.0, {1.0, 1.1}, {bs_call(1.0, 1.0, 0.04), bs_call(1.0, 1.1, 0.04)}};
    auto r = reprice(flat, atm, 200000, TimeGrid::uniform(1.0, 64), 5);
    EXPECT_LE(std::abs(r.prices[0] - atm.prices[0]), 3 * r.se[0]);
}

TEST(Reprice, ZeroVolIsIntrinsic) {
    LocalVolSurface flat;
    flat.sigma0 = 0.0;
    CallStrip s{1.0, {0.8, 1.0, 1.2}, {0.2, 0.0, 0.0}};
    auto r = reprice(flat, s, 100, TimeGrid::uniform(1.0, 16), 5);
    EXPECT_NEAR(r.prices[0], 0.2, 1e-14);
    EXPECT_EQ(r.prices[1], 0.0);
    EXPECT_EQ(r.prices[2], 0.0);
    EXPECT_NEAR(r.se[0], 0.0, 1e-14);
}

TEST(Support, GbmInterval) {
    auto r = support_diagnostic(model::GBM{1.0, 0.2}, 1.0, 0.9, 1.1, 40000, 3);
    double p = norm_cdf((std::log(1.1) + 0.02) / 0.2) - norm_cdf((std::log(0.9) + 0.02) / 0.2);
    EXPECT_NEAR(r.probability, p, 4 * r.se);
    EXPECT_NEAR(p, 0.38, 0.01);
    EXPECT_TRUE(r.strict);
}

TEST(Support, AbsorbedToy) {
    model::LocalVol toy{0.5, [](double s, double) { return s < 0.8 ? 0.0 : 0.2; }, 0.0, 0.2, "absorbed"};
    auto r = support_diagnostic(toy, 1.0, 0.9, 1.1, 2000, 3);
    EXPECT_EQ(r.probability, 0.0);
    EXPECT_FALSE(r.strict);
}

TEST(Support, EmptyIntervalRejected) {
    EXPECT_THROW(support_diagnostic(model::GBM{}, 1.0, 1.1, 0.9, 10, 1), ParameterError);
}
