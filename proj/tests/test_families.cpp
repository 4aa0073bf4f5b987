#include "qvh/families.hpp"
#include "qvh/hedging.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace qvh;

namespace {
Vec v5(double s, double v, double qs, double qv, double l) {
    Vec x(5);
    x << s, v, qs, qv, l;
    return x;
}
}  // namespace

TEST(Families, TvsValue) {
    auto F = family(Family::TVS, {1, 0, 0});
    Vec x(3);
    x << 1, 0.5, 2;
    EXPECT_DOUBLE_EQ(F(x), 1.5);
}

TEST(Families, MfvvLogContract) {
    auto F = family(Family::MFVV, {1, 0, 0});
    auto x = v5(1.7, 0.3, 0.2, 0.1, 0.0);
    EXPECT_NEAR(F(x), -2 * std::log(1.7) + 0.3, 1e-14);
}

TEST(Families, MfivVarianceSwap) {
    Ingredients ing;
    auto F = family(Family::MFIV, {1, 1}, ing);
    auto x = v5(1.3, 0.05, 0.02, 0.4, 0.0);
    EXPECT_NEAR(F(x), 0.05 + 0.02, 1e-14);
    EXPECT_LT(residual(F, *five_component_spec(ing), default_box(Family::MFIV)).max_abs, 1e-10);
}

TEST(Families, AnalyticDerivativesMatchDifferences) {
    Ingredients ing;
    ing.kappa = 1.0;
    for (auto tag : {Family::MFIV, Family::MFVV, Family::MFIL}) {
        auto F = family(tag, {0.7, -1.2, 0.4, 2.0}, ing);
        auto x = v5(1.2, 0.1, 0.3, 0.2, 0.4);
        EXPECT_LT((F.grad(x) - F.fd_gradient(x)).cwiseAbs().maxCoeff(), 1e-7) << to_string(tag);
        EXPECT_LT((F.hess(x) - F.fd_hessian(x)).cwiseAbs().maxCoeff(), 1e-5) << to_string(tag);
    }
}

TEST(Families, NamesRoundTrip) {
    for (auto f : {Family::TVS, Family::MFIV, Family::MFVV, Family::MFIL}) EXPECT_EQ(family_from_string(to_string(f)), f);
    EXPECT_THROW(family_from_string("XYZ"), ParameterError);
}

TEST(Adjudicate, Mfvv) {
    auto r = adjudicate(Family::MFVV, {}, default_box(Family::MFVV));
    EXPECT_FALSE(r.discrepancy);
    EXPECT_LT(r.chosen().residual, 1e-10);
}

TEST(Adjudicate, MfivSelectsHalf) {
    auto r = adjudicate(Family::MFIV, {}, default_box(Family::MFIV));
    EXPECT_TRUE(r.discrepancy);
    EXPECT_DOUBLE_EQ(r.chosen().coefficient, 0.5);
    EXPECT_LT(r.chosen().residual, 1e-8);
    for (auto& v : r.variants)
        if (v.stated) EXPECT_GE(v.residual, 0.1);
}

TEST(Adjudicate, MfilSelectsOne) {
    auto r = adjudicate(Family::MFIL, {}, default_box(Family::MFIL));
    EXPECT_TRUE(r.discrepancy);
    EXPECT_DOUBLE_EQ(r.chosen().coefficient, 1.0);
    EXPECT_LT(r.chosen().residual, 1e-8);
    for (auto& v : r.variants)
        if (v.stated) EXPECT_GE(v.residual, 0.1);
}

TEST(Adjudicate, NonAffineRatioFails) {
    Ingredients ing;
    ing.w_s = Fn1::constant(1.0);
    EXPECT_THROW(adjudicate(Family::MFIV, ing, default_box(Family::MFIV)), AdjudicationFailure);
}

TEST(DoublePrimitive, Examples) {
    auto G = g_double_primitive(Fn1::square(), 0.0);
    for (double x : {0.5, 1.0, 2.0}) EXPECT_NEAR(G(x), x * x * x / 3, 1e-12);
    auto L = g_double_primitive(Fn1::neglog(), 1.0);
    for (double x : {0.5, 1.0, 2.0}) EXPECT_NEAR(L(x), 2 * (x * std::log(x) - x + 1), 1e-12);
    auto g = Fn1::custom([](double x) { return std::exp(x); });
    auto C = g_double_primitive(g, 0.8);
    EXPECT_NEAR(C(0.8), 0.0, 1e-10);
    EXPECT_NEAR(C.d1(0.8), 0.0, 1e-6);
    EXPECT_NEAR(C.d2(1.3), 1.3 * std::exp(1.3), 1e-6);
}

TEST(AzemaYor, ConstantPathIsZero) {
    Path p{TimeGrid::uniform(1.0, 10), std::vector<double>(11, 1.5)};
    for (auto v : {Extremum::Max, Extremum::Min})
        for (double r : azema_yor_residual(p, v)) EXPECT_EQ(r, 0.0);
}

TEST(AzemaYor, LinearIncreasingPath) {
    const int N = 100;
    std::vector<double> s(N + 1);
    for (int k = 0; k <= N; ++k) s[k] = 1.0 + 0.5 * k / N;
    auto r = azema_yor_residual({TimeGrid::uniform(1.0, N), s});
    double dS = 0.5 / N;
    EXPECT_NEAR(r.back(), -N * dS * dS, 1e-14);
}

TEST(AzemaYor, SlopeVariantOnGbm) {
    auto p = simulate(model::GBM{1, 0.2}, TimeGrid::uniform(1.0, 1 << 12), 3).path("S");
    auto r = azema_yor_residual(p, Extremum::Max, Fn1::identity());
    EXPECT_LT(std::abs(r.back()), 1e-2);
}

TEST(CoordinateChange, Identity) {
    ScalarField F;
    F.value = [](const Vec& x) { return x[0]; };
    auto D = change_coordinates(F, Direction::MaxToDrawdown);
    Vec x(3);
    x << 1.2, 0.04, 0.1;
    EXPECT_DOUBLE_EQ(D(x), 1.2);
}

TEST(CoordinateChange, DrawdownClockToMax) {
    ScalarField D;
    D.value = [](const Vec& x) { return x[1] - x[2]; };
    D.gradient = [](const Vec&) { return Vec((Vec(3) << 0.0, 1.0, -1.0).finished()); };
    D.hessian = [](const Vec&) { return Mat(Mat::Zero(3, 3)); };
    auto M = change_coordinates(D, Direction::DrawdownToMax);
    Vec x(3);
    x << 1.0, 1.3, 0.2;
    EXPECT_NEAR(M(x), 0.09 - 0.2, 1e-15);
    // d_q F + 1/2 d_ss F = 0, d_m F = 0 on s = m
    EXPECT_NEAR(M.grad(x)[2] + 0.5 * M.hess(x)(0, 0), 0.0, 1e-12);
    x[1] = 1.0;
    EXPECT_NEAR(M.grad(x)[1], 0.0, 1e-12);
    Vec bad(3);
    bad << 1.0, -0.1, 0.0;
    EXPECT_THROW(change_coordinates(M, Direction::MaxToDrawdown)(bad), DomainError);
}

TEST(CoordinateChange, RoundTrip) {
    ScalarField F;
    F.value = [](const Vec& x) { return std::sin(x[0]) * x[1] * x[1] + x[2]; };
    auto R = change_coordinates(change_coordinates(F, Direction::MaxToDrawdown), Direction::DrawdownToMax);
    for (auto x : halton({{0.5, 1.5}, {1.5, 2.5}, {0, 1}}, 50)) EXPECT_NEAR(R(x), F(x), 1e-10);
}

TEST(Families, TvsDriftMember) {
    model::Spliced sp{std::make_shared<const ModelSpec>(model::GBM{1, 0.2}), tvs_spec(), StoppingSet::always(),
                      Mat::Constant(1, 1, 0.04)};
    auto r = drift_test(family(Family::TVS, {1, 0.5, 0}), sp, TimeGrid::uniform(1.0, 256), 500, 2);
    EXPECT_LE(std::abs(r.t), 3);
}
