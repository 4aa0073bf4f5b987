#include "qvh/functionals.hpp"
#include "qvh/paths.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace qvh;

namespace {
PathSet values_path(std::vector<double> v) {
    PathSet p;
    p.grid = TimeGrid::uniform(1.0, v.size() - 1);
    p.labels = {"S"};
    p.values = {std::move(v)};
    return p;
}
std::shared_ptr<const FunctionalSpec> make(std::vector<Component> c) {
    return std::make_shared<FunctionalSpec>(std::vector<std::string>{"S"}, std::move(c));
}
}  // namespace

TEST(QuadraticCovariation, Constant) {
    Path p{TimeGrid::uniform(1.0, 5), std::vector<double>(6, 2.0)};
    for (double q : quadratic_covariation(p, p)) EXPECT_EQ(q, 0.0);
}

TEST(QuadraticCovariation, SmallArithmetic) {
    Path p{TimeGrid::uniform(1.0, 2), {1, 2, 4}};
    auto q = quadratic_covariation(p, p);
    ASSERT_EQ(q.size(), 3u);
    EXPECT_EQ(q[0], 0);
    EXPECT_EQ(q[1], 1);
    EXPECT_EQ(q[2], 5);
}

TEST(QuadraticCovariation, GbmLogQv) {
    const int N = 1 << 14, seeds = 100;
    auto g = TimeGrid::uniform(1.0, N);
    double sum = 0, ss = 0;
    for (int i = 0; i < seeds; ++i) {
        auto s = simulate(model::GBM{1.0, 0.2}, g, stream_seed(8, i)).at("S");
        for (double& x : s) x = std::log(x);
        Path lp{g, s};
        double e = quadratic_covariation(lp, lp).back() / 0.04 - 1.0;
        sum += e;
        ss += e * e;
    }
    EXPECT_LT(std::abs(sum / seeds), 0.01);
    // per-seed spread of realized variance is sqrt(2 / N)
    EXPECT_NEAR(std::sqrt(ss / seeds), std::sqrt(2.0 / N), 0.2 * std::sqrt(2.0 / N));
}

TEST(QuadraticCovariation, MisalignedRejected) {
    Path a{TimeGrid::uniform(1.0, 2), {1, 2, 3}}, b{TimeGrid::uniform(1.0, 3), {1, 2, 3, 4}};
    EXPECT_THROW(quadratic_covariation(a, b), AlignmentError);
}

TEST(Track, ConstantPath) {
    auto tp = track(make({comp::Asset{"S"}, comp::WeightedQV{0, {}}}), values_path({1.3, 1.3, 1.3, 1.3}));
    for (std::size_t k = 0; k < tp.size(); ++k) {
        EXPECT_EQ(tp.x(k)[0], 1.3);
        EXPECT_EQ(tp.x(k)[1], 0.0);
    }
}

TEST(Track, MaxAndDrawdown) {
    auto tp = track(make({comp::Asset{"S"}, comp::RunningMax{0}, comp::WeightedQV{0, {}}, comp::DrawdownSq{0}}),
                    values_path({1, 2, 1.5}));
    EXPECT_EQ(tp.x(0)[1], 1);
    EXPECT_EQ(tp.x(1)[1], 2);
    EXPECT_EQ(tp.x(2)[1], 2);
    EXPECT_DOUBLE_EQ(tp.x(0)[3], 0);
    EXPECT_DOUBLE_EQ(tp.x(1)[3], 0);
    EXPECT_DOUBLE_EQ(tp.x(2)[3], 0.25);
    EXPECT_DOUBLE_EQ(tp.x(2)[2], 1.25);
}

TEST(Track, TimeValueVanishesAtMaturity) {
    auto base = std::make_shared<const ModelSpec>(model::GBM{1.0, 0.2});
    auto p = market_paths_convex({base, Fn1::neglog(), 0.06, 1.0}, TimeGrid::uniform(1.0, 256), 3);
    auto spec = std::make_shared<FunctionalSpec>(std::vector<std::string>{"S", "C"},
                                                 std::vector<Component>{comp::TimeValue{"S", "C", Fn1::neglog()}});
    auto tp = track(spec, p);
    EXPECT_NEAR(tp.x(tp.size() - 1)[0], 0.0, 1e-12);
    EXPECT_NEAR(tp.x(0)[0], 0.06, 1e-12);
}

TEST(FunctionalSpec, CoefficientsOfComponents) {
    auto spec = make({comp::Asset{"S"}, comp::Time{}, comp::WeightedQV{0, Weight::inv_sq(0)}, comp::TimeIntegral{0},
                      comp::DrawdownSq{0}});
    Vec x(5);
    x << 2.0, 0.3, 0.1, 0.5, 0.09;
    auto c = spec->coefficients(x);
    EXPECT_EQ(c.alpha(0, 0), 1);
    EXPECT_EQ(c.gamma[1], 1);
    EXPECT_DOUBLE_EQ(c.beta[2](0, 0), 0.25);
    EXPECT_DOUBLE_EQ(c.gamma[3], 2.0);
    EXPECT_NEAR(c.alpha(4, 0), -2 * 0.3, 1e-15);
    EXPECT_DOUBLE_EQ(c.beta[4](0, 0), 1.0);
    EXPECT_TRUE(spec->in_class(0));
    EXPECT_TRUE(spec->monotone(2));
}

TEST(FunctionalSpec, RunningMaxNotInClass) {
    auto spec = make({comp::Asset{"S"}, comp::RunningMax{0}});
    EXPECT_FALSE(spec->in_class(1));
}

TEST(FunctionalSpec, UnknownAssetRejected) {
    EXPECT_THROW(FunctionalSpec({"S"}, {comp::Asset{"C"}}), SpecError);
    EXPECT_THROW(FunctionalSpec({"S"}, {comp::WeightedQV{3, {}}}), SpecError);
}

TEST(Hitting, GbmClockHitsNearOne) {
    auto spec = make({comp::Asset{"S"}, comp::WeightedQV{0, Weight::inv_sq(0)}});
    auto B = StoppingSet::level(1, 0.04);
    auto g = TimeGrid::uniform(2.0, 1 << 12);
    double sum = 0;
    for (int i = 0; i < 200; ++i) {
        auto tp = track(spec, simulate(model::GBM{1.0, 0.2}, g, stream_seed(21, i)));
        auto h = hitting(tp, B);
        ASSERT_TRUE(h);
        EXPECT_NEAR(h->x[1], 0.04, 1e-12);
        sum += g.times[h->index - 1] + h->phi * (g.times[h->index] - g.times[h->index - 1]);
    }
    double mean = sum / 200;
    EXPECT_GE(mean, 0.95);
    EXPECT_LE(mean, 1.05);
}

TEST(Hitting, CorridorOnConstantPathNeverExits) {
    auto tp = track(make({comp::Asset{"S"}}), values_path({1, 1, 1, 1}));
    EXPECT_FALSE(hitting(tp, StoppingSet::corridor_exit(0, 0.5, 2.0)));
}

TEST(Hitting, StartOnBoundary) {
    auto tp = track(make({comp::Asset{"S"}}), values_path({1, 1.1, 0.9}));
    auto h = hitting(tp, StoppingSet::level(0, 1.0));
    ASSERT_TRUE(h);
    EXPECT_EQ(h->index, 0u);
}

TEST(Hitting, UnionFiresOnFirstPart) {
    auto tp = track(make({comp::Asset{"S"}}), values_path({1, 1.2, 1.6, 2.5}));
    auto h = hitting(tp, StoppingSet::unite({StoppingSet::level(0, 3.0), StoppingSet::corridor_exit(0, 0.5, 2.0)}));
    ASSERT_TRUE(h);
    EXPECT_EQ(h->index, 3u);
}
