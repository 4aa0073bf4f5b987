#include "qvh/paths.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace qvh;

TEST(Paths, ZeroVolGbmIsConstant) {
    auto p = simulate(model::GBM{1.0, 0.0}, TimeGrid::uniform(1.0, 64), 11);
    for (double s : p.at("S")) EXPECT_EQ(s, 1.0);
}

TEST(Paths, GbmTerminalMeanIsS0) {
    const std::size_t n = 100000;
    auto grid = TimeGrid::uniform(1.0, 1 << 12);
    std::vector<double> st(n);
    parallel_for(n, [&](std::size_t i) { st[i] = simulate(model::GBM{1.0, 0.2}, grid, stream_seed(5, i)).at("S").back(); });
    Stats s = summarize(st);
    EXPECT_LE(std::abs(s.mean - 1.0), 3 * s.se);
}

TEST(Paths, HestonIntegratedVarianceMean) {
    const std::size_t n = 4000;
    auto paths = simulate_many(model::Heston{}, TimeGrid::uniform(1.0, 256), n, 3);
    std::vector<double> iv;
    for (auto& p : paths) iv.push_back(p.aux.at("intv").back());
    Stats s = summarize(iv);
    EXPECT_LE(std::abs(s.mean - 0.04), 3 * s.se);
    for (auto& p : paths)
        for (double x : p.at("S")) ASSERT_GT(x, 0.0);
}

TEST(Paths, SameSeedReproduces) {
    auto g = TimeGrid::uniform(1.0, 100);
    auto a = simulate(model::Heston{}, g, 42), b = simulate(model::Heston{}, g, 42);
    EXPECT_EQ(a.at("S"), b.at("S"));
    auto c = simulate(model::Heston{}, g, 43);
    EXPECT_NE(a.at("S"), c.at("S"));
}

TEST(Paths, BadParametersRejected) {
    auto g = TimeGrid::uniform(1.0, 10);
    EXPECT_THROW(simulate(model::GBM{-1.0, 0.2}, g, 1), ParameterError);
    EXPECT_THROW(simulate(model::Heston{1, 0.04, 1.5, 0.04, 0.3, 1.5}, g, 1), ParameterError);
    EXPECT_THROW(TimeGrid::from({0.0, 0.5, 0.4}), ParameterError);
}

TEST(Bubble, Endpoints) {
    auto g = TimeGrid::uniform(1.0, 200);
    auto p = bubble_path(1.0, g, 9);
    EXPECT_EQ(p.values.front(), 1.0);
    EXPECT_EQ(p.values.back(), 0.0);
    for (double y : p.values) EXPECT_GE(y, 0.0);
}

TEST(Bubble, HalfwayMeanIsOne) {
    const std::size_t n = 100000;
    auto g = TimeGrid::uniform(0.5, 8);
    std::vector<double> y(n);
    parallel_for(n, [&](std::size_t i) { y[i] = bubble_path(1.0, g, stream_seed(17, i)).values.back(); });
    Stats s = summarize(y);
    EXPECT_LE(std::abs(s.mean - 1.0), 3 * s.se);
}

TEST(ConvexMarket, CalibrationAtTheMoney) {
    auto c = calibrate_convex(Fn1::call(1.0), 1.0, 0.0797, 1.0);
    EXPECT_NEAR(c.sigma0, 0.2, 1e-3);
    EXPECT_NEAR(c.weight, 0.0, 1e-4);
}

TEST(ConvexMarket, TerminalPayoffAndFeasibility) {
    auto base = std::make_shared<const ModelSpec>(model::GBM{1.0, 0.2});
    model::ConvexClaimMarket m{base, Fn1::call(1.0), 0.1, 1.0};
    auto p = market_paths_convex(m, TimeGrid::uniform(1.0, 512), 4);
    double s = p.at("S").back(), c = p.at("C").back();
    EXPECT_NEAR(c, std::max(s - 1.0, 0.0), 1e-12);
    model::ConvexClaimMarket bad{base, Fn1::neglog(), 0.0, 1.0};
    EXPECT_THROW(market_paths_convex(bad, TimeGrid::uniform(1.0, 8), 1), InfeasibleMarket);
}

TEST(ConvexMarket, HestonBaseLogContract) {
    auto base = std::make_shared<const ModelSpec>(model::Heston{});
    model::ConvexClaimMarket m{base, Fn1::neglog(), 0.04, 1.0};
    auto p = market_paths_convex(m, TimeGrid::uniform(1.0, 512), 8);
    EXPECT_NEAR(p.at("C").front(), 0.04, 1e-12);
    EXPECT_NEAR(p.at("C").back(), -2 * std::log(p.at("S").back()), 1e-12);
}

namespace {
std::shared_ptr<const FunctionalSpec> s_qv() {
    return std::make_shared<FunctionalSpec>(std::vector<std::string>{"S"},
                                            std::vector<Component>{comp::Asset{"S"}, comp::WeightedQV{0, {}}});
}
}  // namespace

TEST(Splice, ImmediateTriggerIsBrownian) {
    model::Spliced sp{std::make_shared<const ModelSpec>(model::GBM{1.0, 0.0}), s_qv(), StoppingSet::always(),
                      Mat::Identity(1, 1)};
    auto g = TimeGrid::uniform(1.0, 1 << 10);
    auto p = splice(sp, g, 2);
    EXPECT_FALSE(p.unspliced);
    EXPECT_EQ(p.splice_begin, 0);
    auto qv = quadratic_covariation(p.path("S"), p.path("S"));
    // segment runs to (T + 0)/2
    EXPECT_NEAR(qv.back(), 0.5, 0.15);
}

TEST(Splice, RealizedQvMatchesCovariance) {
    model::Spliced sp{std::make_shared<const ModelSpec>(model::GBM{1.0, 0.0}), s_qv(), StoppingSet::always(),
                      Mat::Constant(1, 1, 4.0), StoppingSet::never(), 2.0};
    auto p = splice(sp, TimeGrid::uniform(2.0, 1 << 15), 6);
    auto qv = quadratic_covariation(p.path("S"), p.path("S"));
    EXPECT_NEAR(qv.back(), 4.0, 0.08);
}

TEST(Splice, FarTriggerLeavesPathUnspliced) {
    model::Spliced sp{std::make_shared<const ModelSpec>(model::GBM{1.0, 0.2}), s_qv(), StoppingSet::level(0, 2.0),
                      Mat::Identity(1, 1)};
    auto g = TimeGrid::uniform(0.01, 64);
    int unspliced = 0;
    for (int i = 0; i < 200; ++i) unspliced += splice(sp, g, stream_seed(1, i)).unspliced;
    EXPECT_GE(unspliced, 199);
}

TEST(Paths, CsvIsDeterministic) {
    auto g = TimeGrid::uniform(1.0, 16);
    std::ostringstream a, b;
    write_csv(simulate(model::GBM{}, g, 1), a);
    write_csv(simulate(model::GBM{}, g, 1), b);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(a.str().substr(0, 6), "time,S");
}
