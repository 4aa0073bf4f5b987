#pragma once

#include "qvh/functionals.hpp"

#include <functional>
#include <memory>
#include <ostream>
#include <type_traits>
#include <variant>

namespace qvh {

struct ModelSpec;

namespace model {
struct GBM {
    double s0 = 1.0, sigma = 0.2;
};
// Euler in log price with sigma clamped to [l, u]; l = 0 is accepted for absorbed toy models.
struct LocalVol {
    double s0 = 1.0;
    std::function<double(double, double)> sigma;  // (price, time)
    double l = 0.0, u = 1.0;
    std::string desc = "local vol";
};
struct Heston {
    double s0 = 1.0, v0 = 0.04, kappa = 1.5, theta = 0.04, xi = 0.3, rho = -0.7;
};
struct Bubble {
    double T = 1.0;
};
// Joint (S, C) market with C_T = g(S_T). Base GBM/LocalVol supply s0 only; a Heston base with
// g = -2 log prices C from the conditional expected variance.
struct ConvexClaimMarket {
    std::shared_ptr<const ModelSpec> base;
    Fn1 g;
    double c0 = 0.0, T = 1.0;
};
struct Spliced {
    std::shared_ptr<const ModelSpec> base;
    std::shared_ptr<const FunctionalSpec> spec;
    StoppingSet trigger = StoppingSet::always();
    Mat cov;
    StoppingSet exit = StoppingSet::never();
    double t_max = 0.0;  // 0: use the grid horizon
};
}  // namespace model

struct ModelSpec {
    std::variant<model::GBM, model::LocalVol, model::Heston, model::Bubble, model::ConvexClaimMarket, model::Spliced> m;

    template <class M>
        requires(!std::is_same_v<std::decay_t<M>, ModelSpec>)
    ModelSpec(M x) : m(std::move(x)) {}
    std::vector<std::string> labels() const;
    std::size_t dim() const { return labels().size(); }
    std::string name() const;
    void validate() const;
};

PathSet simulate(const ModelSpec& model, const TimeGrid& grid, std::uint64_t seed);
// Path i uses the stream stream_seed(seed, i).
std::vector<PathSet> simulate_many(const ModelSpec& model, const TimeGrid& grid, std::size_t n, std::uint64_t seed);

Path bubble_path(double T, const TimeGrid& grid, std::uint64_t seed);
PathSet market_paths_convex(const model::ConvexClaimMarket& spec, const TimeGrid& grid, std::uint64_t seed);
PathSet splice(const model::Spliced& spec, const TimeGrid& grid, std::uint64_t seed);

// sigma_0 and bubble weight of a convex-claim market built on GBM.
struct ConvexCalibration {
    double sigma0 = 0, weight = 0;
};
ConvexCalibration calibrate_convex(const Fn1& g, double s0, double c0, double T);

// Lazily generated collection of paths, so long grids need not be held in memory at once.
struct PathSource {
    std::size_t count = 0;
    std::function<PathSet(std::size_t)> get;

    static PathSource of(std::vector<PathSet> paths);
    static PathSource of(ModelSpec model, TimeGrid grid, std::size_t n, std::uint64_t seed);
};

void write_csv(const PathSet& p, std::ostream& os);

}  // namespace qvh
