#pragma once

#include "qvh/paths.hpp"
#include "qvh/pde.hpp"

#include <functional>
#include <optional>
#include <ostream>

namespace qvh {

// F, the functional it is composed with, the stopping set, and the payoff paid on B
// (defaults to F itself).
struct Claim {
    ScalarField F;
    std::shared_ptr<const FunctionalSpec> spec;
    StoppingSet B = StoppingSet::never();
    std::function<double(const Vec&)> payoff;
    std::string name = "claim";
    Box box;  // experiment domain; states outside it are counted as excursions

    double pay(const Vec& x) const { return payoff ? payoff(x) : F.value(x); }
};

struct HedgeRow {
    std::size_t path = 0;
    bool stopped = false;
    double hit_time = -1;
    double wealth = 0, target = 0, error = 0, max_gap = 0;
    std::size_t excursions = 0;
};

struct HedgeReport {
    std::string model;
    std::vector<HedgeRow> rows;
    double mean_error = 0, se = 0, rms = 0, mean_abs = 0, max_abs = 0;
    double fraction_unstopped = 0;
    std::size_t used = 0, excursions = 0;

    void recompute();
    bool consistent(double tol = 1e-12) const;
    double t_stat() const { return se > 0 ? mean_error / se : 0.0; }
    void write_csv(std::ostream& os) const;
};

struct HedgeTrace {
    HedgeRow row;
    std::vector<double> wealth;  // per grid point (frozen after the hit)
    std::optional<HitResult> hit;
};

// Holdings L^alpha F on each step; wealth and F(X^B) compared along the path.
HedgeTrace hedge_path(const Claim& claim, const PathSet& paths, bool keep_wealth = false);
HedgeReport backtest(const Claim& claim, const PathSource& paths);

// Replicates int_0^T F(X^B_t) dt from T F(X_0) with holdings (T - t_mid) L^alpha F;
// the target is the trapezoidal integral.
HedgeTrace cashflow_path(const Claim& claim, const PathSet& paths, bool keep_wealth = false);
HedgeReport cashflow_backtest(const Claim& claim, const PathSource& paths);

struct SweepReport {
    std::vector<HedgeReport> reports;
    std::vector<std::string> failures;  // "model: message"
    void write_csv(std::ostream& os) const;  // cross-model table
};
SweepReport sweep(const Claim& claim, const std::vector<ModelSpec>& models, const TimeGrid& grid, std::size_t n_paths,
                  std::uint64_t seed);

struct DriftReport {
    double mean = 0, se = 0, t = 0;
    std::size_t windows = 0, paths = 0;
    double trigger_frequency = 0;
    bool inconclusive = false;
    std::vector<double> increments;
};

// E(Y_{tau2} - Y_{tau1}) with Y = F(X) - sum L^alpha F dA, accumulated over the spliced windows.
DriftReport drift_test(const ScalarField& F, const model::Spliced& spliced, const TimeGrid& grid, std::size_t n_paths,
                       std::uint64_t seed);

// Covariance amplifying the largest entry of L^{alpha,beta} F at x.
Mat suggest_cov(const ScalarField& F, const FunctionalSpec& spec, const Vec& x, double scale = 1.0);

}  // namespace qvh
