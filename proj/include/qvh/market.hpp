#pragma once

#include "qvh/bs.hpp"
#include "qvh/paths.hpp"

namespace qvh {

struct CallStrip {
    double s0 = 1.0;
    std::vector<double> strikes;  // k_2 < ... < k_d
    std::vector<double> prices;   // C^2 ... C^d

    void validate() const;
    std::size_t size() const { return strikes.size(); }
    // with C^1 = s0 at k_1 = 0
    std::vector<double> time_values() const;  // V^i
    std::vector<double> slopes() const;       // D^i, i = 2..d
    std::vector<double> kinks() const;        // Delta^i, i = 3..d

    static CallStrip black_scholes(double s0, std::vector<double> strikes, double sigma, double T);
};

struct ArbReport {
    double v_min = 0, delta_min = 0, d2 = 0, dd = 0;
    bool pass = false;
    std::vector<std::string> violated;
};

// Strict inequalities are decided with a 1e-12 margin (relative to s0 for V).
ArbReport check_strip(const CallStrip& strip);

struct LocalVolSurface {
    double s0 = 1.0, T = 1.0, sigma0 = 0.2;
    double a1 = 0, a2 = 0;
    double l = 0, u = 0;
    std::vector<double> k, t;  // patch grid over [a1, a2] x [T/2, T]
    Mat sigma;                 // k.size() x t.size()
    std::vector<std::pair<double, double>> anchors;  // (strike, value) matched at T
    std::vector<double> phi;   // c^I(., T) - c^BS(., T; sigma0) on k
    int blend_power = 1;       // c~ = c^BS + w(t)^p phi

    double operator()(double strike, double time) const;
    // maturity-T call value of the calibrated surface
    double call(double strike) const;
    void write_csv(std::ostream& os) const;
};

struct CalibrationOptions {
    std::size_t nk = 201, nt = 101;
    std::size_t refine = 100;  // density nodes per k-grid cell
};

LocalVolSurface dupire_calibrate(const CallStrip& strip, double T, const CalibrationOptions& opt = {});
// sigma_1 and sigma_2 thresholds; sigma0 is their minimum
std::pair<double, double> sigma_thresholds(const CallStrip& strip, double T);

struct RepriceReport {
    std::vector<double> prices, se, rel_error;
    std::vector<bool> within;  // |error| <= max(1%, 3 SE)
    double max_rel_error = 0;
    bool pass = true;
};

RepriceReport reprice(const LocalVolSurface& surface, const CallStrip& strip, std::size_t n_paths, const TimeGrid& grid,
                      std::uint64_t seed);
ModelSpec as_model(const LocalVolSurface& surface);

struct SupportReport {
    double probability = 0, se = 0;
    double slope_a = 0, slope_b = 0;  // -P(S_t >= a), -P(S_t >= b)
    bool strict = false;
};

SupportReport support_diagnostic(const ModelSpec& model, double t, double a, double b, std::size_t n_paths,
                                 std::uint64_t seed, std::size_t steps = 256);

}  // namespace qvh
