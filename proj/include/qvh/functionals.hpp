#pragma once

#include "qvh/functions.hpp"
#include "qvh/grid.hpp"

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace qvh {

namespace comp {
struct Asset { std::string label; };
struct Time {};
struct TimeIntegral { int of; };                      // int x_of dt
struct WeightedQV { int of; Weight w; };              // int w d<x_of>
struct CrossVar { int a, b; Weight w; };              // int w d<x_a, x_b>
struct TimeValue { std::string asset, claim; Fn1 g; };  // C - g(S)
struct RunningMax { int of; };
struct RunningMin { int of; };
struct DrawdownSq { int of; bool max_based = true; };  // (M - S)^2 or (S - m)^2
}  // namespace comp

using Component = std::variant<comp::Asset, comp::Time, comp::TimeIntegral, comp::WeightedQV, comp::CrossVar,
                               comp::TimeValue, comp::RunningMax, comp::RunningMin, comp::DrawdownSq>;

// Coefficient triple of every component at a state: alpha is n x d (row i = alpha^i),
// beta[i] is d x d, gamma is n.
template <typename Scalar = double>
struct Coefficients {
    MatrixX<Scalar> alpha;
    std::vector<MatrixX<Scalar>> beta;
    VectorX<Scalar> gamma;
};

class FunctionalSpec {
public:
    FunctionalSpec() = default;
    FunctionalSpec(std::vector<std::string> assets, std::vector<Component> comps, std::vector<std::string> names = {});

    std::size_t n() const { return comps_.size(); }
    std::size_t d() const { return assets_.size(); }
    const std::vector<std::string>& assets() const { return assets_; }
    const std::vector<Component>& components() const { return comps_; }
    const std::vector<std::string>& names() const { return names_; }
    int asset_index(const std::string& label) const;

    bool in_class(std::size_t i) const;  // RunningMax / RunningMin are not
    bool monotone(std::size_t i) const;  // nondecreasing clocks: Time, WeightedQV
    // Index of the tracked asset-like component that component i refers to (-1 if none).
    int source(std::size_t i) const;

    Coefficients<double> coefficients(const Vec& x) const;
    // alpha rows only (n x d), for hedge ratios
    Mat alpha(const Vec& x) const;

private:
    void validate();
    std::vector<std::string> assets_;
    std::vector<Component> comps_;
    std::vector<std::string> names_;
    std::vector<int> asset_of_;  // for Asset components, index into A
};

// Closed set B with a distance-like gap, nonnegative exactly on B.
class StoppingSet {
public:
    enum class Kind { Always, Never, LevelSet, CorridorExit, Union };

    static StoppingSet always();
    static StoppingSet never();
    static StoppingSet level(int index, double value, bool up = true);
    static StoppingSet corridor_exit(int index, double l, double u);
    static StoppingSet unite(std::vector<StoppingSet> parts);

    StoppingSet() = default;  // never

    double signed_gap(const Vec& x) const;
    bool contains(const Vec& x) const { return signed_gap(x) >= 0.0; }
    bool monotone_driven(const FunctionalSpec& spec) const;
    std::string describe() const;

    Kind kind() const { return kind_; }
    int index() const { return index_; }
    double value() const { return a_; }
    double lower() const { return a_; }
    double upper() const { return b_; }
    bool up() const { return up_; }
    const std::vector<StoppingSet>& parts() const { return parts_; }

    // Projects the monotone level coordinates of x onto the set when x lies on or past a level.
    void snap(Vec& x) const;

private:
    Kind kind_ = Kind::Never;
    int index_ = -1;
    double a_ = 0, b_ = 0;
    bool up_ = true;
    std::vector<StoppingSet> parts_;
};

// Incremental evaluation of X along a path. Running extrema are kept as hidden state so that
// drawdown components do not require an explicit maximum component.
class Tracker {
public:
    struct State {
        Vec x;
        Vec hmax, hmin;  // running extrema of every component (meaningful for direct ones)
        Vec a;
        double t = 0;
    };

    explicit Tracker(std::shared_ptr<const FunctionalSpec> spec);
    State start(const Vec& a0, double t0) const;
    // Advances s by the fraction phi of the increment towards (a1, t1), writing into out.
    void step(const State& s, const Vec& a1, double t1, double phi, State& out) const;
    State step(const State& s, const Vec& a1, double t1, double phi = 1.0) const;
    const FunctionalSpec& spec() const { return *spec_; }
    const std::shared_ptr<const FunctionalSpec>& spec_ptr() const { return spec_; }

private:
    void direct(const Vec& a, double t, Vec& x) const;
    std::shared_ptr<const FunctionalSpec> spec_;
    std::vector<int> direct_, derived_;
};

struct HitResult {
    std::size_t index = 0;  // first grid index at or after the hit
    double phi = 1.0;       // fraction of the step (index-1 -> index) at which B is reached
    Vec x;                  // state at hit
    Vec a;                  // traded vector at hit
};

struct TrackedPath {
    TimeGrid grid;
    std::shared_ptr<const FunctionalSpec> spec;
    Mat X, A, HM, Hm;  // columns indexed by grid point
    std::size_t size() const { return static_cast<std::size_t>(X.cols()); }
    Vec x(std::size_t k) const { return X.col(k); }
    Vec a(std::size_t k) const { return A.col(k); }
    Tracker::State state(std::size_t k) const;
};

// sum_{j<k} w(a_j) (a_{j+1} - a_j)(b_{j+1} - b_j)
std::vector<double> quadratic_covariation(const Path& a, const Path& b,
                                          const std::function<double(double)>& weight = {});

TrackedPath track(std::shared_ptr<const FunctionalSpec> spec, const PathSet& paths);
std::optional<HitResult> hitting(const TrackedPath& tracked, const StoppingSet& B);

}  // namespace qvh
