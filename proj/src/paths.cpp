#include "qvh/paths.hpp"

#include "qvh/bs.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

namespace qvh {

namespace {
template <class... Ts> struct overloaded : Ts... { using Ts::operator()...; };
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;

constexpr std::uint64_t kBubbleSalt = 0xb0bb1e;
constexpr std::uint64_t kSpliceSalt = 0x5911ce;

double base_s0(const ModelSpec& m) {
    return std::visit(overloaded{
                          [](const model::GBM& g) { return g.s0; },
                          [](const model::LocalVol& g) { return g.s0; },
                          [](const model::Heston& g) { return g.s0; },
                          [](const auto&) -> double { throw ParameterError("convex-claim market: unsupported base model"); },
                      },
                      m.m);
}

PathSet one_asset(const TimeGrid& grid, std::uint64_t seed, std::vector<double> s) {
    PathSet p;
    p.grid = grid;
    p.labels = {"S"};
    p.values = {std::move(s)};
    p.seed = seed;
    return p;
}

PathSet sim_gbm(const model::GBM& m, const TimeGrid& grid, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> s(grid.size());
    double x = std::log(m.s0);
    s[0] = m.s0;
    for (std::size_t k = 1; k < grid.size(); ++k) {
        double dt = grid.times[k] - grid.times[k - 1];
        x += -0.5 * m.sigma * m.sigma * dt + m.sigma * std::sqrt(dt) * rng.normal();
        s[k] = std::exp(x);
    }
    return one_asset(grid, seed, std::move(s));
}

PathSet sim_localvol(const model::LocalVol& m, const TimeGrid& grid, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> s(grid.size());
    double x = std::log(m.s0);
    s[0] = m.s0;
    for (std::size_t k = 1; k < grid.size(); ++k) {
        double dt = grid.times[k] - grid.times[k - 1];
        double sig = std::clamp(m.sigma(s[k - 1], grid.times[k - 1]), m.l, m.u);
        double z = rng.normal();
        x += -0.5 * sig * sig * dt + sig * std::sqrt(dt) * z;
        s[k] = std::exp(x);
    }
    return one_asset(grid, seed, std::move(s));
}

PathSet sim_heston(const model::Heston& m, const TimeGrid& grid, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t K = grid.size();
    std::vector<double> s(K), v(K), iv(K);
    double x = std::log(m.s0), vv = m.v0;
    s[0] = m.s0;
    v[0] = m.v0;
    iv[0] = 0;
    const double rc = std::sqrt(std::max(0.0, 1.0 - m.rho * m.rho));
    for (std::size_t k = 1; k < K; ++k) {
        double dt = grid.times[k] - grid.times[k - 1];
        double vp = std::max(vv, 0.0), sq = std::sqrt(vp * dt);
        double z1 = rng.normal(), z2 = m.rho * z1 + rc * rng.normal();
        x += -0.5 * vp * dt + sq * z1;
        vv += m.kappa * (m.theta - vp) * dt + m.xi * sq * z2;
        s[k] = std::exp(x);
        v[k] = std::max(vv, 0.0);
        iv[k] = iv[k - 1] + vp * dt;
    }
    PathSet p = one_asset(grid, seed, std::move(s));
    p.aux["v"] = std::move(v);
    p.aux["intv"] = std::move(iv);
    return p;
}
}  // namespace

std::vector<std::string> ModelSpec::labels() const {
    return std::visit(overloaded{
                          [](const model::Bubble&) { return std::vector<std::string>{"Y"}; },
                          [](const model::ConvexClaimMarket&) { return std::vector<std::string>{"S", "C"}; },
                          [](const model::Spliced& s) { return s.base->labels(); },
                          [](const auto&) { return std::vector<std::string>{"S"}; },
                      },
                      m);
}

std::string ModelSpec::name() const {
    return std::visit(overloaded{
                          [](const model::GBM& g) { return "gbm(sigma=" + std::to_string(g.sigma) + ")"; },
                          [](const model::LocalVol& g) { return g.desc; },
                          [](const model::Heston&) { return std::string("heston"); },
                          [](const model::Bubble&) { return std::string("bubble"); },
                          [](const model::ConvexClaimMarket& c) { return "convex-market(" + c.base->name() + ")"; },
                          [](const model::Spliced& s) { return "spliced(" + s.base->name() + ")"; },
                      },
                      m);
}

void ModelSpec::validate() const {
    std::visit(overloaded{
                   [](const model::GBM& g) {
                       if (!(g.s0 > 0)) throw ParameterError("gbm: s0 must be positive");
                       if (!(g.sigma >= 0)) throw ParameterError("gbm: sigma must be nonnegative");
                   },
                   [](const model::LocalVol& g) {
                       if (!(g.s0 > 0)) throw ParameterError("local vol: s0 must be positive");
                       if (!(g.l >= 0 && g.l <= g.u && std::isfinite(g.u)))
                           throw ParameterError("local vol: bounds must satisfy 0 <= l <= u < inf");
                       if (!g.sigma) throw ParameterError("local vol: missing sigma function");
                   },
                   [](const model::Heston& h) {
                       if (!(h.s0 > 0)) throw ParameterError("heston: s0 must be positive");
                       if (!(h.v0 >= 0 && h.kappa >= 0 && h.theta >= 0 && h.xi >= 0))
                           throw ParameterError("heston: variance parameters must be nonnegative");
                       if (!(std::abs(h.rho) <= 1)) throw ParameterError("heston: |rho| must be at most 1");
                   },
                   [](const model::Bubble& b) {
                       if (!(b.T > 0)) throw ParameterError("bubble: horizon must be positive");
                   },
                   [](const model::ConvexClaimMarket& c) {
                       if (!c.base) throw ParameterError("convex-claim market: missing base model");
                       c.base->validate();
                       if (!(c.T > 0)) throw ParameterError("convex-claim market: T must be positive");
                       double s0 = base_s0(*c.base);
                       if (!(c.c0 > c.g(s0)))
                           throw InfeasibleMarket("convex-claim market: requires C0 > g(S0) (C0 = " + std::to_string(c.c0) +
                                                  ", g(S0) = " + std::to_string(c.g(s0)) + ")");
                   },
                   [](const model::Spliced& s) {
                       if (!s.base || !s.spec) throw ParameterError("spliced: missing base model or functional");
                       s.base->validate();
                       auto d = static_cast<Eigen::Index>(s.base->dim());
                       if (s.cov.rows() != d || s.cov.cols() != d)
                           throw ParameterError("spliced: covariance dimension does not match the base model");
                       if (!s.cov.isApprox(s.cov.transpose(), 1e-12))
                           throw ParameterError("spliced: covariance must be symmetric");
                       Eigen::LLT<Mat> llt(s.cov);
                       if (llt.info() != Eigen::Success) throw ParameterError("spliced: covariance is not positive definite");
                   },
               },
               m);
}

Path bubble_path(double T, const TimeGrid& grid, std::uint64_t seed) {
    if (!(T > 0)) throw ParameterError("bubble: horizon must be positive");
    if (grid.horizon() > T * (1 + 1e-14)) throw DomainError("bubble: grid extends beyond T");
    Rng rng(seed);
    const double tc = T * (1.0 - 1e-9);
    auto clock = [&](double t) { return std::log(T / (T - std::min(t, tc))); };
    Path p{grid, std::vector<double>(grid.size())};
    p.values[0] = 1.0;
    double w = 0, u0 = 0;
    for (std::size_t k = 1; k < grid.size(); ++k) {
        double u = clock(grid.times[k]);
        w += std::sqrt(u - u0) * rng.normal();
        u0 = u;
        p.values[k] = std::exp(w - 0.5 * u);
    }
    if (grid.times.back() >= T) p.values.back() = 0.0;
    return p;
}

ConvexCalibration calibrate_convex(const Fn1& g, double s0, double c0, double T) {
    if (!(c0 > g(s0)))
        throw InfeasibleMarket("convex-claim market: requires C0 > g(S0) (C0 = " + std::to_string(c0) +
                               ", g(S0) = " + std::to_string(g(s0)) + ")");
    ConvexCalibration c;
    c.sigma0 = bs_implied_sigma(g, s0, T, c0);
    c.weight = std::max(0.0, c0 - bs_convex(g, s0, c.sigma0 * c.sigma0 * T));
    return c;
}

PathSet market_paths_convex(const model::ConvexClaimMarket& spec, const TimeGrid& grid, std::uint64_t seed) {
    ModelSpec(spec).validate();
    if (grid.horizon() > spec.T * (1 + 1e-14)) throw DomainError("convex-claim market: grid extends beyond T");
    const std::size_t K = grid.size();
    Path y = bubble_path(spec.T, grid, stream_seed(seed, 0, kBubbleSalt));
    PathSet out;
    std::vector<double> c(K);
    if (auto* h = std::get_if<model::Heston>(&spec.base->m)) {
        if (spec.g.kind() != Fn1::Kind::NegLog)
            throw ParameterError("convex-claim market: a Heston base requires g = -2 log");
        out = sim_heston(*h, grid, seed);
        auto fair = [&](double s, double v, double tau) {
            double decay = h->kappa > 0 ? (1 - std::exp(-h->kappa * tau)) / h->kappa : tau;
            return -2.0 * std::log(s) + h->theta * tau + (v - h->theta) * decay;
        };
        double weight = spec.c0 - fair(h->s0, h->v0, spec.T);
        if (weight < 0)
            throw InfeasibleMarket("convex-claim market: C0 is below the Heston value of the claim");
        const auto& s = out.values[0];
        const auto& v = out.aux.at("v");
        for (std::size_t k = 0; k < K; ++k) c[k] = fair(s[k], v[k], spec.T - grid.times[k]) + weight * y.values[k];
    } else {
        ConvexCalibration cal = calibrate_convex(spec.g, base_s0(*spec.base), spec.c0, spec.T);
        out = sim_gbm({base_s0(*spec.base), cal.sigma0}, grid, seed);
        const auto& s = out.values[0];
        double v2 = cal.sigma0 * cal.sigma0;
        for (std::size_t k = 0; k < K; ++k)
            c[k] = bs_convex(spec.g, s[k], v2 * (spec.T - grid.times[k])) + cal.weight * y.values[k];
    }
    if (grid.times.back() >= spec.T) c.back() = spec.g(out.values[0].back());
    out.labels = {"S", "C"};
    out.values.push_back(std::move(c));
    out.aux["Y"] = std::move(y.values);
    out.seed = seed;
    return out;
}

PathSet splice(const model::Spliced& spec, const TimeGrid& grid, std::uint64_t seed) {
    ModelSpec(spec).validate();
    PathSet p = simulate(*spec.base, grid, seed);
    const auto& assets = spec.spec->assets();
    std::vector<int> cols;
    for (auto& l : assets) {
        int c = p.index_of(l);
        if (c < 0) throw SpecError("spliced: functional refers to unknown asset '" + l + "'");
        cols.push_back(c);
    }
    const std::size_t K = grid.size(), d = p.dim();
    auto traded = [&](std::size_t k) {
        Vec a(cols.size());
        for (std::size_t j = 0; j < cols.size(); ++j) a[j] = p.values[cols[j]][k];
        return a;
    };
    Tracker tr(spec.spec);
    Tracker::State s = tr.start(traded(0), grid.times[0]), nx;
    long k0 = -1;
    if (spec.trigger.contains(s.x)) k0 = 0;
    for (std::size_t k = 1; k < K && k0 < 0; ++k) {
        tr.step(s, traded(k), grid.times[k], 1.0, nx);
        std::swap(s, nx);
        if (spec.trigger.contains(s.x)) k0 = static_cast<long>(k);
    }
    if (k0 < 0) {
        p.unspliced = true;
        return p;
    }
    const double T = spec.t_max > 0 ? spec.t_max : grid.horizon();
    const double t_end = 0.5 * (T + grid.times[k0]);
    const Mat L = spec.cov.llt().matrixL();
    Rng rng(stream_seed(seed, 0, kSpliceSalt));
    Vec z(d);
    bool active = grid.times[k0] < t_end;
    long k_end = k0;
    for (std::size_t k = k0 + 1; k < K; ++k) {
        if (!active) {
            for (std::size_t c = 0; c < d; ++c) p.values[c][k] = p.values[c][k - 1];
            continue;
        }
        double dt = grid.times[k] - grid.times[k - 1];
        for (std::size_t c = 0; c < d; ++c) z[c] = rng.normal();
        Vec inc = std::sqrt(dt) * (L * z);
        for (std::size_t c = 0; c < d; ++c) p.values[c][k] = p.values[c][k - 1] + inc[c];
        tr.step(s, traded(k), grid.times[k], 1.0, nx);
        std::swap(s, nx);
        k_end = static_cast<long>(k);
        if (spec.exit.contains(s.x) || grid.times[k] >= t_end) active = false;
    }
    p.aux.clear();
    p.splice_begin = k0;
    p.splice_end = k_end;
    return p;
}

PathSet simulate(const ModelSpec& model, const TimeGrid& grid, std::uint64_t seed) {
    grid.validate();
    model.validate();
    return std::visit(overloaded{
                          [&](const model::GBM& m) { return sim_gbm(m, grid, seed); },
                          [&](const model::LocalVol& m) { return sim_localvol(m, grid, seed); },
                          [&](const model::Heston& m) { return sim_heston(m, grid, seed); },
                          [&](const model::Bubble& m) {
                              Path y = bubble_path(m.T, grid, seed);
                              PathSet p;
                              p.grid = grid;
                              p.labels = {"Y"};
                              p.values = {std::move(y.values)};
                              p.seed = seed;
                              return p;
                          },
                          [&](const model::ConvexClaimMarket& m) { return market_paths_convex(m, grid, seed); },
                          [&](const model::Spliced& m) { return splice(m, grid, seed); },
                      },
                      model.m);
}

std::vector<PathSet> simulate_many(const ModelSpec& model, const TimeGrid& grid, std::size_t n, std::uint64_t seed) {
    std::vector<PathSet> out(n);
    parallel_for(n, [&](std::size_t i) { out[i] = simulate(model, grid, stream_seed(seed, i)); });
    return out;
}

PathSource PathSource::of(std::vector<PathSet> paths) {
    auto shared = std::make_shared<std::vector<PathSet>>(std::move(paths));
    return {shared->size(), [shared](std::size_t i) { return (*shared)[i]; }};
}

PathSource PathSource::of(ModelSpec model, TimeGrid grid, std::size_t n, std::uint64_t seed) {
    model.validate();
    return {n, [model = std::move(model), grid = std::move(grid), seed](std::size_t i) {
                return simulate(model, grid, stream_seed(seed, i));
            }};
}

void write_csv(const PathSet& p, std::ostream& os) {
    os << "time";
    for (auto& l : p.labels) os << ',' << l;
    os << '\n' << std::setprecision(17);
    for (std::size_t k = 0; k < p.grid.size(); ++k) {
        os << p.grid.times[k];
        for (auto& v : p.values) os << ',' << v[k];
        os << '\n';
    }
}

}  // namespace qvh
