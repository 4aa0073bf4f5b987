#include "qvh/families.hpp"
#include "qvh/hedging.hpp"
#include "qvh/market.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

using json = nlohmann::ordered_json;
using namespace qvh;

namespace {

constexpr const char* kSpecVersion = "1.0";

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Reads one JSON object, range-checks what it hands out and rejects keys nobody asked for.
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("", "expected an object");
    }
    ~Obj() noexcept(false) {
        if (std::uncaught_exceptions() == 0) done();
    }
    Obj(const Obj&) = delete;

    bool has(const std::string& k) const { return j_.contains(k); }
    std::string at(const std::string& k) const { return path_ + "/" + k; }

    const json& raw(const std::string& k) {
        if (!has(k)) fail(k, "missing required key");
        seen_.insert(k);
        return j_.at(k);
    }
    double num(const std::string& k, std::optional<double> def = {}, double lo = -1e300, double hi = 1e300) {
        if (!has(k)) {
            if (!def) fail(k, "missing required key");
            return *def;
        }
        const json& v = raw(k);
        if (!v.is_number()) fail(k, "expected a number");
        double x = v.get<double>();
        if (!(x >= lo && x <= hi)) {
            std::ostringstream os;
            os << "value " << x << " outside [" << lo << ", " << hi << "]";
            fail(k, os.str());
        }
        return x;
    }
    double positive(const std::string& k, std::optional<double> def = {}) {
        double x = num(k, def);
        if (!(x > 0)) fail(k, "must be positive");
        return x;
    }
    long integer(const std::string& k, std::optional<long> def = {}, long lo = 0, long hi = 1L << 40) {
        if (!has(k)) {
            if (!def) fail(k, "missing required key");
            return *def;
        }
        const json& v = raw(k);
        if (!v.is_number_integer()) fail(k, "expected an integer");
        long x = v.get<long>();
        if (x < lo || x > hi) fail(k, "value " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " +
                                          std::to_string(hi) + "]");
        return x;
    }
    bool flag(const std::string& k, bool def) {
        if (!has(k)) return def;
        const json& v = raw(k);
        if (!v.is_boolean()) fail(k, "expected true or false");
        return v.get<bool>();
    }
    std::string str(const std::string& k, std::optional<std::string> def = {}, const std::set<std::string>& allowed = {}) {
        if (!has(k)) {
            if (!def) fail(k, "missing required key");
            return *def;
        }
        const json& v = raw(k);
        if (!v.is_string()) fail(k, "expected a string");
        std::string s = v.get<std::string>();
        if (!allowed.empty() && !allowed.count(s)) {
            std::string opts;
            for (auto& a : allowed) opts += (opts.empty() ? "" : ", ") + a;
            fail(k, "'" + s + "' is not one of {" + opts + "}");
        }
        return s;
    }
    std::vector<double> nums(const std::string& k) {
        const json& v = raw(k);
        if (!v.is_array()) fail(k, "expected an array of numbers");
        std::vector<double> out;
        for (auto& e : v) {
            if (!e.is_number()) fail(k, "expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }
    [[noreturn]] void fail(const std::string& k, const std::string& msg) const {
        throw ConfigError((k.empty() ? path_ : at(k)) + ": " + msg);
    }
    void done() {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) fail(it.key(), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

// ---- shared builders

Fn1 parse_fn(const json& j, const std::string& path) {
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        if (s == "identity") return Fn1::identity();
        if (s == "square") return Fn1::square();
        if (s == "neglog") return Fn1::neglog();
        if (s == "one") return Fn1::constant(1.0);
        throw ConfigError(path + ": unknown function '" + s + "'");
    }
    Obj o(j, path);
    std::string kind = o.str("kind", {}, {"call", "put", "power", "constant", "linear", "identity", "square", "neglog"});
    if (kind == "call") return Fn1::call(o.num("k", {}, 0.0));
    if (kind == "put") return Fn1::put(o.num("k", {}, 0.0));
    if (kind == "power") return Fn1::power(o.num("p"));
    if (kind == "constant") return Fn1::constant(o.num("c"));
    if (kind == "linear") {
        double a = o.num("a"), b = o.num("b", 0.0);
        return Fn1::linear(a, b);
    }
    if (kind == "identity") return Fn1::identity();
    if (kind == "square") return Fn1::square();
    return Fn1::neglog();
}

Fn1 fn_at(Obj& o, const std::string& k, std::optional<Fn1> def = {}) {
    if (!o.has(k)) {
        if (!def) o.fail(k, "missing required key");
        return *def;
    }
    return parse_fn(o.raw(k), o.at(k));
}

ModelSpec parse_model(const json& j, const std::string& path);

ModelSpec model_from(Obj& o) {
    std::string type = o.str("type", {}, {"gbm", "heston", "local_vol", "absorbed", "convex_market"});
    if (type == "gbm") {
        double s0 = o.positive("s0", 1.0), sigma = o.num("sigma", {}, 0.0, 10.0);
        return model::GBM{s0, sigma};
    }
    if (type == "heston") {
        model::Heston h;
        h.s0 = o.positive("s0", h.s0);
        h.v0 = o.num("v0", h.v0, 0.0);
        h.kappa = o.num("kappa", h.kappa, 0.0);
        h.theta = o.num("theta", h.theta, 0.0);
        h.xi = o.num("xi", h.xi, 0.0);
        h.rho = o.num("rho", h.rho, -1.0, 1.0);
        return h;
    }
    if (type == "local_vol") {
        double s0 = o.positive("s0", 1.0);
        auto c = o.nums("log_poly");
        if (c.empty()) o.fail("log_poly", "needs at least one coefficient");
        double l = o.num("l", 0.01, 0.0), u = o.num("u", 2.0, 0.0);
        if (!(l <= u)) o.fail("u", "must be at least l");
        model::LocalVol lv{s0,
                           [c](double s, double) {
                               double x = std::log(s), p = 1, v = 0;
                               for (double a : c) v += a * p, p *= x;
                               return v;
                           },
                           l, u, "local vol (log polynomial)"};
        return lv;
    }
    if (type == "absorbed") {
        double s0 = o.positive("s0", 0.5), floor = o.positive("floor"), sigma = o.num("sigma", 0.2, 0.0, 10.0);
        return model::LocalVol{s0, [floor, sigma](double s, double) { return s < floor ? 0.0 : sigma; }, 0.0, sigma,
                               "absorbed below floor"};
    }
    auto base = std::make_shared<const ModelSpec>(parse_model(o.raw("base"), o.at("base")));
    Fn1 g = fn_at(o, "g");
    double c0 = o.num("c0"), T = o.positive("T");
    return model::ConvexClaimMarket{base, g, c0, T};
}

ModelSpec parse_model(const json& j, const std::string& path) {
    Obj o(j, path);
    return model_from(o);
}

Ingredients parse_ingredients(const json& j, const std::string& path) {
    Obj o(j, path);
    Ingredients ing;
    ing.g = fn_at(o, "g", ing.g);
    ing.w_s = fn_at(o, "w_s", ing.w_s);
    ing.w_v = fn_at(o, "w_v", ing.w_v);
    ing.w_l = fn_at(o, "w_l", ing.w_l);
    ing.kappa = o.num("kappa", ing.kappa);
    ing.s_ref = o.positive("s_ref", ing.s_ref);
    return ing;
}

Ingredients ingredients_at(Obj& o) { return o.has("ingredients") ? parse_ingredients(o.raw("ingredients"), o.at("ingredients")) : Ingredients{}; }

Component parse_component(const json& j, const std::string& path) {
    Obj o(j, path);
    std::string t = o.str("type", {}, {"asset", "time", "time_integral", "qv", "cross_var", "time_value", "running_max",
                                       "running_min", "drawdown_sq"});
    auto weight = [&] {
        Weight w;
        if (o.has("weight")) w.fn = parse_fn(o.raw("weight"), o.at("weight"));
        w.of = static_cast<int>(o.integer("weight_of", 0));
        return w;
    };
    if (t == "asset") return comp::Asset{o.str("label")};
    if (t == "time") return comp::Time{};
    if (t == "time_integral") return comp::TimeIntegral{static_cast<int>(o.integer("of"))};
    if (t == "qv") {
        int of = static_cast<int>(o.integer("of"));
        return comp::WeightedQV{of, weight()};
    }
    if (t == "cross_var") {
        int a = static_cast<int>(o.integer("a")), b = static_cast<int>(o.integer("b"));
        return comp::CrossVar{a, b, weight()};
    }
    if (t == "time_value") {
        std::string asset = o.str("asset"), claim = o.str("claim");
        return comp::TimeValue{asset, claim, fn_at(o, "g")};
    }
    if (t == "running_max") return comp::RunningMax{static_cast<int>(o.integer("of"))};
    if (t == "running_min") return comp::RunningMin{static_cast<int>(o.integer("of"))};
    int of = static_cast<int>(o.integer("of"));
    return comp::DrawdownSq{of, o.flag("max_based", true)};
}

// {"preset": "timer" | "tvs" | "five" | "asset"} or {"assets": [...], "components": [...]}
std::shared_ptr<const FunctionalSpec> parse_functional(const json& j, const std::string& path) {
    Obj o(j, path);
    if (o.has("preset")) {
        std::string p = o.str("preset", {}, {"timer", "tvs", "five", "asset", "asset_qv"});
        if (p == "tvs") return tvs_spec();
        if (p == "five") return five_component_spec(ingredients_at(o));
        if (p == "asset")
            return std::make_shared<FunctionalSpec>(std::vector<std::string>{"S"}, std::vector<Component>{comp::Asset{"S"}});
        Weight w = p == "timer" ? Weight::inv_sq(0) : Weight::one();
        if (o.has("weight")) w.fn = parse_fn(o.raw("weight"), o.at("weight"));
        return std::make_shared<FunctionalSpec>(std::vector<std::string>{"S"},
                                                std::vector<Component>{comp::Asset{"S"}, comp::WeightedQV{0, w}});
    }
    std::vector<std::string> assets;
    const json& a = o.raw("assets");
    if (!a.is_array() || a.empty()) o.fail("assets", "expected a non-empty array of labels");
    for (auto& e : a) {
        if (!e.is_string()) o.fail("assets", "expected a non-empty array of labels");
        assets.push_back(e.get<std::string>());
    }
    const json& c = o.raw("components");
    if (!c.is_array() || c.empty()) o.fail("components", "expected a non-empty array");
    std::vector<Component> comps;
    for (std::size_t i = 0; i < c.size(); ++i) comps.push_back(parse_component(c[i], o.at("components") + "/" + std::to_string(i)));
    return std::make_shared<FunctionalSpec>(assets, comps);
}

StoppingSet parse_stopping(const json& j, const std::string& path) {
    if (j.is_string()) {
        if (j == "never") return StoppingSet::never();
        if (j == "always") return StoppingSet::always();
        throw ConfigError(path + ": expected \"never\", \"always\" or an object");
    }
    Obj o(j, path);
    std::string t = o.str("type", {}, {"level", "corridor_exit", "union"});
    if (t == "level") {
        int i = static_cast<int>(o.integer("index"));
        double v = o.num("value");
        return StoppingSet::level(i, v, o.flag("up", true));
    }
    if (t == "corridor_exit") {
        int i = static_cast<int>(o.integer("index"));
        double l = o.num("l"), u = o.num("u");
        if (!(l < u)) o.fail("u", "must exceed l");
        return StoppingSet::corridor_exit(i, l, u);
    }
    const json& parts = o.raw("parts");
    if (!parts.is_array() || parts.empty()) o.fail("parts", "expected a non-empty array");
    std::vector<StoppingSet> ps;
    for (std::size_t i = 0; i < parts.size(); ++i) ps.push_back(parse_stopping(parts[i], o.at("parts") + "/" + std::to_string(i)));
    return StoppingSet::unite(std::move(ps));
}

GridSpec grid_spec(Obj& o) {
    GridSpec g;
    g.nx = static_cast<std::size_t>(o.integer("nx", static_cast<long>(g.nx), 5, 100000));
    g.nt = static_cast<std::size_t>(o.integer("nt", static_cast<long>(g.nt), 2, 1000000));
    g.width = o.num("width", g.width, 1.0 + 1e-9);
    return g;
}

struct FieldSpec {
    ScalarField F;
    std::function<double(const Vec&)> payoff;
    std::string description;
};

FieldSpec parse_field(const json& j, const std::string& path) {
    Obj o(j, path);
    std::string t = o.str("type", {}, {"coordinate", "bick", "timer", "corridor", "family", "square"});
    FieldSpec fs;
    if (t == "coordinate") {
        int i = static_cast<int>(o.integer("index"));
        double scale = o.num("scale", 1.0);
        fs.F.value = [i, scale](const Vec& x) { return scale * x[i]; };
        fs.F.gradient = [i, scale](const Vec& x) {
            Vec g = Vec::Zero(x.size());
            g[i] = scale;
            return g;
        };
        fs.F.hessian = [](const Vec& x) { return Mat(Mat::Zero(x.size(), x.size())); };
        fs.description = "coordinate " + std::to_string(i);
    } else if (t == "square") {
        int i = static_cast<int>(o.integer("index", 0));
        fs.F.value = [i](const Vec& x) { return x[i] * x[i]; };
        fs.description = "square of coordinate " + std::to_string(i);
    } else if (t == "bick") {
        double q = o.num("q", 0.04, 0.0);
        fs.F.value = [q](const Vec& x) { return x[0] * x[0] * std::exp(q - x[1]); };
        fs.F.gradient = [q](const Vec& x) {
            double e = std::exp(q - x[1]);
            Vec g(2);
            g << 2 * x[0] * e, -x[0] * x[0] * e;
            return g;
        };
        fs.F.hessian = [q](const Vec& x) {
            double e = std::exp(q - x[1]);
            Mat h(2, 2);
            h << 2 * e, -2 * x[0] * e, -2 * x[0] * e, x[0] * x[0] * e;
            return h;
        };
        fs.payoff = [](const Vec& x) { return x[0] * x[0]; };
        fs.description = "x1^2 exp(q - x2)";
    } else if (t == "timer") {
        problem::Timer p;
        p.f = fn_at(o, "payoff");
        p.w = fn_at(o, "weight", p.w);
        p.q = o.positive("q", p.q);
        p.s0 = o.positive("s0", p.s0);
        GridSpec g = grid_spec(o);
        fs.F = solve_parabolic(p, g).as_field("timer " + p.f.describe());
        Fn1 f = p.f;
        fs.payoff = [f](const Vec& x) { return f(x[0]); };
        fs.description = "timer " + p.f.describe();
    } else if (t == "corridor") {
        problem::Corridor p;
        p.f = fn_at(o, "payoff");
        p.w = fn_at(o, "weight", p.w);
        p.l = o.positive("l", p.l);
        p.u = o.positive("u", p.u);
        if (!(p.l < p.u)) o.fail("u", "must exceed l");
        p.q_max = o.positive("q_max", p.q_max);
        p.nq = static_cast<std::size_t>(o.integer("nq", static_cast<long>(p.nq), 2, 100000));
        GridSpec g = grid_spec(o);
        fs.F = solve_parabolic(p, g).as_field("corridor " + p.f.describe());
        Fn1 f = p.f;
        fs.payoff = [f](const Vec& x) { return f(x[1]); };
        fs.description = "corridor " + p.f.describe();
    } else {
        Family tag = family_from_string(o.str("family", {}, {"TVS", "MFIV", "MFVV", "MFIL"}));
        auto c = o.nums("coefficients");
        fs.F = family(tag, c, ingredients_at(o));
        fs.description = to_string(tag);
    }
    return fs;
}

TimeGrid parse_grid(const json& j, const std::string& path) {
    Obj o(j, path);
    double T = o.positive("T");
    long steps = o.integer("steps", {}, 1, 1L << 24);
    return TimeGrid::uniform(T, static_cast<std::size_t>(steps));
}

CallStrip parse_strip(const json& j, const std::string& path) {
    Obj o(j, path);
    CallStrip s;
    s.s0 = o.positive("s0", 1.0);
    s.strikes = o.nums("strikes");
    if (o.has("black_scholes")) {
        Obj b(o.raw("black_scholes"), o.at("black_scholes"));
        double sigma = b.positive("sigma"), T = b.positive("T");
        s = CallStrip::black_scholes(s.s0, s.strikes, sigma, T);
    } else {
        s.prices = o.nums("prices");
    }
    if (o.has("override")) {
        // explicit price edits, e.g. to build a degenerate strip from a generated one
        const json& ov = o.raw("override");
        if (!ov.is_array()) o.fail("override", "expected an array of {index, price}");
        for (std::size_t i = 0; i < ov.size(); ++i) {
            Obj e(ov[i], o.at("override") + "/" + std::to_string(i));
            long idx = e.integer("index", {}, 0, static_cast<long>(s.strikes.size()) - 1);
            if (e.has("chord")) {
                if (!e.flag("chord", false)) continue;
                if (idx == 0 || idx + 1 >= static_cast<long>(s.prices.size())) e.fail("index", "chord needs two neighbours");
                double kl = s.strikes[idx - 1], k = s.strikes[idx], kr = s.strikes[idx + 1];
                s.prices[idx] = s.prices[idx - 1] + (s.prices[idx + 1] - s.prices[idx - 1]) * (k - kl) / (kr - kl);
            } else {
                s.prices[idx] = e.num("price");
            }
        }
    }
    try {
        s.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return s;
}

// ---- reporting

struct Check {
    std::string name;
    double value, threshold;
    bool pass;
};

struct Outcome {
    json results = json::object();
    std::vector<Check> checks;
    bool discrepancy = false;
    std::string csv;
};

void add_check(Outcome& out, std::string name, double value, double threshold, bool pass) {
    out.checks.push_back({std::move(name), value, threshold, pass});
}

json hedge_json(const HedgeReport& r) {
    return {{"model", r.model},         {"paths", r.rows.size()},   {"paths_used", r.used},
            {"mean_error", r.mean_error}, {"se", r.se},             {"t_stat", r.t_stat()},
            {"rms", r.rms},             {"mean_abs", r.mean_abs},   {"max_abs", r.max_abs},
            {"fraction_unstopped", r.fraction_unstopped}, {"excursions", r.excursions}};
}

void hedge_checks(Obj& o, Outcome& out, const HedgeReport& r, double F0, const std::string& prefix) {
    if (!o.has("checks")) return;
    Obj c(o.raw("checks"), o.at("checks"));
    if (c.has("max_abs_error")) {
        double tol = c.num("max_abs_error", {}, 0.0);
        add_check(out, prefix + "max_abs_error", r.max_abs, tol, r.used > 0 && r.max_abs <= tol);
    }
    if (c.has("mean_se")) {
        double k = c.num("mean_se", {}, 0.0);
        add_check(out, prefix + "mean_within_se", std::abs(r.mean_error), k * r.se, std::abs(r.mean_error) <= k * r.se);
    }
    if (c.has("mean_rel")) {
        double k = c.num("mean_rel", {}, 0.0);
        add_check(out, prefix + "mean_relative", std::abs(r.mean_error), k * std::abs(F0),
                  std::abs(r.mean_error) <= k * std::abs(F0));
    }
    if (c.has("min_abs_t")) {
        double k = c.num("min_abs_t", {}, 0.0);
        add_check(out, prefix + "abs_t_at_least", std::abs(r.t_stat()), k, std::abs(r.t_stat()) >= k);
    }
    if (c.has("max_unstopped")) {
        double k = c.num("max_unstopped", {}, 0.0, 1.0);
        add_check(out, prefix + "fraction_unstopped", r.fraction_unstopped, k, r.fraction_unstopped <= k);
    }
}

Claim claim_from(Obj& o, std::uint64_t) {
    Claim c;
    FieldSpec fs = parse_field(o.raw("field"), o.at("field"));
    c.F = fs.F;
    c.name = fs.description;
    c.spec = parse_functional(o.raw("functional"), o.at("functional"));
    c.B = o.has("stop") ? parse_stopping(o.raw("stop"), o.at("stop")) : StoppingSet::never();
    if (o.flag("pay_payoff", static_cast<bool>(fs.payoff))) c.payoff = fs.payoff;
    return c;
}

double initial_value(const Claim& c, const PathSet& p) {
    TrackedPath tp = track(c.spec, p);
    return c.F.value(tp.x(0));
}

std::string csv_of(const std::function<void(std::ostream&)>& w) {
    std::ostringstream os;
    w(os);
    return os.str();
}

// ---- kinds

Outcome run_hedge(Obj& o, std::uint64_t seed, bool cashflow) {
    Outcome out;
    ModelSpec m = parse_model(o.raw("model"), o.at("model"));
    TimeGrid grid = parse_grid(o.raw("grid"), o.at("grid"));
    Claim c = claim_from(o, seed);
    std::size_t n = static_cast<std::size_t>(o.integer("paths", {}, 1, 100000000));
    m.validate();
    auto src = PathSource::of(m, grid, n, seed);
    HedgeReport r = cashflow ? cashflow_backtest(c, src) : backtest(c, src);
    r.model = m.name();
    double F0 = initial_value(c, src.get(0));
    out.results = hedge_json(r);
    out.results["claim"] = c.name;
    out.results["initial_value"] = F0;
    out.results["consistent"] = r.consistent();
    hedge_checks(o, out, r, F0, "");
    out.csv = csv_of([&](std::ostream& os) { r.write_csv(os); });
    return out;
}

Outcome run_sweep(Obj& o, std::uint64_t seed) {
    Outcome out;
    const json& ms = o.raw("models");
    if (!ms.is_array() || ms.empty()) o.fail("models", "expected a non-empty array of models");
    std::vector<ModelSpec> models;
    for (std::size_t i = 0; i < ms.size(); ++i) {
        models.push_back(parse_model(ms[i], o.at("models") + "/" + std::to_string(i)));
        models.back().validate();
    }
    TimeGrid grid = parse_grid(o.raw("grid"), o.at("grid"));
    Claim c = claim_from(o, seed);
    std::size_t n = static_cast<std::size_t>(o.integer("paths", {}, 1, 100000000));
    SweepReport s = sweep(c, models, grid, n, seed);
    json reps = json::array();
    for (auto& r : s.reports) reps.push_back(hedge_json(r));
    out.results["claim"] = c.name;
    out.results["reports"] = reps;
    out.results["failures"] = s.failures;
    for (auto& f : s.failures) add_check(out, "model_failed: " + f, 1, 0, false);
    if (o.has("checks")) {
        // re-read the same block once per model
        for (std::size_t i = 0; i < s.reports.size(); ++i) {
            Obj c2(o.raw("checks"), o.at("checks"));
            auto& r = s.reports[i];
            auto take = [&](const std::string& k) { return c2.has(k) ? std::optional<double>(c2.num(k, {}, 0.0)) : std::nullopt; };
            if (auto t = take("max_abs_error")) add_check(out, r.model + ": max_abs_error", r.max_abs, *t, r.max_abs <= *t);
            if (auto t = take("mean_se"))
                add_check(out, r.model + ": mean_within_se", std::abs(r.mean_error), *t * r.se, std::abs(r.mean_error) <= *t * r.se);
            if (auto t = take("max_unstopped"))
                add_check(out, r.model + ": fraction_unstopped", r.fraction_unstopped, *t, r.fraction_unstopped <= *t);
        }
    }
    out.csv = csv_of([&](std::ostream& os) { s.write_csv(os); });
    return out;
}

Box parse_box(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected an array of [lo, hi] pairs");
    Box b;
    for (auto& e : j) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
            throw ConfigError(path + ": expected an array of [lo, hi] pairs");
        double lo = e[0].get<double>(), hi = e[1].get<double>();
        if (!(lo <= hi)) throw ConfigError(path + ": empty interval");
        b.emplace_back(lo, hi);
    }
    return b;
}

Outcome run_residual(Obj& o) {
    Outcome out;
    FieldSpec fs = parse_field(o.raw("field"), o.at("field"));
    auto spec = parse_functional(o.raw("functional"), o.at("functional"));
    Box box = parse_box(o.raw("box"), o.at("box"));
    if (box.size() != spec->n()) o.fail("box", "needs one interval per component");
    std::size_t n = static_cast<std::size_t>(o.integer("samples", 256, 1, 10000000));
    double tol = o.num("tolerance", 1e-8, 0.0);
    auto pts = halton(box, n);
    auto rep = residual(fs.F, *spec, pts);
    out.results = {{"field", fs.description}, {"samples", rep.samples}, {"max_abs", rep.max_abs},
                   {"max_gamma", rep.max_gamma}, {"worst_equation", rep.worst_equation}};
    std::vector<double> wp(rep.worst_point.data(), rep.worst_point.data() + rep.worst_point.size());
    out.results["worst_point"] = wp;
    add_check(out, "max_residual", rep.max_abs, tol, rep.max_abs <= tol);
    out.csv = csv_of([&](std::ostream& os) {
        os << "sample";
        for (std::size_t i = 0; i < spec->n(); ++i) os << ",x" << i + 1;
        os << ",l_gamma,max_abs_l_ab\n" << std::setprecision(17);
        for (std::size_t s = 0; s < pts.size(); ++s) {
            auto v = operators(fs.F, *spec, pts[s]);
            os << s;
            for (Eigen::Index i = 0; i < pts[s].size(); ++i) os << ',' << pts[s][i];
            os << ',' << v.l_gamma << ',' << v.l_ab.cwiseAbs().maxCoeff() << '\n';
        }
    });
    return out;
}

Outcome run_adjudicate(Obj& o) {
    Outcome out;
    Family tag = family_from_string(o.str("family", {}, {"TVS", "MFIV", "MFVV", "MFIL"}));
    Ingredients ing = ingredients_at(o);
    Box box = o.has("box") ? parse_box(o.raw("box"), o.at("box")) : default_box(tag);
    std::size_t n = static_cast<std::size_t>(o.integer("samples", 256, 1, 10000000));
    auto rep = adjudicate(tag, ing, box, n);
    json vs = json::array();
    for (std::size_t i = 0; i < rep.variants.size(); ++i) {
        auto& v = rep.variants[i];
        vs.push_back({{"label", v.label}, {"coefficient", v.coefficient}, {"stated", v.stated}, {"residual", v.residual},
                      {"selected", static_cast<int>(i) == rep.selected}});
    }
    out.results = {{"family", to_string(tag)}, {"variants", vs}, {"selected", rep.chosen().label},
                   {"discrepancy", rep.discrepancy}};
    out.discrepancy = rep.discrepancy;
    add_check(out, "selected_residual", rep.chosen().residual, 1e-8, rep.chosen().residual < 1e-8);
    out.csv = csv_of([&](std::ostream& os) {
        os << "variant,coefficient,stated,residual,selected\n" << std::setprecision(17);
        for (std::size_t i = 0; i < rep.variants.size(); ++i) {
            auto& v = rep.variants[i];
            os << '"' << v.label << "\"," << v.coefficient << ',' << v.stated << ',' << v.residual << ','
               << (static_cast<int>(i) == rep.selected) << '\n';
        }
    });
    return out;
}

Outcome run_lookback(Obj& o) {
    Outcome out;
    std::string pay = o.str("payoff", "max", {"max", "spot", "one", "drawdown"});
    double q = o.positive("q", 1.0);
    LookbackField::Payoff f, fm;
    if (pay == "max") {
        f = [](double, double m) { return m; };
        fm = [](double, double) { return 1.0; };
    } else if (pay == "spot") {
        f = [](double s, double) { return s; };
        fm = [](double, double) { return 0.0; };
    } else if (pay == "one") {
        f = [](double, double) { return 1.0; };
        fm = [](double, double) { return 0.0; };
    } else {
        f = [](double s, double m) { return m - s; };
        fm = [](double, double) { return 1.0; };
    }
    LookbackField L(f, q, fm, static_cast<int>(o.integer("nodes", 80, 8, 400)), o.positive("radius", 10.0));
    const json& pts = o.raw("points");
    if (!pts.is_array() || pts.empty()) o.fail("points", "expected an array of [x1, x2, x3]");
    std::vector<Vec> xs;
    for (auto& p : pts) {
        if (!p.is_array() || p.size() != 3) o.fail("points", "expected an array of [x1, x2, x3]");
        Vec x(3);
        for (int i = 0; i < 3; ++i) x[i] = p[i].get<double>();
        if (x[0] > x[1] || x[2] > q) o.fail("points", "points need x1 <= x2 and x3 <= q");
        xs.push_back(x);
    }
    double tol = o.num("diagonal_tolerance", 1e-6, 0.0);
    double worst_diag = 0;
    out.csv = csv_of([&](std::ostream& os) {
        os << "x1,x2,x3,value,dm\n" << std::setprecision(17);
        for (auto& x : xs) {
            double v = L.value(x), d = L.dm(x);
            if (x[0] == x[1]) worst_diag = std::max(worst_diag, std::abs(d));
            os << x[0] << ',' << x[1] << ',' << x[2] << ',' << v << ',' << d << '\n';
        }
    });
    out.results = {{"payoff", pay}, {"q", q}, {"points", xs.size()}, {"max_abs_dm_on_diagonal", worst_diag}};
    add_check(out, "dm_on_diagonal", worst_diag, tol, worst_diag <= tol);
    return out;
}

Outcome run_check_strip(Obj& o) {
    Outcome out;
    CallStrip s = parse_strip(o.raw("strip"), o.at("strip"));
    auto a = check_strip(s);
    out.results = {{"v_min", a.v_min}, {"delta_min", a.delta_min}, {"d2", a.d2}, {"dd", a.dd}, {"pass", a.pass},
                   {"violated", a.violated}};
    for (auto& v : a.violated) add_check(out, v, 0, 0, false);
    if (a.violated.empty()) add_check(out, "strip_admissible", 1, 1, true);
    auto tv = s.time_values();
    auto sl = s.slopes();
    auto kk = s.kinks();
    out.csv = csv_of([&](std::ostream& os) {
        os << "strike,price,time_value,slope,kink\n" << std::setprecision(17);
        for (std::size_t i = 0; i < s.size(); ++i) {
            os << s.strikes[i] << ',' << s.prices[i] << ',' << tv[i] << ',' << sl[i] << ',';
            if (i >= 1 && i - 1 < kk.size()) os << kk[i - 1];
            os << '\n';
        }
    });
    return out;
}

Outcome run_calibrate(Obj& o, std::uint64_t seed) {
    Outcome out;
    CallStrip s = parse_strip(o.raw("strip"), o.at("strip"));
    double T = o.positive("T");
    CalibrationOptions opt;
    if (o.has("options")) {
        Obj c(o.raw("options"), o.at("options"));
        opt.nk = static_cast<std::size_t>(c.integer("nk", static_cast<long>(opt.nk), 3, 100000));
        opt.nt = static_cast<std::size_t>(c.integer("nt", static_cast<long>(opt.nt), 2, 100000));
        opt.refine = static_cast<std::size_t>(c.integer("refine", static_cast<long>(opt.refine), 1, 10000));
    }
    auto S = dupire_calibrate(s, T, opt);
    out.results = {{"sigma0", S.sigma0}, {"a1", S.a1}, {"a2", S.a2}, {"sigma_min", S.l}, {"sigma_max", S.u},
                   {"blend_power", S.blend_power}};
    if (o.has("sigma_band")) {
        auto band = o.nums("sigma_band");
        if (band.size() != 2 || !(band[0] <= band[1])) o.fail("sigma_band", "expected [lo, hi]");
        add_check(out, "sigma_min_in_band", S.l, band[0], S.l >= band[0]);
        add_check(out, "sigma_max_in_band", S.u, band[1], S.u <= band[1]);
    }
    if (o.has("reprice")) {
        Obj r(o.raw("reprice"), o.at("reprice"));
        std::size_t n = static_cast<std::size_t>(r.integer("paths", {}, 2, 100000000));
        long steps = r.integer("steps", 4096, 1, 1L << 20);
        auto rep = reprice(S, s, n, TimeGrid::uniform(T, static_cast<std::size_t>(steps)), seed);
        json rows = json::array();
        for (std::size_t i = 0; i < s.size(); ++i)
            rows.push_back({{"strike", s.strikes[i]}, {"target", s.prices[i]}, {"price", rep.prices[i]},
                            {"se", rep.se[i]}, {"rel_error", rep.rel_error[i]}, {"within", static_cast<bool>(rep.within[i])}});
        out.results["reprice"] = rows;
        out.results["max_rel_error"] = rep.max_rel_error;
        add_check(out, "reprice_within_max(1%,3se)", rep.max_rel_error, 0.01, rep.pass);
    }
    out.csv = csv_of([&](std::ostream& os) { S.write_csv(os); });
    return out;
}

Outcome run_drift(Obj& o, std::uint64_t seed) {
    Outcome out;
    auto base = std::make_shared<const ModelSpec>(parse_model(o.raw("model"), o.at("model")));
    FieldSpec fs = parse_field(o.raw("field"), o.at("field"));
    model::Spliced sp;
    sp.base = base;
    sp.spec = parse_functional(o.raw("functional"), o.at("functional"));
    sp.trigger = o.has("trigger") ? parse_stopping(o.raw("trigger"), o.at("trigger")) : StoppingSet::always();
    sp.exit = o.has("exit") ? parse_stopping(o.raw("exit"), o.at("exit")) : StoppingSet::never();
    const json& cov = o.raw("cov");
    const std::size_t d = base->dim();
    if (!cov.is_array() || cov.size() != d) o.fail("cov", "expected a " + std::to_string(d) + "x" + std::to_string(d) + " matrix");
    sp.cov.resize(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        if (!cov[i].is_array() || cov[i].size() != d) o.fail("cov", "expected a square matrix");
        for (std::size_t k = 0; k < d; ++k) sp.cov(i, k) = cov[i][k].get<double>();
    }
    TimeGrid grid = parse_grid(o.raw("grid"), o.at("grid"));
    std::size_t n = static_cast<std::size_t>(o.integer("paths", {}, 2, 100000000));
    std::string expect = o.str("expect", "member", {"member", "non_member"});
    ModelSpec(sp).validate();
    auto r = drift_test(fs.F, sp, grid, n, seed);
    out.results = {{"field", fs.description}, {"mean", r.mean}, {"se", r.se}, {"t_stat", r.t}, {"windows", r.windows},
                   {"paths", r.paths}, {"trigger_frequency", r.trigger_frequency}, {"inconclusive", r.inconclusive}};
    if (r.inconclusive)
        add_check(out, "windows", static_cast<double>(r.windows), 2, false);
    else if (expect == "member")
        add_check(out, "abs_t_below", std::abs(r.t), 3, std::abs(r.t) < 3);
    else
        add_check(out, "abs_t_above", std::abs(r.t), 5, std::abs(r.t) > 5);
    out.csv = csv_of([&](std::ostream& os) {
        os << "window,increment\n" << std::setprecision(17);
        for (std::size_t i = 0; i < r.increments.size(); ++i) os << i << ',' << r.increments[i] << '\n';
    });
    return out;
}

Outcome run_support(Obj& o, std::uint64_t seed) {
    Outcome out;
    ModelSpec m = parse_model(o.raw("model"), o.at("model"));
    double t = o.positive("t"), a = o.positive("a"), b = o.positive("b");
    if (!(b > a)) o.fail("b", "must exceed a");
    std::size_t n = static_cast<std::size_t>(o.integer("paths", {}, 2, 100000000));
    std::size_t steps = static_cast<std::size_t>(o.integer("steps", 256, 1, 1L << 20));
    std::string expect = o.str("expect", "strict", {"strict", "non_strict"});
    m.validate();
    auto r = support_diagnostic(m, t, a, b, n, seed, steps);
    out.results = {{"model", m.name()}, {"probability", r.probability}, {"se", r.se}, {"slope_a", r.slope_a},
                   {"slope_b", r.slope_b}, {"strict", r.strict}};
    add_check(out, "verdict_" + expect, r.strict ? 1 : 0, expect == "strict" ? 1 : 0, r.strict == (expect == "strict"));
    out.csv = csv_of([&](std::ostream& os) {
        os << "t,a,b,probability,se,slope_a,slope_b,strict\n" << std::setprecision(17);
        os << t << ',' << a << ',' << b << ',' << r.probability << ',' << r.se << ',' << r.slope_a << ',' << r.slope_b
           << ',' << r.strict << '\n';
    });
    return out;
}

const char* kHelpFooter = R"(Config: one JSON object
  {"kind": <kind>, "seed": <int>, "output": <dir>, <kind>: {...}}
Unknown keys are rejected. Exit codes: 0 all checks pass, 1 malformed config,
2 tolerance violated, 3 stated-variant discrepancy (adjudicate), 4 infeasible market.

report.csv columns per kind:
  hedge, cashflow  path,stopped,hit_time,wealth,target,error,max_gap,excursions
  sweep            model,paths_used,mean_error,se,t_stat,rms,max_abs,fraction_unstopped
  residual         sample,x1..xn,l_gamma,max_abs_l_ab
  adjudicate       variant,coefficient,stated,residual,selected
  lookback         x1,x2,x3,value,dm
  calibrate        strike,time,sigma   (patch grid of the local volatility surface)
  check-strip      strike,price,time_value,slope,kink
  drift            window,increment
  support          t,a,b,probability,se,slope_a,slope_b,strict
report.json carries "spec_version", the resolved seed, results and the list of checks.)";

int exit_code_for(const Outcome& o) {
    for (auto& c : o.checks)
        if (!c.pass) return 2;
    return o.discrepancy ? 3 : 0;
}

void write_reports(const std::filesystem::path& dir, const json& cfg, const std::string& kind, std::uint64_t seed,
                   const Outcome& out, int code, const std::string& error = "") {
    std::filesystem::create_directories(dir);
    json rep;
    rep["spec_version"] = kSpecVersion;
    rep["kind"] = kind;
    rep["seed"] = seed;
    rep["exit_code"] = code;
    if (!error.empty()) rep["error"] = error;
    rep["results"] = out.results;
    json checks = json::array();
    for (auto& c : out.checks) checks.push_back({{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"pass", c.pass}});
    rep["checks"] = checks;
    rep["config"] = cfg;
    std::ofstream(dir / "report.json") << rep.dump(2) << '\n';
    std::ofstream(dir / "report.csv") << out.csv;
}

std::string line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Runs one verification experiment described by a JSON config."};
    app.footer(kHelpFooter);
    std::string config, out_dir;
    std::optional<std::uint64_t> seed_override;
    int nthreads = 0;
    app.add_option("--config", config, "experiment config (JSON)")->required();
    app.add_option("--out", out_dir, "output directory (overrides \"output\")");
    app.add_option("--seed-override", seed_override, "replace the config seed");
    app.add_option("--threads", nthreads, "worker threads (default: hardware concurrency)")->check(CLI::NonNegativeNumber);
    CLI11_PARSE(app, argc, argv);
    if (nthreads > 0) set_threads(nthreads);

    std::ifstream in(config);
    if (!in) {
        std::cerr << "error: cannot read " << config << '\n';
        return 1;
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    json cfg;
    try {
        cfg = json::parse(text);
    } catch (const json::parse_error& e) {
        std::cerr << "error: " << config << ": " << line_col(text, e.byte) << ": malformed JSON\n";
        return 1;
    }

    const std::set<std::string> kinds{"hedge", "cashflow", "sweep", "residual", "adjudicate",
                                      "lookback", "calibrate", "check-strip", "drift", "support"};
    std::string kind;
    std::uint64_t seed = 0;
    std::filesystem::path dir = ".";
    Outcome out;
    int code = 0;
    try {
        Obj top(cfg, "");
        kind = top.str("kind", {}, kinds);
        seed = static_cast<std::uint64_t>(top.integer("seed", 1, 0, std::numeric_limits<long>::max()));
        if (seed_override) seed = *seed_override;
        std::string o = top.str("output", ".");
        dir = out_dir.empty() ? std::filesystem::path(o) : std::filesystem::path(out_dir);
        Obj k(top.raw(kind), "/" + kind);
        if (kind == "hedge") out = run_hedge(k, seed, false);
        else if (kind == "cashflow") out = run_hedge(k, seed, true);
        else if (kind == "sweep") out = run_sweep(k, seed);
        else if (kind == "residual") out = run_residual(k);
        else if (kind == "adjudicate") out = run_adjudicate(k);
        else if (kind == "lookback") out = run_lookback(k);
        else if (kind == "calibrate") out = run_calibrate(k, seed);
        else if (kind == "check-strip") out = run_check_strip(k);
        else if (kind == "drift") out = run_drift(k, seed);
        else out = run_support(k, seed);
        code = exit_code_for(out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << config << ": field " << e.what() << '\n';
        return 1;
    } catch (const ParameterError& e) {
        std::cerr << "error: " << config << ": parameter out of range: " << e.what() << '\n';
        return 1;
    } catch (const SpecError& e) {
        std::cerr << "error: " << config << ": functional: " << e.what() << '\n';
        return 1;
    } catch (const InfeasibleMarket& e) {
        std::cerr << "infeasible market: " << e.what() << '\n';
        write_reports(dir, cfg, kind, seed, out, 4, e.what());
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "failed: " << e.what() << '\n';
        write_reports(dir, cfg, kind, seed, out, 2, e.what());
        return 2;
    }
    write_reports(dir, cfg, kind, seed, out, code);
    for (auto& c : out.checks)
        std::cout << (c.pass ? "pass  " : "FAIL  ") << c.name << "  value=" << c.value << "  threshold=" << c.threshold << '\n';
    if (out.discrepancy) std::cout << "stated-variant discrepancy: see report.json\n";
    return code;
}
