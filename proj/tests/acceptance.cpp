#include "qvh/families.hpp"
#include "qvh/hedging.hpp"
#include "qvh/market.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

using namespace qvh;

namespace {

struct Verdict {
    bool pass = true;
    std::ostringstream detail;
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[violated: " << what << "] ";
        }
    }
};

std::shared_ptr<const FunctionalSpec> spec_of(std::vector<Component> c, std::vector<std::string> assets = {"S"}) {
    return std::make_shared<FunctionalSpec>(std::move(assets), std::move(c));
}
std::shared_ptr<const FunctionalSpec> timer_spec() {
    return spec_of({comp::Asset{"S"}, comp::WeightedQV{0, Weight::inv_sq(0)}});
}

ScalarField coordinate(int i) {
    ScalarField F;
    F.value = [i](const Vec& x) { return x[i]; };
    F.gradient = [i](const Vec& x) {
        Vec g = Vec::Zero(x.size());
        g[i] = 1;
        return g;
    };
    F.hessian = [](const Vec& x) { return Mat(Mat::Zero(x.size(), x.size())); };
    return F;
}

ScalarField bick(double q) {
    ScalarField F;
    F.value = [q](const Vec& x) { return x[0] * x[0] * std::exp(q - x[1]); };
    F.gradient = [q](const Vec& x) {
        double e = std::exp(q - x[1]);
        Vec g(2);
        g << 2 * x[0] * e, -x[0] * x[0] * e;
        return g;
    };
    F.hessian = [q](const Vec& x) {
        double e = std::exp(q - x[1]);
        Mat h(2, 2);
        h << 2 * e, -2 * x[0] * e, -2 * x[0] * e, x[0] * x[0] * e;
        return h;
    };
    return F;
}

ModelSpec smile() {
    return model::LocalVol{1.0, [](double s, double) { double l = std::log(s); return 0.2 - 0.1 * l + 0.3 * l * l; },
                           0.05, 1.0, "smile local vol"};
}

double rms_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

// ---------------------------------------------------------------------------------------------

Verdict timer_call_model_independence() {
    Verdict v;
    GridSpec g;
    g.nx = 1601;
    g.nt = 800;
    auto field = solve_parabolic(problem::Timer{Fn1::call(1.0)}, g);
    Claim c;
    c.F = field.as_field("timer call");
    c.spec = timer_spec();
    c.B = StoppingSet::level(1, 0.04);
    c.payoff = [](const Vec& x) { return std::max(x[0] - 1.0, 0.0); };
    const double F0 = field(1.0, 0.0), oracle = bs_call(1.0, 1.0, 0.04);
    v.detail << "F(1,0)=" << F0 << " (Black-Scholes " << oracle << "); ";
    v.require(std::abs(F0 - oracle) <= 1e-3 * oracle, "initial price vs Black-Scholes");
    std::vector<std::pair<ModelSpec, double>> models{
        {model::GBM{1.0, 0.1}, 6.0}, {model::GBM{1.0, 0.3}, 2.0}, {model::Heston{}, 4.0}, {smile(), 2.0}};
    for (auto& [m, T] : models) {
        auto r = backtest(c, PathSource::of(m, TimeGrid::uniform(T, 1 << 14), 500, 101));
        v.detail << m.name() << ": mean " << r.mean_error << " se " << r.se << " unstopped " << r.fraction_unstopped
                 << "; ";
        v.require(std::abs(r.mean_error) <= 3 * r.se, m.name() + " mean within 3 SE");
        v.require(std::abs(r.mean_error) <= 0.01 * F0, m.name() + " mean within 1% of F0");
        v.require(r.used >= 450, m.name() + " paths stopped");
    }
    return v;
}

Verdict exact_cases() {
    Verdict v;
    Claim id;
    id.F = coordinate(0);
    id.spec = timer_spec();
    id.B = StoppingSet::level(1, 0.04);
    double worst = 0;
    for (auto m : {ModelSpec(model::GBM{1, 0.2}), ModelSpec(model::Heston{}), smile()}) {
        auto r = backtest(id, PathSource::of(m, TimeGrid::uniform(3.0, 1 << 12), 200, 5));
        worst = std::max(worst, r.max_abs);
        v.require(r.used == r.rows.size(), m.name() + " identity paths stopped");
    }
    v.detail << "identity max error " << worst << "; ";
    v.require(worst <= 1e-12, "identity error <= 1e-12");

    Claim sq;
    sq.F = bick(0.04);
    sq.spec = timer_spec();
    sq.B = StoppingSet::level(1, 0.04);
    std::vector<double> rms;
    for (std::size_t N : {1u << 12, 1u << 14, 1u << 16}) {
        auto r = backtest(sq, PathSource::of(model::GBM{1.0, 0.2}, TimeGrid::uniform(2.0, N), 200, 6));
        rms.push_back(r.rms);
    }
    for (std::size_t i = 0; i + 1 < rms.size(); ++i) {
        double f = rms[i] / rms[i + 1];
        v.detail << "x^2 RMS " << rms[i] << " -> " << rms[i + 1] << " factor " << f << "; ";
        v.require(f >= 1.5 && f <= 2.8, "x^2 quadrupling factor in [1.5, 2.8]");
    }
    return v;
}

Verdict cashflow_replication() {
    Verdict v;
    Claim lin;
    lin.F = coordinate(0);
    lin.spec = spec_of({comp::Asset{"S"}});
    const double T = 1.0, s0 = 1.0;
    auto r = cashflow_backtest(lin, PathSource::of(model::Heston{}, TimeGrid::uniform(T, 1 << 10), 200, 2));
    v.detail << "linear Asian max error " << r.max_abs << "; ";
    v.require(r.max_abs <= 1e-10 * T * s0, "linear Asian exact to 1e-10 scale");
    Claim sq;
    sq.F.value = [](const Vec& x) { return x[0] * x[0]; };
    sq.spec = lin.spec;
    auto m = cashflow_backtest(sq, PathSource::of(model::GBM{1, 0.2}, TimeGrid::uniform(T, 64), 10000, 5));
    v.detail << "x1^2 mean " << m.mean_error << " t " << m.t_stat() << "; ";
    v.require(std::abs(m.t_stat()) > 5, "misspecification |t| > 5");
    return v;
}

Verdict azema_yor() {
    Verdict v;
    Path flat{TimeGrid::uniform(1.0, 1000), std::vector<double>(1001, 1.3)};
    double z = 0;
    for (auto e : {Extremum::Max, Extremum::Min})
        for (double r : azema_yor_residual(flat, e)) z = std::max(z, std::abs(r));
    v.detail << "constant path residual " << z << "; ";
    v.require(z == 0.0, "exact zero on constant paths");
    for (auto e : {Extremum::Max, Extremum::Min}) {
        std::vector<double> rms;
        for (std::size_t N : {1u << 12, 1u << 14, 1u << 16}) {
            std::vector<double> end(200);
            auto g = TimeGrid::uniform(1.0, N);
            parallel_for(end.size(), [&](std::size_t i) {
                end[i] = azema_yor_residual(simulate(model::GBM{1, 0.2}, g, stream_seed(31, i)).path("S"), e).back();
            });
            rms.push_back(rms_of(end));
        }
        for (std::size_t i = 0; i + 1 < rms.size(); ++i) {
            double f = rms[i] / rms[i + 1];
            v.detail << (e == Extremum::Max ? "max" : "min") << " RMS factor " << f << "; ";
            v.require(f >= 1.5 && f <= 2.8, "Azema-Yor quadrupling factor in [1.5, 2.8]");
        }
    }
    return v;
}

Verdict lookback() {
    Verdict v;
    const double q = 1.0;
    LookbackField L([](double, double m) { return m; }, q, [](double, double) { return 1.0; });
    double origin = L.value(Vec::Zero(3));
    v.detail << "F(0)=" << origin << " vs " << std::sqrt(2 / kPi) << "; ";
    v.require(std::abs(origin - std::sqrt(2 / kPi)) <= 1e-4, "value at origin");
    double dm_worst = 0;
    for (auto p : halton({{-1.0, 1.0}, {0.0, 0.9}}, 50)) {
        Vec x(3);
        x << p[0], p[0], p[1];
        dm_worst = std::max(dm_worst, std::abs(L.dm(x)));
        Vec up = x;
        up[1] += 1e-7;
        dm_worst = std::max(dm_worst, std::abs(L.value(up) - L.value(x)) / 1e-7);
    }
    v.detail << "max |d2F| on diagonal " << dm_worst << "; ";
    v.require(dm_worst <= 1e-6, "mixed boundary condition");
    // d_3 F + 1/2 d_11 F = 0 in the interior, by Richardson-extrapolated central differences
    double heat = 0;
    for (auto p : halton({{-1.0, 1.0}, {0.05, 1.0}, {0.0, 0.8}}, 50)) {
        Vec x(3);
        x << p[0], p[0] + p[1], p[2];
        auto at = [&](double d1, double d3) {
            Vec y = x;
            y[0] += d1;
            y[2] += d3;
            return L.value(y);
        };
        auto res = [&](double h) {
            double f11 = (at(h, 0) - 2 * at(0, 0) + at(-h, 0)) / (h * h);
            double f3 = (at(0, h) - at(0, -h)) / (2 * h);
            return f3 + 0.5 * f11;
        };
        heat = std::max(heat, std::abs((4 * res(5e-4) - res(1e-3)) / 3));
    }
    v.detail << "max heat residual " << heat << "; ";
    v.require(heat <= 1e-6, "heat residual");
    return v;
}

Verdict families() {
    Verdict v;
    auto mfvv = adjudicate(Family::MFVV, {}, default_box(Family::MFVV));
    v.detail << "MFVV residual " << mfvv.chosen().residual << "; ";
    v.require(!mfvv.discrepancy && mfvv.chosen().residual < 1e-10, "MFVV passes as stated");
    for (auto tag : {Family::MFIV, Family::MFIL}) {
        auto r = adjudicate(tag, {}, default_box(tag));
        int passing = 0;
        bool others_flagged = true;
        for (auto& var : r.variants) {
            if (var.residual < 1e-8) ++passing;
            else others_flagged = others_flagged && var.residual >= 1e-3;
        }
        v.detail << to_string(tag) << " selects " << r.chosen().label << " (" << r.chosen().residual << "); ";
        v.require(passing == 1 && r.chosen().residual < 1e-8 && others_flagged, to_string(tag) + " single variant");
    }
    // variance swap: F = V + Q^s held to T; terminal wealth against realized log variance
    Ingredients ing;
    Claim c;
    c.F = family(Family::MFIV, {1, 1}, ing);
    c.spec = five_component_spec(ing);
    const double T = 1.0;
    model::Heston h;
    double c0 = h.theta * T + (h.v0 - h.theta) * (1 - std::exp(-h.kappa * T)) / h.kappa;
    ModelSpec mkt = model::ConvexClaimMarket{std::make_shared<const ModelSpec>(h), Fn1::neglog(), c0, T};
    auto grid = TimeGrid::uniform(T, 1 << 14);
    std::vector<double> err(500), rv(500);
    parallel_for(err.size(), [&](std::size_t i) {
        PathSet p = simulate(mkt, grid, stream_seed(61, i));
        const auto& s = p.at("S");
        double acc = 0;
        for (std::size_t k = 0; k + 1 < s.size(); ++k) acc += std::pow(std::log(s[k + 1] / s[k]), 2);
        rv[i] = acc;
        err[i] = hedge_path(c, p).row.wealth - acc;
    });
    Stats e = summarize(err), r = summarize(rv);
    double rel = std::abs(e.mean) / r.mean;
    v.detail << "variance swap mean error " << e.mean << " (" << 100 * rel << "% of " << r.mean << "), rms " << e.rms << "; ";
    v.require(rel <= 0.005, "variance swap within 0.5%");
    return v;
}

Verdict drift() {
    Verdict v;
    auto gbm = std::make_shared<const ModelSpec>(model::GBM{1, 0.2});
    model::Spliced clock{gbm, spec_of({comp::Asset{"S"}, comp::WeightedQV{0, Weight::one()}}), StoppingSet::always(),
                         Mat::Identity(1, 1)};
    auto nm = drift_test(coordinate(1), clock, TimeGrid::uniform(1.0, 256), 1000, 3);
    v.detail << "pure QV t " << nm.t << "; ";
    v.require(nm.t > 5, "non-member t > 5");

    struct Member {
        std::string name;
        ScalarField F;
        model::Spliced sp;
    };
    std::vector<Member> members;
    members.push_back({"asset", coordinate(0), {gbm, timer_spec(), StoppingSet::always(), Mat::Constant(1, 1, 0.04)}});
    members.push_back({"x1^2 exp(q - x2)", bick(0.04), {gbm, timer_spec(), StoppingSet::always(), Mat::Constant(1, 1, 0.09)}});
    members.push_back({"TVS", family(Family::TVS, {1, 0.5, 0}), {gbm, tvs_spec(), StoppingSet::always(), Mat::Constant(1, 1, 0.04)}});
    Ingredients ing;
    auto mkt = std::make_shared<const ModelSpec>(
        model::ConvexClaimMarket{std::make_shared<const ModelSpec>(model::GBM{1, 0.2}), Fn1::neglog(), 0.05, 1.0});
    Mat cov(2, 2);
    cov << 0.04, -0.05, -0.05, 0.09;
    members.push_back({"MFIV", family(Family::MFIV, {1, 1}, ing), {mkt, five_component_spec(ing), StoppingSet::always(), cov}});
    members.push_back({"MFVV", family(Family::MFVV, {1, 0, 0}, ing), {mkt, five_component_spec(ing), StoppingSet::always(), cov}});
    for (auto& m : members) {
        auto r = drift_test(m.F, m.sp, TimeGrid::uniform(1.0, 256), 1000, 3);
        v.detail << m.name << " t " << r.t << "; ";
        v.require(!r.inconclusive && std::abs(r.t) < 3, m.name + " |t| < 3");
    }
    return v;
}

Verdict coordinates() {
    Verdict v;
    ScalarField D;
    D.value = [](const Vec& x) { return x[1] - x[2]; };
    D.gradient = [](const Vec&) { return Vec((Vec(3) << 0.0, 1.0, -1.0).finished()); };
    D.hessian = [](const Vec&) { return Mat(Mat::Zero(3, 3)); };
    auto M = change_coordinates(D, Direction::DrawdownToMax);
    auto dspec = spec_of({comp::Asset{"S"}, comp::DrawdownSq{0}, comp::WeightedQV{0, Weight::one()}});
    double value_err = 0, d_res = 0, m_heat = 0, m_bc = 0;
    for (auto p : halton({{0.5, 1.5}, {0.0, 0.5}, {0.0, 1.0}}, 100)) {
        double s = p[0], m = s + p[1], q = p[2];
        Vec xm(3), xd(3);
        xm << s, m, q;
        xd << s, (m - s) * (m - s), q;
        value_err = std::max(value_err, std::abs(M(xm) - ((m - s) * (m - s) - q)));
        auto ops = operators(D, *dspec, xd);
        d_res = std::max({d_res, std::abs(ops.l_gamma), ops.l_ab.cwiseAbs().maxCoeff()});
        m_heat = std::max(m_heat, std::abs(M.grad(xm)[2] + 0.5 * M.hess(xm)(0, 0)));
        Vec diag = xm;
        diag[1] = s;
        m_bc = std::max(m_bc, std::abs(M.grad(diag)[1]));
    }
    v.detail << "mapped value " << value_err << ", drawdown system " << d_res << ", max system " << m_heat << " / "
             << m_bc << "; ";
    v.require(value_err <= 1e-7 && d_res <= 1e-7 && m_heat <= 1e-7 && m_bc <= 1e-7, "mapped residuals <= 1e-7");
    ScalarField F;
    F.value = [](const Vec& x) { return std::sin(x[0]) * x[1] * x[1] + std::exp(-x[2]); };
    auto R = change_coordinates(change_coordinates(F, Direction::MaxToDrawdown), Direction::DrawdownToMax);
    double rt = 0;
    for (auto p : halton({{0.5, 1.5}, {0.0, 0.5}, {0.0, 1.0}}, 100)) {
        Vec x(3);
        x << p[0], p[0] + p[1], p[2];
        rt = std::max(rt, std::abs(R(x) - F(x)));
    }
    v.detail << "round trip " << rt << "; ";
    v.require(rt <= 1e-10, "round trip <= 1e-10");
    return v;
}

bool flips(const CallStrip& s, const std::string& condition) {
    auto a = check_strip(s);
    return !a.pass && std::find(a.violated.begin(), a.violated.end(), condition) != a.violated.end();
}

Verdict call_strip() {
    Verdict v;
    for (double sigma : {0.1, 0.25, 0.4})
        for (double T : {0.25, 1.0, 2.0})
            v.require(check_strip(CallStrip::black_scholes(1.0, {0.8, 0.9, 1.0, 1.1, 1.2}, sigma, T)).pass,
                      "Black-Scholes strip passes");
    CallStrip good{1.0, {0.9, 1.0, 1.1}, {0.15, 0.06, 0.02}};
    v.require(check_strip(good).pass, "reference strip passes");
    CallStrip zero_tv = good, slope = good, chord = good, flat = good;
    zero_tv.prices[2] = 0.0;    // V at the top strike
    slope.prices[0] = 0.1;      // D2 = -1 (forces V2 = 0 as well)
    chord.prices[1] = 0.5 * (good.prices[0] + good.prices[2]);
    flat.prices[2] = flat.prices[1];  // Dd = 0
    v.require(flips(zero_tv, "v_min") && check_strip(zero_tv).violated.size() == 1, "v_min flips alone");
    v.require(flips(slope, "d2"), "d2 flips");
    v.require(flips(chord, "delta_min") && check_strip(chord).violated.size() == 1, "delta_min flips alone");
    v.require(flips(flat, "dd") && check_strip(flat).violated.size() == 1, "dd flips alone");

    auto strip = CallStrip::black_scholes(1.0, {0.8, 0.9, 1.0, 1.1, 1.2}, 0.25, 1.0);
    auto S = dupire_calibrate(strip, 1.0);
    auto r = reprice(S, strip, 200000, TimeGrid::uniform(1.0, 1 << 12), 17);
    v.detail << "reprice max rel error " << r.max_rel_error << " (";
    for (std::size_t i = 0; i < strip.size(); ++i) v.detail << (i ? ", " : "") << r.rel_error[i];
    v.detail << "); sigma in [" << S.l << ", " << S.u << "], blend power " << S.blend_power << "; ";
    v.require(r.pass, "reprice within max(1%, 3 SE)");
    v.require(S.l >= 0.2 && S.u <= 0.3, "sigma bounded in [0.2, 0.3]");
    return v;
}

Verdict full_support() {
    Verdict v;
    // intervals within a few standard deviations, so the Monte Carlo probability is resolvable
    std::vector<std::pair<ModelSpec, double>> bounded{{model::GBM{1, 0.2}, 0.2}, {smile(), 0.2}, {model::GBM{1, 0.05}, 0.05}};
    for (auto& [m, sd] : bounded)
        for (auto [a, b] : {std::pair{1 - sd, 1 + sd}, std::pair{1 + sd, 1 + 2 * sd}, std::pair{1 - 2 * sd, 1 - sd}}) {
            auto r = support_diagnostic(m, 1.0, a, b, 20000, 9);
            v.require(r.probability > 0 && r.strict, m.name() + " strict on (" + std::to_string(a) + ", " +
                                                         std::to_string(b) + ")");
        }
    model::LocalVol toy{0.5, [](double s, double) { return s < 0.8 ? 0.0 : 0.2; }, 0.0, 0.2, "absorbed"};
    auto t = support_diagnostic(toy, 1.0, 0.9, 1.1, 20000, 9);
    v.detail << "absorbed toy probability " << t.probability << ", strict " << t.strict << "; ";
    v.require(!t.strict, "absorbed toy non-strict");
    return v;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        Verdict (*run)();
    };
    const Criterion all[] = {
        {"1 timer call model independence", timer_call_model_independence},
        {"2 exact cases", exact_cases},
        {"3 cash-flow replication", cashflow_replication},
        {"4 Azema-Yor identities", azema_yor},
        {"5 lookback field", lookback},
        {"6 family adjudication and variance swap", families},
        {"7 drift test", drift},
        {"8 coordinate equivalence", coordinates},
        {"9 call-strip pipeline", call_strip},
        {"10 full-support diagnostics", full_support},
    };
    int failed = 0;
    for (auto& c : all) {
        auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail << "exception: " << e.what();
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %s (%.1fs): %s\n", v.pass ? "PASS" : "FAIL", c.name, secs, v.detail.str().c_str());
        std::fflush(stdout);
        failed += !v.pass;
    }
    std::printf("%d of %zu criteria failed\n", failed, std::size(all));
    return failed == 0 ? 0 : 1;
}
