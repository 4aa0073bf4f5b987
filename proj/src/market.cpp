#include "qvh/market.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace qvh {

void CallStrip::validate() const {
    if (strikes.size() < 2) throw ParameterError("call strip: at least two strikes required");
    if (strikes.size() != prices.size()) throw ParameterError("call strip: one price per strike required");
    if (!(s0 > 0)) throw ParameterError("call strip: s0 must be positive");
    if (!(strikes[0] > 0)) throw ParameterError("call strip: strikes must be positive");
    for (std::size_t i = 1; i < strikes.size(); ++i)
        if (!(strikes[i] > strikes[i - 1])) throw ParameterError("call strip: strikes must be strictly increasing");
    for (double c : prices)
        if (!std::isfinite(c) || c < 0) throw ParameterError("call strip: prices must be finite and nonnegative");
}

std::vector<double> CallStrip::time_values() const {
    std::vector<double> v(size());
    for (std::size_t i = 0; i < size(); ++i) v[i] = prices[i] - std::max(s0 - strikes[i], 0.0);
    return v;
}

std::vector<double> CallStrip::slopes() const {
    std::vector<double> d(size());
    double kp = 0, cp = s0;
    for (std::size_t i = 0; i < size(); ++i) {
        d[i] = (prices[i] - cp) / (strikes[i] - kp);
        kp = strikes[i];
        cp = prices[i];
    }
    return d;
}

std::vector<double> CallStrip::kinks() const {
    auto d = slopes();
    std::vector<double> out;
    for (std::size_t i = 1; i < d.size(); ++i) out.push_back(d[i] - d[i - 1]);
    return out;
}

CallStrip CallStrip::black_scholes(double s0, std::vector<double> strikes, double sigma, double T) {
    CallStrip c;
    c.s0 = s0;
    for (double k : strikes) c.prices.push_back(bs_call(s0, k, sigma * sigma * T));
    c.strikes = std::move(strikes);
    return c;
}

ArbReport check_strip(const CallStrip& strip) {
    strip.validate();
    constexpr double eps = 1e-12;
    ArbReport r;
    auto v = strip.time_values();
    auto d = strip.slopes();
    auto k = strip.kinks();
    r.v_min = *std::min_element(v.begin(), v.end());
    r.delta_min = *std::min_element(k.begin(), k.end());
    r.d2 = d.front();
    r.dd = d.back();
    if (!(r.v_min > eps * strip.s0)) r.violated.push_back("v_min");
    if (!(r.delta_min > eps)) r.violated.push_back("delta_min");
    if (!(r.d2 > -1 + eps)) r.violated.push_back("d2");
    if (!(r.dd < -eps)) r.violated.push_back("dd");
    r.pass = r.violated.empty();
    return r;
}

// ---------------------------------------------------------------------------------------------

namespace {
struct StripGeometry {
    double a1, a2, k2, kd, C2, Cd, Dd;
};

StripGeometry geometry(const CallStrip& s) {
    StripGeometry g;
    g.k2 = s.strikes.front();
    g.kd = s.strikes.back();
    g.C2 = s.prices.front();
    g.Cd = s.prices.back();
    g.Dd = s.slopes().back();
    g.a1 = 0.5 * (s.s0 - g.C2);
    g.a2 = g.kd - g.Cd / g.Dd;
    return g;
}

// sup of {sigma : f(sigma) <= 0} by a scan followed by bisection
double sup_where(const std::function<double(double)>& f, double lo, double hi, int n = 3000) {
    double best = -1, next = -1;
    for (int i = 0; i <= n; ++i) {
        double s = lo + (hi - lo) * i / n;
        if (f(s) <= 0) {
            best = s;
            next = i < n ? lo + (hi - lo) * (i + 1) / n : -1;
        }
    }
    if (best < 0) return -1;
    if (next < 0) return hi;
    double a = best, b = next;
    for (int it = 0; it < 100 && b - a > 1e-14; ++it) {
        double m = 0.5 * (a + b);
        (f(m) <= 0 ? a : b) = m;
    }
    return a;
}
}  // namespace

std::pair<double, double> sigma_thresholds(const CallStrip& strip, double T) {
    auto g = geometry(strip);
    const double s0 = strip.s0;
    auto c = [&](double k, double sig) { return bs_call(s0, k, sig * sig * T); };
    auto ck = [&](double k, double sig) { return bs_call_dk(s0, k, sig * sig * T); };
    // tangent at a2 evaluated at k_d stays below half the top price
    auto f1 = [&](double sig) { return c(g.a2, sig) - ck(g.a2, sig) * (g.a2 - g.kd) - 0.5 * g.Cd; };
    // slope at a1 below the chord from (a1, c(a1)) to (k_2, C^2)
    auto f2 = [&](double sig) { return ck(g.a1, sig) - (g.C2 - c(g.a1, sig)) / (g.k2 - g.a1); };
    return {sup_where(f1, 1e-3, 3.0), sup_where(f2, 1e-3, 3.0)};
}

LocalVolSurface dupire_calibrate(const CallStrip& strip, double T, const CalibrationOptions& opt) {
    auto arb = check_strip(strip);
    if (!arb.pass) throw InfeasibleMarket("dupire: strip admits no model (violated: " + arb.violated.front() + ")");
    if (!(T > 0)) throw ParameterError("dupire: maturity must be positive");
    if (opt.nk < 3 || opt.nt < 2 || opt.refine < 1) throw ParameterError("dupire: grid too coarse");
    const auto g = geometry(strip);
    const double s0 = strip.s0;
    auto [sig1, sig2] = sigma_thresholds(strip, T);
    if (sig1 <= 0 || sig2 <= 0) throw CalibrationError("dupire: no admissible base volatility sigma0");
    const double sig0 = std::min(sig1, sig2), v0 = sig0 * sig0 * T;

    LocalVolSurface S;
    S.s0 = s0;
    S.T = T;
    S.sigma0 = sig0;
    S.a1 = g.a1;
    S.a2 = g.a2;
    if (g.k2 / 2 - g.a1 > 1e-3) S.anchors.emplace_back(g.k2 / 2, bs_call(s0, g.k2 / 2, v0));
    for (std::size_t i = 0; i < strip.size(); ++i) S.anchors.emplace_back(strip.strikes[i], strip.prices[i]);
    S.anchors.emplace_back(g.a2, bs_call(s0, g.a2, v0));

    // minimum relative entropy density on [a1, a2] against the sigma0 lognormal density,
    // constrained to reproduce the anchors and the slopes at a1 and a2
    const std::size_t N = (opt.nk - 1) * opt.refine + 1;
    const double du = (g.a2 - g.a1) / static_cast<double>(N - 1);
    Vec u(N), ref(N), W = Vec::Constant(N, du);
    W[0] = W[N - 1] = 0.5 * du;
    for (std::size_t i = 0; i < N; ++i) {
        u[i] = g.a1 + du * static_cast<double>(i);
        ref[i] = bs_call_dkk(s0, u[i], v0);
    }
    u[N - 1] = g.a2;
    const Eigen::Index m = static_cast<Eigen::Index>(S.anchors.size()) + 1;
    Mat H(m, N);
    H.row(0).setOnes();
    for (Eigen::Index j = 1; j < m; ++j) {
        double p = S.anchors[j - 1].first;
        for (std::size_t i = 0; i < N; ++i) H(j, i) = std::max(p - u[i], 0.0);
    }
    const double c1 = bs_call(s0, g.a1, v0), sl1 = bs_call_dk(s0, g.a1, v0), sl2 = bs_call_dk(s0, g.a2, v0);
    Vec b(m);
    b[0] = sl2 - sl1;
    for (Eigen::Index j = 1; j < m; ++j) {
        auto [p, val] = S.anchors[j - 1];
        b[j] = val - c1 - sl1 * (p - g.a1);
    }
    Vec lam = Vec::Zero(m), rho(N);
    auto density = [&](const Vec& l) { return Vec((ref.array() * (H.transpose() * l).array().exp()).matrix()); };
    auto dual = [&](const Vec& l, const Vec& r) { return W.dot(r) - l.dot(b); };
    rho = density(lam);
    double phi_val = dual(lam, rho), gnorm = 0;
    const double tol = 1e-13 * std::max(1.0, b.cwiseAbs().maxCoeff());
    int it = 0;
    for (; it < 200; ++it) {
        Vec wr = W.cwiseProduct(rho);
        Vec grad = H * wr - b;
        gnorm = grad.cwiseAbs().maxCoeff();
        if (gnorm < tol) break;
        Mat J = H * wr.asDiagonal() * H.transpose();
        // symmetric diagonal scaling keeps the solve well conditioned for tiny densities
        Vec d = J.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
        Mat Js = d.asDiagonal() * J * d.asDiagonal();
        Vec step = d.cwiseProduct(Js.ldlt().solve(d.cwiseProduct(grad)));
        double t = 1.0;
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
            Vec cand = lam - t * step;
            Vec rc = density(cand);
            double pc = dual(cand, rc);
            if (std::isfinite(pc) && pc <= phi_val - 1e-4 * t * grad.dot(step) + 1e-15 * std::abs(phi_val)) {
                lam = cand;
                rho = rc;
                phi_val = pc;
                break;
            }
        }
    }
    if (gnorm >= 1e3 * tol)
        throw CalibrationError("dupire: interpolating density did not converge on [" + std::to_string(g.a1) + ", " +
                               std::to_string(g.a2) + "] (constraint residual " + std::to_string(gnorm) + ")");

    // c^I(k, T) = c1 + sl1 (k - a1) + int_{a1}^k (k - u) rho(u) du
    // phi = c^I(., T) - c^BS(., T) integrated from phi'' = rho - ref, phi(a1) = phi'(a1) = 0; direct
    // integration keeps phi on the scale of the densities in the tails
    Vec dp(N), P(N);
    dp[0] = 0;
    P[0] = 0;
    for (std::size_t i = 1; i < N; ++i) {
        dp[i] = dp[i - 1] + 0.5 * ((rho[i] - ref[i]) + (rho[i - 1] - ref[i - 1])) * du;
        P[i] = P[i - 1] + 0.5 * (dp[i] + dp[i - 1]) * du;
    }

    S.k.resize(opt.nk);
    S.t.resize(opt.nt);
    S.phi.resize(opt.nk);
    S.sigma.resize(opt.nk, opt.nt);
    for (std::size_t j = 0; j < opt.nt; ++j) S.t[j] = 0.5 * T + 0.5 * T * static_cast<double>(j) / static_cast<double>(opt.nt - 1);
    S.t.back() = T;
    Vec phi(opt.nk), phikk(opt.nk);
    Mat bkk(opt.nk, opt.nt);
    for (std::size_t i = 0; i < opt.nk; ++i) {
        const std::size_t fi = i * opt.refine;
        S.k[i] = u[fi];
        phi[i] = P[fi];
        phikk[i] = rho[fi] - ref[fi];
        S.phi[i] = phi[i];
        for (std::size_t j = 0; j < opt.nt; ++j) bkk(i, j) = bs_call_dkk(s0, u[fi], sig0 * sig0 * S.t[j]);
    }

    // c^I(k, t) = c^BS(k, t) + w(t)^(p-1) phi(k), so that c~ = c^BS + w^p phi. The smallest p keeping
    // c^I convex and nondecreasing in t and the Dupire ratio of c~ positive is used.
    auto ratio = [&](int p, std::size_t i, std::size_t j, double& num, double& den) {
        const double k = S.k[i], t = S.t[j], x = (t - 0.5 * T) / (0.5 * T);
        const double w = x * x, wp = 8 * (t - 0.5 * T) / (T * T);
        const double W = std::pow(w, p), Wp = p * std::pow(w, p - 1) * wp;
        const double b = bkk(i, j);
        num = sig0 * sig0 + (b > 0 ? 2 * Wp * phi[i] / (k * k * b) : 0.0);
        den = 1 + (b > 0 ? W * phikk[i] / b : 0.0);
        if (p == 1) return b + phikk[i] > 0 || b == 0;
        const double m = std::pow(w, p - 1), mp = (p - 1) * std::pow(w, p - 2) * wp;
        return (b == 0 || b + m * phikk[i] > 0) && 0.5 * sig0 * sig0 * k * k * b + mp * phi[i] >= 0;
    };
    int power = 0;
    std::size_t bad_i = 0;
    for (int p = 1; p <= 16 && power == 0; ++p) {
        bool ok = true;
        for (std::size_t i = 0; i < opt.nk && ok; ++i)
            for (std::size_t j = 0; j < opt.nt && ok; ++j) {
                double num, den;
                ok = ratio(p, i, j, num, den) && num > 0 && den > 1e-10;
                if (!ok) bad_i = std::max(bad_i, i);
            }
        if (ok) power = p;
    }
    if (power == 0) {
        std::ostringstream os;
        os << "dupire: no convex, calendar-monotone interpolant near k in [" << S.k[bad_i > 0 ? bad_i - 1 : 0] << ", "
           << S.k[std::min(bad_i + 1, opt.nk - 1)] << "]";
        throw CalibrationError(os.str());
    }
    S.blend_power = power;
    S.l = S.u = sig0;
    for (std::size_t i = 0; i < opt.nk; ++i)
        for (std::size_t j = 0; j < opt.nt; ++j) {
            double num, den;
            ratio(power, i, j, num, den);
            double sg = std::sqrt(num / std::max(den, 1e-10));
            S.sigma(i, j) = sg;
            S.l = std::min(S.l, sg);
            S.u = std::max(S.u, sg);
        }
    return S;
}

double LocalVolSurface::operator()(double strike, double time) const {
    if (k.empty() || strike < a1 || strike > a2 || time < 0.5 * T) return sigma0;
    const double tt = std::min(time, T);
    auto locate = [](const std::vector<double>& ax, double x, double& f) {
        std::size_t i = static_cast<std::size_t>(std::upper_bound(ax.begin(), ax.end(), x) - ax.begin());
        i = std::clamp<std::size_t>(i, 1, ax.size() - 1) - 1;
        f = std::clamp((x - ax[i]) / (ax[i + 1] - ax[i]), 0.0, 1.0);
        return i;
    };
    double fx, fy;
    std::size_t i = locate(k, strike, fx), j = locate(t, tt, fy);
    return (1 - fx) * ((1 - fy) * sigma(i, j) + fy * sigma(i, j + 1)) +
           fx * ((1 - fy) * sigma(i + 1, j) + fy * sigma(i + 1, j + 1));
}

double LocalVolSurface::call(double strike) const {
    double base = bs_call(s0, strike, sigma0 * sigma0 * T);
    if (k.empty() || strike <= a1 || strike >= a2) return base;
    std::size_t i = static_cast<std::size_t>(std::upper_bound(k.begin(), k.end(), strike) - k.begin()) - 1;
    i = std::min(i, k.size() - 2);
    double f = (strike - k[i]) / (k[i + 1] - k[i]);
    return base + (1 - f) * phi[i] + f * phi[i + 1];
}

void LocalVolSurface::write_csv(std::ostream& os) const {
    os << "k\\t" << std::setprecision(17);
    for (double x : t) os << ',' << x;
    os << '\n';
    for (std::size_t i = 0; i < k.size(); ++i) {
        os << k[i];
        for (std::size_t j = 0; j < t.size(); ++j) os << ',' << sigma(i, j);
        os << '\n';
    }
}

ModelSpec as_model(const LocalVolSurface& surface) {
    auto s = std::make_shared<LocalVolSurface>(surface);
    model::LocalVol lv;
    lv.s0 = surface.s0;
    lv.sigma = [s](double x, double t) { return (*s)(x, t); };
    lv.l = surface.l;
    lv.u = surface.u;
    lv.desc = "dupire";
    return lv;
}

RepriceReport reprice(const LocalVolSurface& surface, const CallStrip& strip, std::size_t n_paths, const TimeGrid& grid,
                      std::uint64_t seed) {
    strip.validate();
    if (n_paths < 2) throw ParameterError("reprice: at least two paths required");
    ModelSpec m = as_model(surface);
    std::vector<double> terminal(n_paths);
    parallel_for(n_paths, [&](std::size_t i) { terminal[i] = simulate(m, grid, stream_seed(seed, i)).values[0].back(); });
    RepriceReport r;
    for (std::size_t j = 0; j < strip.size(); ++j) {
        std::vector<double> pay(n_paths);
        for (std::size_t i = 0; i < n_paths; ++i) pay[i] = std::max(terminal[i] - strip.strikes[j], 0.0);
        Stats s = summarize(pay);
        double target = strip.prices[j];
        double rel = target > 0 ? (s.mean - target) / target : s.mean;
        double band = std::max(0.01, target > 0 ? 3 * s.se / target : 3 * s.se);
        r.prices.push_back(s.mean);
        r.se.push_back(s.se);
        r.rel_error.push_back(rel);
        r.within.push_back(std::abs(rel) <= band);
        r.max_rel_error = std::max(r.max_rel_error, std::abs(rel));
        r.pass = r.pass && r.within.back();
    }
    return r;
}

SupportReport support_diagnostic(const ModelSpec& model, double t, double a, double b, std::size_t n_paths,
                                 std::uint64_t seed, std::size_t steps) {
    if (!(a > 0) || !(b > a)) throw ParameterError("support: need 0 < a < b");
    if (!(t > 0) || n_paths < 2) throw ParameterError("support: need t > 0 and at least two paths");
    TimeGrid grid = TimeGrid::uniform(t, steps);
    std::vector<double> terminal(n_paths);
    parallel_for(n_paths, [&](std::size_t i) { terminal[i] = simulate(model, grid, stream_seed(seed, i)).values[0].back(); });
    std::size_t in = 0, above_a = 0, above_b = 0;
    for (double s : terminal) {
        in += (s > a && s < b);
        above_a += (s >= a);
        above_b += (s >= b);
    }
    const double n = static_cast<double>(n_paths);
    SupportReport r;
    r.probability = in / n;
    r.se = std::sqrt(r.probability * (1 - r.probability) / n);
    r.slope_a = -(above_a / n);
    r.slope_b = -(above_b / n);
    double diff = r.slope_b - r.slope_a, p = diff;
    double se_diff = std::sqrt(std::max(p * (1 - p), 0.0) / n);
    r.strict = diff > 3 * se_diff && diff > 0;
    return r;
}

}  // namespace qvh
