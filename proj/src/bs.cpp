#include "qvh/bs.hpp"

#include <cmath>

namespace qvh {

double bs_call(double s, double k, double v) {
    if (k <= 0) return s - k;
    if (v <= 0) return std::max(s - k, 0.0);
    double sv = std::sqrt(v), d1 = (std::log(s / k) + 0.5 * v) / sv;
    return s * norm_cdf(d1) - k * norm_cdf(d1 - sv);
}

double bs_put(double s, double k, double v) { return bs_call(s, k, v) - s + k; }

double bs_call_dk(double s, double k, double v) {
    if (k <= 0) return -1.0;
    if (v <= 0) return s > k ? -1.0 : 0.0;
    double sv = std::sqrt(v);
    return -norm_cdf((std::log(s / k) - 0.5 * v) / sv);
}

double bs_call_dkk(double s, double k, double v) {
    if (k <= 0 || v <= 0) return 0.0;
    double sv = std::sqrt(v);
    return norm_pdf((std::log(s / k) - 0.5 * v) / sv) / (k * sv);
}

double bs_call_dv(double s, double k, double v) {
    if (k <= 0 || v <= 0) return 0.0;
    double sv = std::sqrt(v);
    return 0.5 * s * norm_pdf((std::log(s / k) + 0.5 * v) / sv) / sv;
}

double bs_convex(const Fn1& g, double s, double v) {
    if (v < 0) throw ParameterError("bs_convex: negative total variance");
    if (v == 0) return g(s);
    using K = Fn1::Kind;
    switch (g.kind()) {
        case K::Constant:
        case K::Linear:
        case K::Identity: return g(s);
        case K::Square: return s * s * std::exp(v);
        case K::Power: return std::pow(s, g.a()) * std::exp(0.5 * g.a() * (g.a() - 1.0) * v);
        case K::NegLog: return -2.0 * std::log(s) + v;
        case K::Call: return bs_call(s, g.a(), v);
        case K::Put: return bs_put(s, g.a(), v);
        case K::Custom: break;
    }
    static const Quadrature gh = gauss_hermite_prob(96);
    double sv = std::sqrt(v), acc = 0;
    for (Eigen::Index i = 0; i < gh.nodes.size(); ++i) {
        double y = g(s * std::exp(sv * gh.nodes[i] - 0.5 * v));
        if (!std::isfinite(y)) throw DomainError("bs_convex: divergent integrand for " + g.describe());
        acc += gh.weights[i] * y;
    }
    if (!std::isfinite(acc)) throw DomainError("bs_convex: divergent integrand for " + g.describe());
    return acc;
}

double bs_implied_sigma(const Fn1& g, double s, double T, double price, double lo, double hi, double tol) {
    auto f = [&](double sig) { return bs_convex(g, s, sig * sig * T) - price; };
    if (f(hi) < 0) return hi;
    if (f(lo) >= 0) return lo;
    for (int it = 0; it < 400; ++it) {
        double m = 0.5 * (lo + hi);
        double fm = f(m);
        if (std::abs(fm) < tol) return m;
        (fm < 0 ? lo : hi) = m;
        if (hi - lo < 1e-15) break;
    }
    return 0.5 * (lo + hi);
}

}  // namespace qvh
