#include "qvh/families.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

namespace qvh {

std::string to_string(Family f) {
    switch (f) {
        case Family::TVS: return "TVS";
        case Family::MFIV: return "MFIV";
        case Family::MFVV: return "MFVV";
        case Family::MFIL: return "MFIL";
    }
    return "?";
}

Family family_from_string(const std::string& s) {
    for (Family f : {Family::TVS, Family::MFIV, Family::MFVV, Family::MFIL})
        if (to_string(f) == s) return f;
    throw ParameterError("unknown family '" + s + "'");
}

namespace {
double coef(const std::vector<double>& c, std::size_t i) { return i < c.size() ? c[i] : 0.0; }

struct Ratio {
    double r, r1, r2;
};

// c x^p as (c, p) when f is a monomial
std::optional<std::pair<double, double>> monomial(const Fn1& f) {
    switch (f.kind()) {
        case Fn1::Kind::Constant: return std::pair{f.a(), 0.0};
        case Fn1::Kind::Identity: return std::pair{1.0, 1.0};
        case Fn1::Kind::Square: return std::pair{1.0, 2.0};
        case Fn1::Kind::Power: return std::pair{1.0, f.a()};
        default: return std::nullopt;
    }
}

// c x^p for g''
std::optional<std::pair<double, double>> second_derivative_monomial(const Fn1& g) {
    switch (g.kind()) {
        case Fn1::Kind::NegLog: return std::pair{2.0, -2.0};
        case Fn1::Kind::Square: return std::pair{2.0, 0.0};
        case Fn1::Kind::Identity:
        case Fn1::Kind::Linear:
        case Fn1::Kind::Constant: return std::pair{0.0, 0.0};
        case Fn1::Kind::Power: return std::pair{g.a() * (g.a() - 1), g.a() - 2};
        default: return std::nullopt;
    }
}

// ratio r(s) = g''(s) / w_s(s) and its first two derivatives; central differences unless both are monomials
Ratio ratio(const Ingredients& ing, double s) {
    auto num = second_derivative_monomial(ing.g);
    auto den = monomial(ing.w_s);
    if (num && den && den->first != 0.0) {
        double c = num->first / den->first, p = num->second - den->second;
        double r0 = c * std::pow(s, p);
        return {r0, p == 0 ? 0.0 : c * p * std::pow(s, p - 1), p == 0 || p == 1 ? 0.0 : c * p * (p - 1) * std::pow(s, p - 2)};
    }
    auto r = [&](double x) { return ing.g.d2(x) / ing.w_s(x); };
    double h = 1e-3 * std::max(1.0, std::abs(s));
    double rp = r(s + h), r0 = r(s), rm = r(s - h);
    return {r0, (rp - rm) / (2 * h), (rp - 2 * r0 + rm) / (h * h)};
}

// 1/w_l and its derivatives
Ratio inv_weight(const Fn1& w, double s) {
    auto r = [&](double x) { return 1.0 / w(x); };
    double h = 1e-3 * std::max(1.0, std::abs(s));
    double rp = r(s + h), r0 = r(s), rm = r(s - h);
    return {r0, (rp - rm) / (2 * h), (rp - 2 * r0 + rm) / (h * h)};
}

bool affine_on(const std::function<double(double)>& r, double a, double b) {
    double ra = r(a), rb = r(b), scale = std::max({1.0, std::abs(ra), std::abs(rb)});
    for (int i = 1; i < 8; ++i) {
        double s = a + (b - a) * i / 8.0;
        double lin = ra + (rb - ra) * (s - a) / (b - a);
        if (std::abs(r(s) - lin) > 1e-9 * scale) return false;
    }
    return true;
}
}  // namespace

ScalarField family(Family tag, const std::vector<double>& c, const Ingredients& ing) {
    ScalarField F;
    F.name = to_string(tag);
    switch (tag) {
        case Family::TVS: {
            double c1 = coef(c, 0), c2 = coef(c, 1), c3 = coef(c, 2);
            F.value = [=](const Vec& x) { return c1 * (x[0] * x[2] - x[1]) + c2 * x[2] + c3; };
            F.gradient = [=](const Vec& x) -> Vec {
                Vec g(3);
                g << c1 * x[2], -c1, c1 * x[0] + c2;
                return g;
            };
            F.hessian = [=](const Vec&) -> Mat {
                Mat H = Mat::Zero(3, 3);
                H(0, 2) = H(2, 0) = c1;
                return H;
            };
            return F;
        }
        case Family::MFVV: {
            double c1 = coef(c, 0), c2 = coef(c, 1), c3 = coef(c, 2);
            Fn1 g = ing.g;
            F.value = [=](const Vec& x) { return c1 * (g(x[0]) + x[1]) + c2 * x[0] + c3; };
            F.gradient = [=](const Vec& x) -> Vec {
                Vec d = Vec::Zero(5);
                d[0] = c1 * g.d1(x[0]) + c2;
                d[1] = c1;
                return d;
            };
            F.hessian = [=](const Vec& x) -> Mat {
                Mat H = Mat::Zero(5, 5);
                H(0, 0) = c1 * g.d2(x[0]);
                return H;
            };
            return F;
        }
        case Family::MFIV: {
            double c1 = coef(c, 0), c2 = coef(c, 1), k = ing.kappa;
            Ingredients in = ing;
            auto Fh = ing.F_h;
            F.value = [=](const Vec& x) {
                double s = x[0];
                double v = c1 * (x[1] + in.g(s)) + c2 * (k * ratio(in, s).r * x[2] - in.g(s));
                return Fh ? v + Fh->value(x) : v;
            };
            F.gradient = [=](const Vec& x) -> Vec {
                double s = x[0];
                Ratio r = ratio(in, s);
                Vec d = Vec::Zero(5);
                d[0] = c1 * in.g.d1(s) + c2 * (k * r.r1 * x[2] - in.g.d1(s));
                d[1] = c1;
                d[2] = c2 * k * r.r;
                if (Fh) d += Fh->grad(x);
                return d;
            };
            F.hessian = [=](const Vec& x) -> Mat {
                double s = x[0];
                Ratio r = ratio(in, s);
                Mat H = Mat::Zero(5, 5);
                H(0, 0) = c1 * in.g.d2(s) + c2 * (k * r.r2 * x[2] - in.g.d2(s));
                H(0, 2) = H(2, 0) = c2 * k * r.r1;
                if (Fh) H += Fh->hess(x);
                return H;
            };
            return F;
        }
        case Family::MFIL: {
            double c1 = coef(c, 0), c2 = coef(c, 1), c3 = coef(c, 2), c4 = coef(c, 3), k = ing.kappa;
            if (c1 != 0.0 && !affine_on([&](double s) { return 1.0 / ing.w_l(s); }, 0.25 * ing.s_ref, 4 * ing.s_ref))
                throw ParameterError("MFIL: 1/w_l must be affine unless c1 = 0");
            Fn1 G = g_double_primitive(ing.g, ing.s_ref), g = ing.g, wl = ing.w_l;
            F.value = [=](const Vec& x) {
                double s = x[0];
                return c1 * (s * x[1] + k * G(s) - x[4] * inv_weight(wl, s).r) + c2 * (x[1] + g(s)) + c3 * s + c4;
            };
            F.gradient = [=](const Vec& x) -> Vec {
                double s = x[0];
                Ratio iw = inv_weight(wl, s);
                Vec d = Vec::Zero(5);
                d[0] = c1 * (x[1] + k * G.d1(s) - x[4] * iw.r1) + c2 * g.d1(s) + c3;
                d[1] = c1 * s + c2;
                d[4] = -c1 * iw.r;
                return d;
            };
            F.hessian = [=](const Vec& x) -> Mat {
                double s = x[0];
                Ratio iw = inv_weight(wl, s);
                Mat H = Mat::Zero(5, 5);
                H(0, 0) = c1 * (k * G.d2(s) - x[4] * iw.r2) + c2 * g.d2(s);
                H(0, 1) = H(1, 0) = c1;
                H(0, 4) = H(4, 0) = -c1 * iw.r1;
                return H;
            };
            return F;
        }
    }
    throw ParameterError("unknown family");
}

std::shared_ptr<const FunctionalSpec> five_component_spec(const Ingredients& ing) {
    using namespace comp;
    return std::make_shared<FunctionalSpec>(
        std::vector<std::string>{"S", "C"},
        std::vector<Component>{Asset{"S"}, TimeValue{"S", "C", ing.g}, WeightedQV{0, Weight{ing.w_s, 0}},
                               WeightedQV{1, Weight{ing.w_v, 0}}, CrossVar{0, 1, Weight{ing.w_l, 0}}},
        std::vector<std::string>{"s", "v", "q_s", "q_v", "l"});
}

std::shared_ptr<const FunctionalSpec> tvs_spec() {
    using namespace comp;
    return std::make_shared<FunctionalSpec>(std::vector<std::string>{"S"},
                                            std::vector<Component>{Time{}, TimeIntegral{2}, Asset{"S"}},
                                            std::vector<std::string>{"t", "v", "s"});
}

Box default_box(Family tag) {
    if (tag == Family::TVS) return {{0.0, 1.0}, {0.0, 1.0}, {0.5, 1.5}};
    return {{0.5, 2.0}, {0.01, 1.0}, {0.0, 1.0}, {0.0, 1.0}, {-1.0, 1.0}};
}

namespace {
AdjudicationReport::Variant variant(std::string label, double coefficient, bool stated) {
    AdjudicationReport::Variant v;
    v.label = std::move(label);
    v.coefficient = coefficient;
    v.stated = stated;
    return v;
}
}  // namespace

AdjudicationReport adjudicate(Family tag, const Ingredients& ing, const Box& box, std::size_t samples) {
    AdjudicationReport rep;
    rep.tag = tag;
    auto pts = halton(box, samples);
    std::vector<AdjudicationReport::Variant> vars;
    std::vector<double> c;
    switch (tag) {
        case Family::TVS:
            vars = {variant("stated", 1.0, true)};
            c = {1, 1, 1};
            break;
        case Family::MFVV:
            vars = {variant("stated", 1.0, true)};
            c = {1, 1, 1};
            break;
        case Family::MFIV:
            vars = {variant("kappa=1 (stated)", 1.0, true), variant("kappa=1/2", 0.5, false)};
            c = {1, 1};
            break;
        case Family::MFIL:
            vars = {variant("G coefficient 1/2 (stated)", 0.5, true), variant("G coefficient 1", 1.0, false)};
            c = {1, 0, 0, 0};
            break;
    }
    if (tag == Family::MFIV) {
        // outside the affine g''/w_s class the particular solution does not exist
        double lo = box[0].first, hi = box[0].second;
        if (!affine_on([&](double s) { return ing.g.d2(s) / ing.w_s(s); }, lo, hi))
            throw AdjudicationFailure("MFIV: g''/w_s is not affine on [" + std::to_string(lo) + ", " +
                                      std::to_string(hi) + "]");
    }
    auto spec = tag == Family::TVS ? tvs_spec() : five_component_spec(ing);
    for (auto& v : vars) {
        Ingredients in = ing;
        in.kappa = v.coefficient;
        ScalarField F = family(tag, c, in);
        auto r = residual(F, *spec, pts);
        v.residual = r.max_abs;
        v.worst_point = r.worst_point;
    }
    rep.variants = vars;
    double best = 1e-8;
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i].residual < best) {
            best = vars[i].residual;
            rep.selected = static_cast<int>(i);
        }
    for (auto& v : vars)
        if (v.stated && v.residual > 1e-3) rep.discrepancy = true;
    if (rep.selected < 0) {
        std::ostringstream os;
        os << to_string(tag) << ": no coefficient variant satisfies the system;";
        for (auto& v : vars) os << " " << v.label << " residual " << v.residual << ";";
        throw AdjudicationFailure(os.str());
    }
    return rep;
}

Fn1 g_double_primitive(const Fn1& g, double s_ref) {
    using K = Fn1::Kind;
    switch (g.kind()) {
        case K::Constant:
        case K::Linear:
        case K::Identity: return Fn1::constant(0.0);
        case K::NegLog:
        case K::Power:
            if (g.kind() == K::NegLog || g.a() == -1.0) {
                // G'' = c / x with c = 2 (-2 log) or p(p-1) = 2 (p = -1)
                if (!(s_ref > 0)) throw DomainError("double primitive: s_ref must be positive for this g");
                return Fn1::custom([=](double x) { return 2 * (x * std::log(x / s_ref) - x + s_ref); },
                                   [=](double x) { return 2 * std::log(x / s_ref); }, [](double x) { return 2 / x; },
                                   "G[" + g.describe() + "]");
            } else {
                double p = g.a();
                if (p == 0.0 || p == 1.0) return Fn1::constant(0.0);
                double sp = std::pow(s_ref, p), sp1 = sp * s_ref;
                return Fn1::custom(
                    [=](double x) { return (p - 1) * ((std::pow(x, p + 1) - sp1) / (p + 1) - sp * (x - s_ref)); },
                    [=](double x) { return (p - 1) * (std::pow(x, p) - sp); },
                    [=](double x) { return p * (p - 1) * std::pow(x, p - 1); }, "G[" + g.describe() + "]");
            }
        case K::Square:
            return Fn1::custom([=](double x) { return x * x * x / 3 - s_ref * s_ref * x + 2 * s_ref * s_ref * s_ref / 3; },
                               [=](double x) { return x * x - s_ref * s_ref; }, [](double x) { return 2 * x; },
                               "G[x^2]");
        case K::Call:
        case K::Put: {
            double k = g.a();
            auto between = [=](double x) { return (s_ref < k && k < x) || (x < k && k < s_ref); };
            return Fn1::custom([=](double x) { return between(x) ? k * std::abs(x - k) : 0.0; },
                               [=](double x) { return between(x) ? (x > k ? k : -k) : 0.0; },
                               [](double) { return 0.0; }, "G[" + g.describe() + "]");
        }
        case K::Custom: break;
    }
    // G(x) = int_{s_ref}^x (x - z) z g''(z) dz, G'(x) = int_{s_ref}^x z g''(z) dz
    static const Quadrature gl = gauss_legendre(64, 0.0, 1.0);
    auto integral = [g, s_ref](double x, bool value) {
        double acc = 0;
        for (Eigen::Index i = 0; i < gl.nodes.size(); ++i) {
            double z = s_ref + (x - s_ref) * gl.nodes[i];
            double v = z * g.d2(z) * (value ? (x - z) : 1.0);
            if (!std::isfinite(v)) throw DomainError("double primitive: non-integrable g'' between s_ref and x");
            acc += gl.weights[i] * v;
        }
        return acc * (x - s_ref);
    };
    return Fn1::custom([=](double x) { return integral(x, true); }, [=](double x) { return integral(x, false); },
                       [g](double x) { return x * g.d2(x); }, "G[" + g.describe() + "]");
}

std::vector<double> azema_yor_residual(const Path& path, Extremum variant, const std::optional<Fn1>& slope) {
    const auto& s = path.values;
    std::vector<double> r(s.size(), 0.0);
    if (s.empty()) return r;
    double M = s[0], m = s[0], qv = 0, stoch = 0, prim = 0;
    static const Quadrature gl = gauss_legendre(16, 0.0, 1.0);
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (k > 0) {
            double ds = s[k] - s[k - 1];
            double gap = variant == Extremum::Max ? M - s[k - 1] : s[k - 1] - m;
            qv += ds * ds;
            if (slope) {
                double e = variant == Extremum::Max ? M : m;
                stoch += (*slope)(e)*ds;
            } else {
                stoch += gap * ds;
            }
            double e_old = variant == Extremum::Max ? M : m;
            M = std::max(M, s[k]);
            m = std::min(m, s[k]);
            double e_new = variant == Extremum::Max ? M : m;
            if (slope && e_new != e_old)
                for (Eigen::Index i = 0; i < gl.nodes.size(); ++i)
                    prim += gl.weights[i] * (e_new - e_old) * (*slope)(e_old + (e_new - e_old) * gl.nodes[i]);
        }
        if (slope) {
            double e = variant == Extremum::Max ? M : m;
            r[k] = (*slope)(e) * (e - s[k]) - prim + stoch;
        } else if (variant == Extremum::Max) {
            double d = M - s[k];
            r[k] = d * d - qv + 2 * stoch;
        } else {
            double d = s[k] - m;
            r[k] = d * d - qv - 2 * stoch;
        }
    }
    return r;
}

ScalarField change_coordinates(const ScalarField& F, Direction dir) {
    ScalarField out;
    if (dir == Direction::DrawdownToMax) {
        // y(x) = (x1, (x2 - x1)^2, x3)
        auto map = [](const Vec& x) {
            Vec y = x;
            y[1] = (x[1] - x[0]) * (x[1] - x[0]);
            return y;
        };
        out.value = [=](const Vec& x) { return F.value(map(x)); };
        out.gradient = [=](const Vec& x) -> Vec {
            Vec g = F.grad(map(x));
            double u = x[1] - x[0];
            Vec r = x;
            r[0] = g[0] - 2 * u * g[1];
            r[1] = 2 * u * g[1];
            r[2] = g[2];
            return r;
        };
        out.hessian = [=](const Vec& x) -> Mat {
            Vec y = map(x);
            Vec g = F.grad(y);
            Mat H = F.hess(y);
            double u = x[1] - x[0];
            Mat J = Mat::Identity(3, 3);
            J(1, 0) = -2 * u;
            J(1, 1) = 2 * u;
            Mat R = J.transpose() * H * J;
            R(0, 0) += 2 * g[1];
            R(0, 1) -= 2 * g[1];
            R(1, 0) -= 2 * g[1];
            R(1, 1) += 2 * g[1];
            return R;
        };
        out.name = F.name + " o y";
        return out;
    }
    // y~(x) = (x1, x1 + sqrt(x2), x3)
    auto map = [](const Vec& x) {
        if (x[1] < 0) throw DomainError("change_coordinates: squared drawdown must be nonnegative");
        Vec y = x;
        y[1] = x[0] + std::sqrt(x[1]);
        return y;
    };
    constexpr double kTiny = 1e-12;
    out.value = [=](const Vec& x) { return F.value(map(x)); };
    out.gradient = [=](const Vec& x) -> Vec {
        Vec y = map(x);
        Vec g = F.grad(y);
        Vec r = x;
        r[0] = g[0] + g[1];
        // right limit at d = 0: half the second derivative in the max coordinate
        r[1] = x[1] < kTiny ? 0.5 * F.hess(y)(1, 1) : g[1] / (2 * std::sqrt(x[1]));
        r[2] = g[2];
        return r;
    };
    out.hessian = [=](const Vec& x) -> Mat {
        Vec xc = x;
        xc[1] = std::max(x[1], kTiny);
        Vec y = map(xc);
        Vec g = F.grad(y);
        Mat H = F.hess(y);
        double rd = std::sqrt(xc[1]);
        Mat J = Mat::Identity(3, 3);
        J(1, 0) = 1;
        J(1, 1) = 1 / (2 * rd);
        Mat R = J.transpose() * H * J;
        R(1, 1) += g[1] * (-0.25 / (xc[1] * rd));
        return R;
    };
    out.name = F.name + " o ytilde";
    return out;
}

}  // namespace qvh
