#include "qvh/pde.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace qvh {

ScalarField combine(double a, const ScalarField& F, double b, const ScalarField& G) {
    ScalarField H;
    H.value = [=](const Vec& x) { return a * F.value(x) + b * G.value(x); };
    if (F.gradient && G.gradient) H.gradient = [=](const Vec& x) -> Vec { return a * F.gradient(x) + b * G.gradient(x); };
    if (F.hessian && G.hessian) H.hessian = [=](const Vec& x) -> Mat { return a * F.hessian(x) + b * G.hessian(x); };
    H.box = F.box;
    H.name = F.name + "+" + G.name;
    return H;
}

OperatorValues<double> operators(const ScalarField& F, const FunctionalSpec& spec, const Vec& x) {
    if (static_cast<std::size_t>(x.size()) != spec.n()) throw AlignmentError("operators: state dimension mismatch");
    if (!F.contains(x)) {
        std::ostringstream os;
        os << "operators: point (" << x.transpose() << ") outside the domain of " << F.name;
        throw DomainError(os.str());
    }
    auto c = spec.coefficients(x);
    Vec g = F.grad(x);
    Mat H = F.hess(x);
    OperatorValues<double> o;
    o.l_gamma = c.gamma.dot(g);
    o.l_alpha = c.alpha.transpose() * g;
    o.l_ab = 0.5 * c.alpha.transpose() * H * c.alpha;
    for (std::size_t k = 0; k < spec.n(); ++k)
        if (g[k] != 0.0) o.l_ab += g[k] * c.beta[k];
    return o;
}

ResidualReport residual(const ScalarField& F, const FunctionalSpec& spec, const std::vector<Vec>& samples) {
    if (samples.empty()) throw ParameterError("residual: empty sample list");
    ResidualReport r;
    r.samples = samples.size();
    r.max_ab = Mat::Zero(spec.d(), spec.d());
    r.max_abs = -1;
    for (auto& x : samples) {
        auto o = operators(F, spec, x);
        double here = std::abs(o.l_gamma);
        std::string eq = "gamma";
        r.max_gamma = std::max(r.max_gamma, std::abs(o.l_gamma));
        for (Eigen::Index i = 0; i < o.l_ab.rows(); ++i)
            for (Eigen::Index j = 0; j < o.l_ab.cols(); ++j) {
                double v = std::abs(o.l_ab(i, j));
                r.max_ab(i, j) = std::max(r.max_ab(i, j), v);
                if (v > here) {
                    here = v;
                    eq = "ab[" + std::to_string(i) + "][" + std::to_string(j) + "]";
                }
            }
        if (here > r.max_abs) {
            r.max_abs = here;
            r.worst_point = x;
            r.worst_equation = eq;
        }
    }
    return r;
}

ResidualReport residual(const ScalarField& F, const FunctionalSpec& spec, const Box& box, std::size_t count) {
    return residual(F, spec, halton(box, count));
}

// ---------------------------------------------------------------------------------------------

GridField::GridField(std::vector<double> x, std::vector<double> y, Mat values, int order)
    : x_(std::move(x)), y_(std::move(y)), v_(std::move(values)), order_(order) {
    if (x_.size() < 2 || y_.size() < 2) throw ParameterError("grid field: each axis needs two nodes");
    if (v_.rows() != static_cast<Eigen::Index>(x_.size()) || v_.cols() != static_cast<Eigen::Index>(y_.size()))
        throw ParameterError("grid field: value matrix does not match the axes");
    if (order_ != 1 && order_ != 3) throw ParameterError("grid field: order must be 1 or 3");
    if (!v_.allFinite()) throw ParameterError("grid field: nodal values must be finite");
    for (auto* ax : {&x_, &y_})
        for (std::size_t i = 1; i < ax->size(); ++i)
            if (!((*ax)[i] > (*ax)[i - 1])) throw ParameterError("grid field: axes must be strictly increasing");
}

namespace {
struct Basis {
    int start = 0, count = 0;
    double w[4] = {}, d[4] = {}, dd[4] = {};
};

Basis basis(const std::vector<double>& ax, double x, int order) {
    const int n = static_cast<int>(ax.size());
    int i = static_cast<int>(std::upper_bound(ax.begin(), ax.end(), x) - ax.begin()) - 1;
    i = std::clamp(i, 0, n - 2);
    Basis b;
    if (order == 1 || n < 4) {
        double h = ax[i + 1] - ax[i], t = (x - ax[i]) / h;
        b.start = i;
        b.count = 2;
        b.w[0] = 1 - t;
        b.w[1] = t;
        b.d[0] = -1 / h;
        b.d[1] = 1 / h;
        return b;
    }
    b.start = std::clamp(i - 1, 0, n - 4);
    b.count = 4;
    const double* z = &ax[b.start];
    for (int j = 0; j < 4; ++j) {
        double r[3];
        double den = 1;
        int c = 0;
        for (int m = 0; m < 4; ++m)
            if (m != j) {
                r[c++] = x - z[m];
                den *= z[j] - z[m];
            }
        b.w[j] = r[0] * r[1] * r[2] / den;
        b.d[j] = (r[1] * r[2] + r[0] * r[2] + r[0] * r[1]) / den;
        b.dd[j] = 2 * (r[0] + r[1] + r[2]) / den;
    }
    return b;
}

void check_hull(const std::vector<double>& ax, double x, const char* axis, double other, bool first) {
    double tol = 1e-12 * std::max(1.0, std::abs(ax.back() - ax.front()));
    if (x < ax.front() - tol || x > ax.back() + tol || std::isnan(x)) {
        double nearest = std::clamp(x, ax.front(), ax.back());
        std::ostringstream os;
        os << "grid field: " << axis << " = " << x << " outside [" << ax.front() << ", " << ax.back()
           << "]; nearest grid point (" << (first ? nearest : other) << ", " << (first ? other : nearest) << ")";
        throw DomainError(os.str());
    }
}
}  // namespace

GridField::Eval GridField::eval(double x, double y) const {
    check_hull(x_, x, "x1", y, true);
    check_hull(y_, y, "x2", x, false);
    Basis bx = basis(x_, x, order_), by = basis(y_, y, order_);
    Eval e;
    for (int a = 0; a < bx.count; ++a)
        for (int b = 0; b < by.count; ++b) {
            double v = v_(bx.start + a, by.start + b);
            e.value += bx.w[a] * by.w[b] * v;
            e.grad[0] += bx.d[a] * by.w[b] * v;
            e.grad[1] += bx.w[a] * by.d[b] * v;
            e.hess(0, 0) += bx.dd[a] * by.w[b] * v;
            e.hess(0, 1) += bx.d[a] * by.d[b] * v;
            e.hess(1, 1) += bx.w[a] * by.dd[b] * v;
        }
    e.hess(1, 0) = e.hess(0, 1);
    return e;
}

ScalarField GridField::as_field(std::string name) const {
    ScalarField F;
    auto self = std::make_shared<GridField>(*this);
    F.value = [self](const Vec& x) { return self->eval(x[0], x[1]).value; };
    F.gradient = [self](const Vec& x) -> Vec {
        Vec g = Vec::Zero(x.size());
        g.head<2>() = self->eval(x[0], x[1]).grad;
        return g;
    };
    F.hessian = [self](const Vec& x) -> Mat {
        Mat H = Mat::Zero(x.size(), x.size());
        H.topLeftCorner<2, 2>() = self->eval(x[0], x[1]).hess;
        return H;
    };
    F.box = {{x_.front(), x_.back()}, {y_.front(), y_.back()}};
    F.name = std::move(name);
    return F;
}

void GridField::write_csv(std::ostream& os) const {
    os << "x1\\x2";
    os << std::setprecision(17);
    for (double y : y_) os << ',' << y;
    os << '\n';
    for (std::size_t i = 0; i < x_.size(); ++i) {
        os << x_[i];
        for (std::size_t j = 0; j < y_.size(); ++j) os << ',' << v_(i, j);
        os << '\n';
    }
}

// ---------------------------------------------------------------------------------------------

namespace {

// geometric when lo > 0; with [s0/c, s0 c] and n odd, s0 is the middle node
std::vector<double> geometric_nodes(double lo, double hi, std::size_t n) {
    std::vector<double> x(n);
    if (lo > 0) {
        double L = std::log(hi / lo);
        for (std::size_t i = 0; i < n; ++i) x[i] = lo * std::exp(L * static_cast<double>(i) / static_cast<double>(n - 1));
    } else {
        for (std::size_t i = 0; i < n; ++i) x[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    x.front() = lo;
    x.back() = hi;
    return x;
}

// dF/dr = a(x) F_xx on interior nodes, Dirichlet data on both edges held by the caller.
class Marcher {
public:
    Marcher(const std::vector<double>& x, const Fn1& w) : x_(x), n_(x.size()) {
        lo_.resize(n_);
        di_.resize(n_);
        up_.resize(n_);
        for (std::size_t i = 1; i + 1 < n_; ++i) {
            double wi = w(x_[i]);
            if (!(wi > 0) || !std::isfinite(wi)) throw ParameterError("parabolic solver: w must be positive on the domain");
            double a = 1.0 / (2.0 * wi);
            double hm = x_[i] - x_[i - 1], hp = x_[i + 1] - x_[i];
            lo_[i] = 2 * a / (hm * (hm + hp));
            up_[i] = 2 * a / (hp * (hm + hp));
            di_[i] = -(lo_[i] + up_[i]);
        }
        c_.resize(n_);
        d_.resize(n_);
        rhs_.resize(n_);
    }

    // theta-scheme step of size dr (theta = 1 implicit Euler, 1/2 Crank-Nicolson)
    void step(std::vector<double>& F, double dr, double theta) {
        const double e = (1 - theta) * dr, im = theta * dr;
        rhs_[0] = F[0];
        rhs_[n_ - 1] = F[n_ - 1];
        for (std::size_t i = 1; i + 1 < n_; ++i)
            rhs_[i] = F[i] + e * (lo_[i] * F[i - 1] + di_[i] * F[i] + up_[i] * F[i + 1]);
        // Thomas algorithm, identity rows at the edges
        c_[0] = 0;
        d_[0] = rhs_[0];
        for (std::size_t i = 1; i + 1 < n_; ++i) {
            double a = -im * lo_[i], b = 1 - im * di_[i], c = -im * up_[i];
            double m = b - a * c_[i - 1];
            c_[i] = c / m;
            d_[i] = (rhs_[i] - a * d_[i - 1]) / m;
        }
        F[n_ - 1] = rhs_[n_ - 1];
        for (std::size_t i = n_ - 1; i-- > 1;) F[i] = d_[i] - c_[i] * F[i + 1];
        F[0] = rhs_[0];
    }

private:
    const std::vector<double>& x_;
    std::size_t n_;
    std::vector<double> lo_, di_, up_, c_, d_, rhs_;
};

GridField march_clock(const std::vector<double>& x, const Fn1& f, const Fn1& w, double q, const GridSpec& g) {
    const std::size_t nx = x.size(), nt = g.nt;
    Marcher m(x, w);
    std::vector<double> F(nx);
    for (std::size_t i = 0; i < nx; ++i) F[i] = f(x[i]);
    Mat V(nx, nt + 1);
    // column j holds clock x2 = j q / nt; the march runs from x2 = q down to 0
    for (std::size_t i = 0; i < nx; ++i) V(i, nt) = F[i];
    const double dr = q / static_cast<double>(nt);
    for (std::size_t j = 1; j <= nt; ++j) {
        if (g.rannacher && j <= 2) {
            m.step(F, 0.5 * dr, 1.0);
            m.step(F, 0.5 * dr, 1.0);
        } else {
            m.step(F, dr, 0.5);
        }
        for (std::size_t i = 0; i < nx; ++i) V(i, nt - j) = F[i];
    }
    std::vector<double> y(nt + 1);
    for (std::size_t j = 0; j <= nt; ++j) y[j] = q * static_cast<double>(j) / static_cast<double>(nt);
    y.back() = q;
    return GridField(x, std::move(y), std::move(V), 3);
}

template <class... Ts> struct overloaded : Ts... { using Ts::operator()...; };
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

GridField solve_parabolic(const BoundaryProblem& p, const GridSpec& g) {
    if (g.nx < 5 || g.nt < 3) throw ParameterError("parabolic solver: grid too coarse");
    return std::visit(
        overloaded{
            [&](const problem::Timer& t) {
                if (!(t.q > 0)) throw ParameterError("timer: q must be positive");
                if (!(t.s0 > 0) || !(g.width > 1)) throw ParameterError("timer: need s0 > 0 and width > 1");
                auto x = geometric_nodes(t.s0 / g.width, t.s0 * g.width, g.nx);
                return march_clock(x, t.f, t.w, t.q, g);
            },
            [&](const problem::BarrierTimer& t) {
                if (!(t.q > 0)) throw ParameterError("barrier timer: q must be positive");
                if (!(t.l < t.u)) throw ParameterError("barrier timer: need l < u");
                if (std::abs(t.f(t.l)) > 1e-12 || std::abs(t.f(t.u)) > 1e-12)
                    throw ParameterError("barrier timer: payoff must vanish at l and u");
                auto x = geometric_nodes(t.l, t.u, g.nx);
                return march_clock(x, t.f, t.w, t.q, g);
            },
            [&](const problem::Corridor& c) {
                if (!(c.l < c.u)) throw ParameterError("corridor: need l < u");
                if (!(c.q_max > 0) || c.nq < 2) throw ParameterError("corridor: need q_max > 0 and nq >= 2");
                auto x = geometric_nodes(c.l, c.u, g.nx);
                const std::size_t nx = x.size();
                // survival u(x, r) = P(remaining clock > r); E f(q + R) from its decrements
                Quadrature gl = gauss_legendre(64, c.l, c.u);
                double Ly = 0;
                for (Eigen::Index i = 0; i < gl.nodes.size(); ++i) Ly += gl.weights[i] * std::sqrt(2 * c.w(gl.nodes[i]));
                const double tau = Ly * Ly / (kPi * kPi);
                const double r_max = c.r_max > 0 ? c.r_max : 40 * tau;
                const double dr_max = tau / static_cast<double>(g.nt), dr_min = 1e-6 * tau;
                Marcher m(x, c.w);
                std::vector<double> u(nx, 1.0), un;
                u.front() = u.back() = 0.0;
                std::vector<double> qs(c.nq);
                for (std::size_t j = 0; j < c.nq; ++j) qs[j] = c.q_max * static_cast<double>(j) / static_cast<double>(c.nq - 1);
                Mat F(nx, c.nq);
                for (std::size_t i = 0; i < nx; ++i)
                    for (std::size_t j = 0; j < c.nq; ++j) F(i, j) = (1 - u[i]) * c.f(qs[j]);
                double r = 0, dr = dr_min;
                int k = 0;
                std::vector<double> fmid(c.nq);
                while (r < r_max) {
                    un = u;
                    double h = std::min(dr, r_max - r);
                    m.step(un, h, k < 4 ? 1.0 : 0.5);
                    for (std::size_t j = 0; j < c.nq; ++j) fmid[j] = c.f(qs[j] + r + 0.5 * h);
                    for (std::size_t i = 1; i + 1 < nx; ++i) {
                        double du = u[i] - un[i];
                        for (std::size_t j = 0; j < c.nq; ++j) F(i, j) += fmid[j] * du;
                    }
                    u.swap(un);
                    r += h;
                    ++k;
                    dr = std::min(dr * 1.05, dr_max);
                }
                for (std::size_t i = 1; i + 1 < nx; ++i)
                    for (std::size_t j = 0; j < c.nq; ++j) F(i, j) += c.f(qs[j] + r) * u[i];
                return GridField(x, qs, std::move(F), 3);
            },
        },
        p);
}

// ---------------------------------------------------------------------------------------------

LookbackField::LookbackField(Payoff f, double q, Payoff f_m, int nodes, double radius)
    : f_(std::move(f)), fm_(std::move(f_m)), q_(q), R_(radius), gl_(gauss_legendre(nodes, 0.0, 1.0)) {
    if (!(q > 0)) throw ParameterError("lookback: q must be positive");
    if (!fm_) {
        fm_ = [g = f_](double s, double m) {
            double h = 1e-6 * std::max(1.0, std::abs(m));
            return (g(s, m + h) - g(s, m - h)) / (2 * h);
        };
    }
}

// sum over the scaled (max, drawdown) variables with density 2(mu+nu) phi(mu+nu)
template <class G>
double LookbackField::integrate(const Vec& x, bool below_only, G&& g) const {
    if (x[2] > q_ * (1 + 1e-12) + 1e-12) throw DomainError("lookback: x3 exceeds q");
    const double tau = std::max(q_ - x[2], 0.0), st = std::sqrt(tau);
    const double x1 = x[0], x2 = x[1];
    if (st == 0) return below_only ? 0.0 : g(x1, std::max(x1, x2), false);
    const double mc = std::clamp((x2 - x1) / st, 0.0, R_);
    double acc = 0;
    auto piece = [&](double a, double b, bool below) {
        if (b <= a) return;
        for (Eigen::Index i = 0; i < gl_.nodes.size(); ++i) {
            double mu = a + (b - a) * gl_.nodes[i], wm = (b - a) * gl_.weights[i];
            double m = below ? x2 : x1 + st * mu;
            for (Eigen::Index j = 0; j < gl_.nodes.size(); ++j) {
                double nu = R_ * gl_.nodes[j], z = mu + nu;
                double dens = 2 * z * norm_pdf(z);
                acc += wm * R_ * gl_.weights[j] * dens * g(x1 + st * (mu - nu), m, below);
            }
        }
    };
    piece(0.0, mc, true);
    if (!below_only) piece(mc, R_, false);
    return acc;
}

double LookbackField::value(const Vec& x) const {
    return integrate(x, false, [&](double s, double m, bool) { return f_(s, m); });
}

double LookbackField::dm(const Vec& x) const {
    return integrate(x, true, [&](double s, double m, bool) { return fm_(s, m); });
}

ScalarField LookbackField::as_field() const {
    ScalarField F;
    auto self = std::make_shared<LookbackField>(*this);
    F.value = [self](const Vec& x) { return self->value(x); };
    F.name = "lookback";
    return F;
}

LookbackField lookback_field(LookbackField::Payoff f, double q) { return LookbackField(std::move(f), q); }

}  // namespace qvh
