#pragma once

#include "qvh/functionals.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace qvh {

using Box = std::vector<std::pair<double, double>>;

// Candidate hedging function. Missing derivatives fall back to central differences with
// h_i = 1e-4 max(1, |x_i|).
template <typename Scalar = double>
struct BasicScalarField {
    using V = VectorX<Scalar>;
    using M = MatrixX<Scalar>;

    std::function<Scalar(const V&)> value;
    std::function<V(const V&)> gradient;
    std::function<M(const V&)> hessian;
    Box box;
    std::string name = "F";

    Scalar operator()(const V& x) const { return value(x); }

    bool contains(const V& x, double slack = 0.0) const {
        if (box.empty()) return true;
        for (std::size_t i = 0; i < box.size(); ++i)
            if (x[i] < box[i].first - slack || x[i] > box[i].second + slack) return false;
        return true;
    }

    static Scalar step(Scalar xi) { return Scalar(1e-4) * std::max(Scalar(1), std::abs(xi)); }

    V grad(const V& x) const {
        if (gradient) return gradient(x);
        return fd_gradient(x);
    }

    V fd_gradient(const V& x) const {
        V g(x.size()), y = x;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            Scalar h = step(x[i]);
            y[i] = x[i] + h;
            Scalar fp = value(y);
            y[i] = x[i] - h;
            Scalar fm = value(y);
            y[i] = x[i];
            g[i] = (fp - fm) / (2 * h);
        }
        return g;
    }

    M hess(const V& x) const {
        if (hessian) return hessian(x);
        return fd_hessian(x);
    }

    M fd_hessian(const V& x) const {
        const Eigen::Index n = x.size();
        M H(n, n);
        V y = x;
        if (gradient) {
            for (Eigen::Index i = 0; i < n; ++i) {
                Scalar h = step(x[i]);
                y[i] = x[i] + h;
                V gp = gradient(y);
                y[i] = x[i] - h;
                V gm = gradient(y);
                y[i] = x[i];
                H.col(i) = (gp - gm) / (2 * h);
            }
            return (H + H.transpose()) / Scalar(2);
        }
        Scalar f0 = value(x);
        for (Eigen::Index i = 0; i < n; ++i) {
            Scalar hi = step(x[i]);
            y[i] = x[i] + hi;
            Scalar fp = value(y);
            y[i] = x[i] - hi;
            Scalar fm = value(y);
            y[i] = x[i];
            H(i, i) = (fp - 2 * f0 + fm) / (hi * hi);
            for (Eigen::Index j = 0; j < i; ++j) {
                Scalar hj = step(x[j]);
                auto at = [&](Scalar si, Scalar sj) {
                    y[i] = x[i] + si * hi;
                    y[j] = x[j] + sj * hj;
                    Scalar v = value(y);
                    y[i] = x[i];
                    y[j] = x[j];
                    return v;
                };
                H(i, j) = H(j, i) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * hi * hj);
            }
        }
        return H;
    }
};
using ScalarField = BasicScalarField<double>;

// Linear combination a F + b G (derivatives combined when both sides supply them).
ScalarField combine(double a, const ScalarField& F, double b, const ScalarField& G);

template <typename Scalar = double>
struct OperatorValues {
    Scalar l_gamma = 0;
    MatrixX<Scalar> l_ab;
    VectorX<Scalar> l_alpha;
};

// L^gamma, L^{alpha,beta} and L^alpha of F at x.
OperatorValues<double> operators(const ScalarField& F, const FunctionalSpec& spec, const Vec& x);

struct ResidualReport {
    double max_gamma = 0;
    Mat max_ab;              // elementwise max |l_ab| over samples
    double max_abs = 0;      // over every equation
    Vec worst_point;
    std::size_t samples = 0;
    std::string worst_equation;
};

ResidualReport residual(const ScalarField& F, const FunctionalSpec& spec, const std::vector<Vec>& samples);
ResidualReport residual(const ScalarField& F, const FunctionalSpec& spec, const Box& box, std::size_t count = 256);

// Two-axis nodal field with bilinear (order 1) or local bicubic Lagrange (order 3) interpolation.
class GridField {
public:
    struct Eval {
        double value = 0;
        Eigen::Vector2d grad = Eigen::Vector2d::Zero();
        Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
    };

    GridField() = default;
    GridField(std::vector<double> x, std::vector<double> y, Mat values, int order = 3);

    Eval eval(double x, double y) const;
    double operator()(double x, double y) const { return eval(x, y).value; }
    const std::vector<double>& x_axis() const { return x_; }
    const std::vector<double>& y_axis() const { return y_; }
    const Mat& values() const { return v_; }
    int order() const { return order_; }

    // As a field of the first two state coordinates.
    ScalarField as_field(std::string name = "grid") const;
    void write_csv(std::ostream& os) const;

private:
    std::vector<double> x_, y_;
    Mat v_;
    int order_ = 3;
};

struct GridSpec {
    std::size_t nx = 801;     // space nodes
    std::size_t nt = 400;     // clock steps
    double width = 8.0;       // timer domain [s0/width, s0 width]
    bool rannacher = true;
};

namespace problem {
struct Timer {
    Fn1 f;
    Fn1 w = Fn1::power(-2.0);
    double q = 0.04;
    double s0 = 1.0;
};
struct Corridor {
    Fn1 f;
    Fn1 w = Fn1::power(-2.0);
    double l = 0.5, u = 2.0;
    double q_max = 0.2;  // clock axis of the returned field
    std::size_t nq = 101;
    double r_max = 0.0;  // 0: march until survival is negligible
};
struct BarrierTimer {
    Fn1 f;
    Fn1 w = Fn1::power(-2.0);
    double q = 0.04;
    double l = 0.5, u = 2.0;
};
}  // namespace problem

using BoundaryProblem = std::variant<problem::Timer, problem::Corridor, problem::BarrierTimer>;

// Fields over (x1, x2) = (price, clock).
GridField solve_parabolic(const BoundaryProblem& p, const GridSpec& g = {});

// F(x1, x2, x3) = E f(x1 + W_{q-x3}, x2 v (x1 + M_{q-x3})) on {x1 <= x2, x3 <= q}.
class LookbackField {
public:
    using Payoff = std::function<double(double, double)>;
    LookbackField(Payoff f, double q, Payoff f_m = {}, int nodes = 80, double radius = 10.0);

    double value(const Vec& x) const;
    double dm(const Vec& x) const;  // derivative in the running-max coordinate
    double q() const { return q_; }
    ScalarField as_field() const;

private:
    template <class G> double integrate(const Vec& x, bool below_only, G&& g) const;
    Payoff f_, fm_;
    double q_, R_;
    Quadrature gl_;
};

LookbackField lookback_field(LookbackField::Payoff f, double q);

}  // namespace qvh
