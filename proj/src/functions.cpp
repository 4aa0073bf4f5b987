#include "qvh/functions.hpp"

#include <cmath>
#include <sstream>

namespace qvh {

Fn1 Fn1::constant(double c) { return Fn1(Kind::Constant, c, 0.0); }
Fn1 Fn1::linear(double a, double b) { return Fn1(Kind::Linear, a, b); }
Fn1 Fn1::identity() { return Fn1(Kind::Identity, 0, 0); }
Fn1 Fn1::square() { return Fn1(Kind::Square, 0, 0); }
Fn1 Fn1::power(double p) { return Fn1(Kind::Power, p, 0); }
Fn1 Fn1::neglog() { return Fn1(Kind::NegLog, 0, 0); }
Fn1 Fn1::call(double k) { return Fn1(Kind::Call, k, 0); }
Fn1 Fn1::put(double k) { return Fn1(Kind::Put, k, 0); }

Fn1 Fn1::custom(std::function<double(double)> f, std::function<double(double)> df,
                std::function<double(double)> d2f, std::string name) {
    Fn1 g(Kind::Custom, 0, 0);
    g.f_ = std::move(f);
    g.df_ = std::move(df);
    g.d2f_ = std::move(d2f);
    g.name_ = std::move(name);
    return g;
}

double Fn1::operator()(double x) const {
    switch (kind_) {
        case Kind::Constant: return a_;
        case Kind::Linear: return a_ * x + b_;
        case Kind::Identity: return x;
        case Kind::Square: return x * x;
        case Kind::Power: return std::pow(x, a_);
        case Kind::NegLog: return -2.0 * std::log(x);
        case Kind::Call: return x > a_ ? x - a_ : 0.0;
        case Kind::Put: return x < a_ ? a_ - x : 0.0;
        case Kind::Custom: return f_(x);
    }
    return 0.0;
}

double Fn1::d1(double x) const {
    switch (kind_) {
        case Kind::Constant: return 0.0;
        case Kind::Linear: return a_;
        case Kind::Identity: return 1.0;
        case Kind::Square: return 2.0 * x;
        case Kind::Power: return a_ * std::pow(x, a_ - 1.0);
        case Kind::NegLog: return -2.0 / x;
        case Kind::Call: return x > a_ ? 1.0 : 0.0;
        case Kind::Put: return x < a_ ? -1.0 : 0.0;
        case Kind::Custom: {
            if (df_) return df_(x);
            double h = 1e-5 * std::max(1.0, std::abs(x));
            return (f_(x + h) - f_(x - h)) / (2 * h);
        }
    }
    return 0.0;
}

double Fn1::d2(double x) const {
    switch (kind_) {
        case Kind::Constant:
        case Kind::Linear:
        case Kind::Identity: return 0.0;
        case Kind::Square: return 2.0;
        case Kind::Power: return a_ * (a_ - 1.0) * std::pow(x, a_ - 2.0);
        case Kind::NegLog: return 2.0 / (x * x);
        case Kind::Call:
        case Kind::Put: return 0.0;
        case Kind::Custom: {
            if (d2f_) return d2f_(x);
            double h = 1e-4 * std::max(1.0, std::abs(x));
            return (f_(x + h) - 2 * f_(x) + f_(x - h)) / (h * h);
        }
    }
    return 0.0;
}

std::string Fn1::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::Constant: os << "constant(" << a_ << ")"; break;
        case Kind::Linear: os << "linear(" << a_ << "," << b_ << ")"; break;
        case Kind::Identity: os << "identity"; break;
        case Kind::Square: os << "square"; break;
        case Kind::Power: os << "power(" << a_ << ")"; break;
        case Kind::NegLog: os << "neglog"; break;
        case Kind::Call: os << "call(" << a_ << ")"; break;
        case Kind::Put: os << "put(" << a_ << ")"; break;
        case Kind::Custom: os << name_; break;
    }
    return os.str();
}

}  // namespace qvh
