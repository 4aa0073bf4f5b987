#pragma once

#include "qvh/core.hpp"

#include <functional>
#include <string>

namespace qvh {

// One-dimensional function with first and second derivatives; the closed-form kinds are
// recognised by the Black-Scholes pricer and by the double-primitive routine.
class Fn1 {
public:
    enum class Kind { Constant, Linear, Identity, Square, Power, NegLog, Call, Put, Custom };

    static Fn1 constant(double c);
    static Fn1 linear(double a, double b);  // a*x + b
    static Fn1 identity();
    static Fn1 square();
    static Fn1 power(double p);
    static Fn1 neglog();  // -2 log x
    static Fn1 call(double k);
    static Fn1 put(double k);
    static Fn1 custom(std::function<double(double)> f, std::function<double(double)> df = {},
                      std::function<double(double)> d2f = {}, std::string name = "custom");

    Fn1() : Fn1(constant(0.0)) {}

    double operator()(double x) const;
    double d1(double x) const;
    double d2(double x) const;

    Kind kind() const { return kind_; }
    double a() const { return a_; }
    double b() const { return b_; }
    std::string describe() const;

private:
    Fn1(Kind k, double a, double b) : kind_(k), a_(a), b_(b) {}
    Kind kind_;
    double a_ = 0, b_ = 0;
    std::function<double(double)> f_, df_, d2f_;
    std::string name_;
};

// Weight function of the state: w(x) = fn(x[of]).
struct Weight {
    Fn1 fn = Fn1::constant(1.0);
    int of = 0;
    double operator()(const Vec& x) const { return fn(x[of]); }
    static Weight one() { return {}; }
    static Weight inv_sq(int of) { return {Fn1::power(-2.0), of}; }
    static Weight inv(int of) { return {Fn1::power(-1.0), of}; }
};

}  // namespace qvh
