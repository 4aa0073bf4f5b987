#pragma once

#include "qvh/functions.hpp"

namespace qvh {

// Black-Scholes quantities in total variance v = sigma^2 tau, zero rates.
double bs_call(double s, double k, double v);
double bs_put(double s, double k, double v);
double bs_call_dk(double s, double k, double v);   // d/dk
double bs_call_dkk(double s, double k, double v);  // d^2/dk^2 (lognormal density at k)
double bs_call_dv(double s, double k, double v);   // d/dv

// E g(s exp(sqrt(v) Z - v/2)); closed forms for the recognised kinds, Gauss-Hermite otherwise.
double bs_convex(const Fn1& g, double s, double v);

// Smallest sigma in [lo, hi] with bs_convex(g, s, sigma^2 T) = price, by bisection; returns hi when
// the price is above the reachable range.
double bs_implied_sigma(const Fn1& g, double s, double T, double price, double lo = 1e-6, double hi = 10.0,
                        double tol = 1e-10);

}  // namespace qvh
