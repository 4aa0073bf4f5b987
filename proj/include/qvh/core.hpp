#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace qvh {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

template <typename Scalar> using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar> using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParameterError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct SpecError : Error { using Error::Error; };
struct AlignmentError : Error { using Error::Error; };
struct InfeasibleMarket : Error { using Error::Error; };
struct CalibrationError : Error { using Error::Error; };
struct AdjudicationFailure : Error { using Error::Error; };

inline constexpr double kPi = 3.14159265358979323846;

inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// splitmix64 finaliser, used to derive independent per-path seeds
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t salt = 0) {
    return mix64(mix64(seed ^ mix64(salt)) + index);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(mix64(seed)) {}
    double normal() { return nd_(eng_); }
    double uniform() { return ud_(eng_); }

private:
    std::mt19937_64 eng_;
    std::normal_distribution<double> nd_{0.0, 1.0};
    std::uniform_real_distribution<double> ud_{0.0, 1.0};
};

void set_threads(int n);
int threads();

// Runs fn(i) for i in [0, n); static partition so results written by index are thread-count independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Radical-inverse Halton points mapped to a box.
std::vector<Vec> halton(const std::vector<std::pair<double, double>>& box, std::size_t count, std::size_t skip = 20);

struct Quadrature {
    Vec nodes;
    Vec weights;
};
Quadrature gauss_legendre(int n, double a = -1.0, double b = 1.0);
// Probabilists' Hermite rule: sum w_i f(z_i) ~ E f(Z), Z ~ N(0,1).
Quadrature gauss_hermite_prob(int n);

struct Stats {
    double mean = 0, se = 0, rms = 0, max_abs = 0;
    std::size_t n = 0;
};
Stats summarize(const std::vector<double>& xs);

}  // namespace qvh
