#include "qvh/core.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace qvh {

namespace {
std::atomic<int> g_threads{0};
}

void set_threads(int n) { g_threads = std::max(0, n); }

int threads() {
    int n = g_threads.load();
    if (n > 0) return n;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    std::size_t nt = std::min<std::size_t>(threads(), n);
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
            std::size_t lo = n * t / nt, hi = n * (t + 1) / nt;
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errs[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

static double radical_inverse(std::size_t i, unsigned base) {
    double f = 1.0, r = 0.0;
    while (i > 0) {
        f /= base;
        r += f * static_cast<double>(i % base);
        i /= base;
    }
    return r;
}

std::vector<Vec> halton(const std::vector<std::pair<double, double>>& box, std::size_t count, std::size_t skip) {
    static const unsigned primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    if (box.size() > std::size(primes)) throw ParameterError("halton: dimension too large");
    std::vector<Vec> pts;
    pts.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Vec x(box.size());
        for (std::size_t d = 0; d < box.size(); ++d) {
            double u = radical_inverse(i + 1 + skip, primes[d]);
            x[d] = box[d].first + u * (box[d].second - box[d].first);
        }
        pts.push_back(x);
    }
    return pts;
}

// Golub-Welsch on the Jacobi matrix
static Quadrature golub_welsch(const Vec& diag, const Vec& offdiag, double mu0) {
    int n = static_cast<int>(diag.size());
    Mat J = Mat::Zero(n, n);
    J.diagonal() = diag;
    for (int i = 0; i + 1 < n; ++i) J(i, i + 1) = J(i + 1, i) = offdiag[i];
    Eigen::SelfAdjointEigenSolver<Mat> es(J);
    Quadrature q;
    q.nodes = es.eigenvalues();
    q.weights = mu0 * es.eigenvectors().row(0).transpose().array().square();
    return q;
}

Quadrature gauss_legendre(int n, double a, double b) {
    Vec d = Vec::Zero(n), e(std::max(n - 1, 0));
    for (int k = 1; k < n; ++k) e[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
    Quadrature q = golub_welsch(d, e, 2.0);
    // polish nodes with Newton on P_n for full double accuracy
    for (int i = 0; i < n; ++i) {
        double x = q.nodes[i];
        double dp = 1.0;
        for (int it = 0; it < 3; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            x -= p1 / dp;
        }
        q.nodes[i] = x;
        q.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    q.nodes = (0.5 * (b - a)) * q.nodes.array() + 0.5 * (a + b);
    q.weights *= 0.5 * (b - a);
    return q;
}

Quadrature gauss_hermite_prob(int n) {
    Vec d = Vec::Zero(n), e(std::max(n - 1, 0));
    for (int k = 1; k < n; ++k) e[k - 1] = std::sqrt(static_cast<double>(k));
    return golub_welsch(d, e, 1.0);
}

Stats summarize(const std::vector<double>& xs) {
    Stats s;
    s.n = xs.size();
    if (s.n == 0) return s;
    double sum = 0, sq = 0;
    for (double x : xs) {
        sum += x;
        sq += x * x;
        s.max_abs = std::max(s.max_abs, std::abs(x));
    }
    s.mean = sum / s.n;
    s.rms = std::sqrt(sq / s.n);
    if (s.n > 1) {
        double var = 0;
        for (double x : xs) var += (x - s.mean) * (x - s.mean);
        var /= (s.n - 1);
        s.se = std::sqrt(var / s.n);
    }
    return s;
}

}  // namespace qvh
