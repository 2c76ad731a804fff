#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>

namespace bd {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)) without leaving the log domain.
inline double log_add_exp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

enum class SumStatus {
    converged,     // tail bound below the requested tolerance
    diverged,      // certified divergence (threshold + non-decreasing terms)
    indeterminate, // budget exhausted, neither convergence nor divergence certified
};

struct SumResult {
    double value = 0.0;      // partial sum over the evaluated terms
    double tail_bound = 0.0; // certified upper bound on everything not summed
    std::size_t terms = 0;
    SumStatus status = SumStatus::indeterminate;
};

struct SumOptions {
    double tol = 1e-12;               // absolute tail target
    std::size_t max_terms = 50'000'000;
    double divergence_threshold = 1e12;
    std::size_t divergence_window = 100; // non-decreasing terms required on top of the threshold
};

/// Sums a positive series term(1) + term(2) + ... with a certified geometric
/// tail bound.  ratio_cap(i) must return an upper bound for term(j+1)/term(j)
/// valid for every j >= i; return a value >= 1 (or NaN) when no usable bound
/// exists at that index.  Summation stops as soon as
/// term(i) * cap/(1-cap) <= tol.
SumResult sum_positive_series(const std::function<double(std::size_t)>& term,
                              const std::function<double(std::size_t)>& ratio_cap,
                              const SumOptions& opts);

/// Certified upper bound for sum_{j>K} j^p w_j when the weights satisfy
/// w_{j+1}/w_j <= exp(-c (j+1)^(mu-1)) for all j > K (stretched-exponential
/// decay; the geometric route fails because the ratio tends to 1).
/// log_w_K1 is log w_{K+1}.  Uses doubling blocks: block m starts at
/// s_m = (K+1) 2^m, the weight there is bounded through the integral lower
/// bound of the increment sum, and each block is bounded by the smaller of
/// its length and a within-block geometric sum.
double stretched_tail_bound(double log_w_K1, std::size_t K, int p, double c, double mu);

} // namespace bd
