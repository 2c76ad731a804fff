#include "bd/summation.hpp"

#include <algorithm>
#include <deque>
#include <vector>

namespace bd {

SumResult sum_positive_series(const std::function<double(std::size_t)>& term,
                              const std::function<double(std::size_t)>& ratio_cap,
                              const SumOptions& opts) {
    SumResult out;
    double carry = 0.0; // Kahan compensation
    std::deque<double> window;

    for (std::size_t i = 1; i <= opts.max_terms; ++i) {
        const double t = term(i);
        const double y = t - carry;
        const double s = out.value + y;
        carry = (s - out.value) - y;
        out.value = s;
        out.terms = i;

        window.push_back(t);
        if (window.size() > opts.divergence_window) window.pop_front();

        const double cap = ratio_cap(i + 1);
        if (std::isfinite(cap) && cap < 1.0) {
            const double bound = t * cap / (1.0 - cap);
            if (bound <= opts.tol) {
                out.tail_bound = bound;
                out.status = SumStatus::converged;
                return out;
            }
        }

        if (out.value > opts.divergence_threshold && window.size() == opts.divergence_window) {
            bool nondecreasing = true;
            for (std::size_t k = 1; k < window.size(); ++k)
                if (window[k] < window[k - 1]) { nondecreasing = false; break; }
            if (nondecreasing) {
                out.tail_bound = kInf;
                out.status = SumStatus::diverged;
                return out;
            }
        }
    }
    out.tail_bound = kInf;
    out.status = SumStatus::indeterminate;
    return out;
}

double stretched_tail_bound(double log_w_K1, std::size_t K, int p, double c, double mu) {
    if (!(c > 0.0) || !(mu > 0.0) || !(mu < 1.0)) return kInf;
    const double s0 = static_cast<double>(K) + 1.0;
    double bound = 0.0;
    double prev_block = kInf;
    for (int m = 0; m < 200; ++m) {
        const double sm = s0 * std::pow(2.0, m);
        const double sm1 = 2.0 * sm;
        // increment sum from K+2 to s_m bounds the weight drop at the block start
        double drop = 0.0;
        if (sm > s0 + 1.0)
            drop = (c / mu) * (std::pow(sm, mu) - std::pow(s0 + 1.0, mu));
        const double log_w_start = log_w_K1 - drop;
        // within-block ratio cap (weight ratio times the polynomial growth of j^p)
        const double r = std::exp(-c * std::pow(sm1, mu - 1.0) + static_cast<double>(p) / sm);
        double count_bound = sm; // block has at most s_m terms
        double geo_bound = (r < 1.0) ? 1.0 / (1.0 - r) : kInf;
        const double log_block =
            log_w_start + p * std::log(sm1) + std::log(std::min(count_bound, geo_bound));
        const double block = std::exp(log_block);
        bound += block;
        if (block < 1e-6 * bound || (m > 4 && block < 1e-300)) return bound;
        if (block > prev_block * 4.0 && m > 60) return kInf; // not contracting
        prev_block = block;
    }
    return bound;
}

} // namespace bd
