#include "bd/hardy.hpp"

#include <algorithm>
#include <cmath>

#include "bd/errors.hpp"

namespace bd {

HardyBracket hardy_bracket(const std::vector<double>& mu, const std::vector<double>& nu,
                           std::size_t kmax, double mu_tail) {
    if (mu.empty() || mu.size() != nu.size())
        throw domain_error("hardy_bracket: mu and nu must be nonempty and equally sized");
    if (kmax < 1) throw domain_error("hardy_bracket: kmax must be >= 1");
    for (std::size_t i = 0; i < mu.size(); ++i)
        if (!(mu[i] > 0.0) || !(nu[i] > 0.0))
            throw domain_error("hardy_bracket: weights must be positive");
    kmax = std::min(kmax, mu.size());

    // suffix sums of mu (exact over the stored entries, certified tail folded in)
    std::vector<double> suffix(mu.size() + 1, mu_tail);
    for (std::size_t i = mu.size(); i >= 1; --i) {
        suffix[i - 1] = suffix[i] + mu[i - 1];
        if (i == 1) break;
    }

    HardyBracket out;
    double prefix_inv = 0.0;
    for (std::size_t k = 1; k <= kmax; ++k) {
        prefix_inv += 1.0 / nu[k - 1];
        const double prod = suffix[k - 1] * prefix_inv;
        if (prod > out.b) {
            out.b = prod;
            out.witness_k = k;
        }
    }

    // witness ratio at the argmax: f_i = 1/nu_i for i <= k, zero beyond
    const std::size_t k = out.witness_k;
    double denom = 0.0;
    for (std::size_t i = 1; i <= k; ++i) denom += 1.0 / nu[i - 1];
    double numer = 0.0;
    double partial = 0.0;
    for (std::size_t i = 1; i <= mu.size(); ++i) {
        if (i <= k) partial += 1.0 / nu[i - 1];
        numer += mu[i - 1] * partial * partial;
    }
    numer += mu_tail * partial * partial; // tail of mu sees the full prefix
    out.witness_ratio = numer / denom;
    return out;
}

} // namespace bd
