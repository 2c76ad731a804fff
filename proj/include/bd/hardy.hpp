#pragma once

#include <cstddef>
#include <vector>

#include "bd/errors.hpp"

namespace bd {

/// Weighted discrete Hardy bracket.  For positive weight sequences (mu_i),
/// (nu_i) the optimal constant A in
///     sum_i mu_i (sum_{j<=i} f_j)^2  <=  A sum_i nu_i f_i^2
/// is bracketed by B <= A <= 4B with
///     B = max_k (sum_{j>=k} mu_j)(sum_{i<=k} 1/nu_i).
/// The witness is the truncated reciprocal sequence f_i = 1/nu_i for i <= k
/// at the maximizing k; its Rayleigh-type ratio realizes the lower half of
/// the bracket.
struct HardyBracket {
    double b = 0.0;          // the Muckenhoupt-type supremum over k <= kmax
    std::size_t witness_k = 0;
    double witness_ratio = 0.0; // >= b by construction
};

/// mu and nu must be positive and equally sized; k ranges over 1..kmax.
/// mu_tail is an optional certified bound on the mass of mu beyond the stored
/// entries (folded into every suffix sum).
HardyBracket hardy_bracket(const std::vector<double>& mu, const std::vector<double>& nu,
                           std::size_t kmax, double mu_tail = 0.0);

} // namespace bd
