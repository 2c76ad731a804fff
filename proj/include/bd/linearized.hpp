#pragma once

#include <cstddef>
#include <vector>

#include "bd/equilibrium.hpp"
#include "bd/model.hpp"

namespace bd {

/// Truncated linearization around an equilibrium profile.  The operator is
/// arrowhead-plus-tridiagonal: a diagonal -sigma_i, a full first row/column,
/// and one off-diagonal band; weighted by Q_i z^i it is symmetric.
///
/// sigma[0] contains the full certified series sum over a_i Q_i z^i, not just
/// the part below the truncation size; truncating it silently would corrupt
/// the first row.
struct LinearizedMatrix {
    std::size_t n = 0;
    std::vector<double> log_weight; // log(Q_i z^i), i = 1..n
    std::vector<double> sigma;      // sigma_i, i = 1..n
    std::vector<double> xi_first_row; // xi_{1,j}, j = 2..n
    std::vector<double> xi_first_col; // xi_{i,1}, i = 2..n
    std::vector<double> xi_sub;       // xi_{i,i-1}, i = 3..n
    std::vector<double> xi_super;     // xi_{i-1,i}, i = 3..n

    double weight(std::size_t i) const { return std::exp(log_weight[i - 1]); }

    /// Matrix-vector product through the stored entries.
    std::vector<double> apply_table(const std::vector<double>& h) const;

    /// Strong-form application: assemble the linearized net reaction rates
    /// and difference them, with the outgoing rate at the truncation edge set
    /// to zero (mass-conserving closure).  Independent of the entry table, so
    /// the two routes cross-validate each other.
    std::vector<double> apply_strong(const std::vector<double>& h) const;

    /// Weighted inner product sum_i Q_i z^i u_i v_i.
    double weighted_dot(const std::vector<double>& u, const std::vector<double>& v) const;

private:
    friend LinearizedMatrix build_linearized(const EquilibriumProfile&, const CoefficientModel&,
                                             std::size_t);
    std::vector<double> a_rate;    // a_i, i = 1..n (cached for the strong form)
    std::vector<double> weight_v;  // Q_i z^i

public:
    const std::vector<double>& attach_rates() const { return a_rate; }
    const std::vector<double>& weights() const { return weight_v; }
};

LinearizedMatrix build_linearized(const EquilibriumProfile& profile, const CoefficientModel& model,
                                  std::size_t n);

/// Quadratic form sum_i a_i Q_i z^i (Q_1 z) (h_{i+1} - h_i - h_1)^2 with h
/// extended by zero beyond its support.  Equals -<Lh, h> in the weighted
/// inner product.
double dirichlet_form(const EquilibriumProfile& profile, const CoefficientModel& model,
                      const std::vector<double>& h);

} // namespace bd
