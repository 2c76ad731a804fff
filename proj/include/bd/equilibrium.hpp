#pragma once

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "bd/model.hpp"

namespace bd {

/// Truncated equilibrium profile at monomer density z: weights Q_i z^i kept
/// in the log domain, plus the scalar moments the spectral bounds need.
/// Moments are summed past the truncation size until the certified tail is
/// below the construction tolerance; m3 is +inf as a value, not an error,
/// when its certification fails (the upper gap bound is then unavailable).
struct EquilibriumProfile {
    double z = 0.0;
    double zs = 0.0;
    std::size_t n = 0;
    std::vector<double> log_weight; // log(Q_i z^i), i = 1..n
    double mass = 0.0;              // sum i Q_i z^i
    double m2 = 0.0;                // sum i^2 Q_i z^i
    double m3 = 0.0;                // sum (a_i Q_i z^i)^-1 (sum_{j>i} j Q_j z^j)^2, may be +inf
    double a_quantity = 0.0;        // sum i^2 (1 + a_i + b_i)^2 Q_i z^i (raw b at i = 1)
    double weight_total = 0.0;      // sum Q_i z^i
    double weight_tail_n = 0.0;     // certified bound on sum_{i>n} Q_i z^i

    double weight(std::size_t i) const { return std::exp(log_weight[i - 1]); }
};

/// Mass of the equilibrium with monomer density z: sum_i i Q_i z^i with
/// absolute tail error below tol.  Throws domain_error for z above the
/// saturation density and budget_error when the tail cannot be certified
/// within the summation budget.
double mass_of_z(const CoefficientModel& m, double z, double tol);

/// Inverse of mass_of_z by bisection on [0, zs(1 - 1e-12)]; relies on strict
/// monotonicity.  |mass_of_z(result) - rho| <= tol.  Throws
/// supercritical_error when rho exceeds a finite saturation mass.
double z_of_mass(const CoefficientModel& m, double rho, double tol);

EquilibriumProfile equilibrium_profile(const CoefficientModel& m, double z, std::size_t n,
                                       double tol);

nlohmann::json profile_to_json(const EquilibriumProfile& p);
EquilibriumProfile profile_from_json(const nlohmann::json& j);

} // namespace bd
