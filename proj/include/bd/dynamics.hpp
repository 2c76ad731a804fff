#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bd/equilibrium.hpp"
#include "bd/linearized.hpp"
#include "bd/model.hpp"

namespace bd {

/// Truncated concentration state.  Entries are nonnegative; the mass cache is
/// refreshed whenever the state is rebuilt.
struct StateVector {
    std::vector<double> c;
    double mass = 0.0;

    std::size_t n() const { return c.size(); }
    void refresh_mass();
    static StateVector from(std::vector<double> values); // validates nonnegativity
};

/// Net reaction rate at index i (attachment minus detachment); the rate at
/// the truncation edge is zero so the finite system conserves mass exactly.
double flux(const CoefficientModel& m, const StateVector& s, std::size_t i);

/// Time derivative of the truncated system.
std::vector<double> bd_rhs(const CoefficientModel& m, const StateVector& s);

struct IntegrateOptions {
    double rtol = 1e-10;
    double atol = 1e-13;
    std::size_t max_steps = 50'000'000;
    double snapshot_every = 0.5;
};

/// Observable plan for snapshot rows; the profile supplies the reference
/// equilibrium, nu the exponential-moment rate, eta the weighted-l1 rate.
struct ObservablePlan {
    const EquilibriumProfile* profile = nullptr;
    double nu = 0.0;
    double eta = 0.0;
};

struct ObservableRow {
    double t = 0.0;
    double mass = 0.0;
    double h = 0.0;
    double fz = 0.0;
    double d = 0.0;
    double exp_moment = 0.0;
    double l1_dist = 0.0;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    std::vector<ObservableRow> observables; // empty when no plan was given
    std::size_t clamped_negatives = 0;
    bool mass_drift_flagged = false;
    std::size_t steps_accepted = 0;
    std::size_t steps_rejected = 0;
};

/// Adaptive embedded 5(4) integration with step rejection.  Snapshots land on
/// multiples of snapshot_every plus t_end.  Components dipping into
/// (-atol, 0) are clamped to zero and counted; anything below -atol aborts.
/// Step-size underflow aborts with a stiffness diagnosis.
Trajectory integrate(const CoefficientModel& m, const StateVector& s0, double t_end,
                     const IntegrateOptions& opts, const ObservablePlan* plan = nullptr);

struct FreeEnergy {
    double h = 0.0;  // sum c_i (log(c_i / Q_i) - 1), zero entries contribute zero
    double fz = 0.0; // h - log(z) * mass + total equilibrium weight
};

FreeEnergy free_energy(const StateVector& s, const EquilibriumProfile& profile);

/// Entropy production rate: sum over reactions of (forward - backward) times
/// log(forward/backward); nonnegative term by term, +inf when exactly one
/// side of a reaction vanishes.
double dissipation(const StateVector& s, const CoefficientModel& m);

/// sum exp(nu i) c_i over the truncation; throws on overflow at the edge.
double exp_moment(const StateVector& s, double nu);

/// Weighted l1 distance to the equilibrium profile plus a certified bound on
/// the neglected equilibrium tail.  Requires 0 < eta < log(zs/z)/2.
double weighted_l1_distance(const CoefficientModel& m, const StateVector& s,
                            const EquilibriumProfile& profile, double eta);

struct Fluctuation {
    std::vector<double> h;
    std::size_t valid_n = 0; // entries past this were clipped (weight underflow)
    bool clipped = false;
};

/// h_i = c_i / (Q_i z^i) - 1.
Fluctuation fluctuation_split(const StateVector& s, const EquilibriumProfile& profile);

/// Quadratic remainder of the fluctuation dynamics, in strong form with the
/// same zero-rate closure at the truncation edge as the linear part, so that
/// rhs-in-fluctuation-variables = linear part + gamma_term exactly.
std::vector<double> gamma_term(const EquilibriumProfile& profile, const CoefficientModel& m,
                               const std::vector<double>& f, const std::vector<double>& g);

struct LinearTrajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    std::vector<double> h_norm; // sqrt(0.5 sum w_i h_i^2)
    std::vector<double> x_norm; // sum exp(eta i) w_i |h_i|
    bool projected_initial = false;
    std::size_t steps_accepted = 0;
};

/// Integrates dh/dt = L h with the strong-form closure.  The initial state is
/// projected onto the mass-orthogonal subspace when it is off by more than
/// 1e-10 (flagged).
LinearTrajectory integrate_linearized(const LinearizedMatrix& L, const std::vector<double>& h0,
                                      double t_end, const IntegrateOptions& opts, double eta);

struct DecayFit {
    double rate = 0.0; // negated slope of log(value) against t
    double intercept = 0.0;
    double r2 = 0.0;
    double window_lo = 0.0;
    double window_hi = 0.0;
    std::size_t points = 0;
};

/// Least-squares fit of log(value) over the trailing half [t_end/2, t_end],
/// excluding entries within 100x of the floating floor.  Needs at least 8
/// usable rows.
DecayFit fit_decay_rate(const std::vector<double>& times, const std::vector<double>& values);

/// Equilibrium perturbed by a seeded bounded pseudo-random relative
/// fluctuation of size epsilon, mass-corrected through the first component so
/// the mass matches the profile exactly.
StateVector perturbed_equilibrium(const EquilibriumProfile& profile, double epsilon,
                                  std::uint64_t seed);

} // namespace bd
