#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bd/errors.hpp"
#include "bd/summation.hpp"

namespace bd {

enum class CoefficientKind { power_law, surface_tension, table };

/// Coagulation/fragmentation rate family.  Attachment rates a_i are strictly
/// positive for i >= 1, detachment rates b_i for i >= 2; b_1 is zero by
/// convention since a single particle cannot split.
///
/// power_law:       a_i = i^alpha,  b_i = a_i (zs + q i^(mu-1))
/// surface_tension: a_i = i^alpha,  b_i = zs (i-1)^alpha
///                      * exp(sigma ((i-1)^mu - (i-2)^mu)), so the detailed
///                  balance weights come out as Q_i = zs^(1-i)
///                      * exp(-sigma (i-1)^mu) exactly
/// table:           explicit positive sequences; indices beyond the table use
///                  constant continuation of the last entry.  table_b[0] is
///                  b_2 (the b_1 slot does not exist).
struct CoefficientModel {
    CoefficientKind kind = CoefficientKind::table;
    double alpha = 0.0;
    double mu = 0.0;
    double zs = 0.0;    // saturation monomer density parameter (families)
    double q = 0.0;     // power_law only
    double sigma = 0.0; // surface_tension only
    std::vector<double> table_a;
    std::vector<double> table_b;

    double attach(std::size_t i) const;
    double detach(std::size_t i) const;     // 0 at i = 1
    double raw_detach(std::size_t i) const; // family/table value without the i = 1 zeroing
    std::pair<double, double> rates(std::size_t i) const { return {attach(i), detach(i)}; }

    double log_attach(std::size_t i) const;
    double log_detach(std::size_t i) const; // requires i >= 2

    /// z a_i / b_{i+1}: the ratio of consecutive equilibrium weights Q_i z^i.
    double qratio(std::size_t i, double z) const;
    /// Certified upper bound on qratio(j, z) over all j >= i, or +inf when no
    /// bound below one exists (z at or above the saturation density).
    double qratio_tail_cap(std::size_t i, double z) const;

    bool is_family() const { return kind != CoefficientKind::table; }

    void validate() const; // throws domain_error on bad parameters
};

CoefficientModel model_from_json(const nlohmann::json& j); // unknown fields rejected
nlohmann::json model_to_json(const CoefficientModel& m);

/// Detailed-balance weights in log form: log_q[i-1] = log Q_i with Q_1 = 1 and
/// Q_{i+1} = (a_i / b_{i+1}) Q_i.  Kept in the log domain; these under- or
/// overflow as plain doubles at modest i for all the model families.
struct LogDetailedBalance {
    std::vector<double> log_q;
    std::size_t n = 0;
};

LogDetailedBalance log_detailed_balance(const CoefficientModel& m, std::size_t n);

/// Streams log(Q_i z^i) without storing the sequence; advance() moves i -> i+1.
struct WeightWalker {
    WeightWalker(const CoefficientModel& model, double z);
    std::size_t index() const { return i_; }
    double log_weight() const { return logw_; }
    void advance();

private:
    const CoefficientModel* m_;
    double log_z_;
    std::size_t i_;
    double logw_;
};

struct ZsEstimate {
    double value = 0.0;
    double spread = 0.0;    // max - min of the probed ratio window
    std::size_t window = 0; // number of probed ratios
    bool exact = false;     // true for the parametric families
};

/// Saturation monomer density.  Exact for the parametric families; for tables
/// it is the (constant-continuation) limit of b_{i+1}/a_i, probed over a
/// trailing window.  Throws domain_error when the window oscillates too much
/// to trust the estimate; the message carries the observed range.
ZsEstimate critical_monomer_density(const CoefficientModel& m);

struct CriticalMass {
    double value = 0.0; // +inf when divergent
    bool finite = false;
    double tail_bound = 0.0;
    std::size_t terms = 0;
    SumStatus status = SumStatus::indeterminate;
};

/// Saturation mass sum_i i Q_i zs^i with a certified tail.  Families decay in
/// a stretched-exponential way at z = zs, so the tail certificate switches
/// from the geometric bound to the doubling-block bound there.  Divergence is
/// declared past a fixed partial-sum threshold with non-decreasing summands;
/// anything else within budget is reported indeterminate, not guessed.
CriticalMass critical_mass(const CoefficientModel& m, double tol);

struct DeltaCondition {
    std::vector<double> scaled; // delta_k sqrt(a_k) over the window
    std::size_t k_begin = 0;
    double tail_infimum = 0.0; // infimum over the second half of the window
    bool verdict = false;
};

/// Diagnoses the detachment-dominance condition at saturation:
/// delta_k = b_k / (a_k zs) - 1, and the verdict asks whether the windowed
/// infimum of delta_k sqrt(a_k) (second half of the window) stays above a
/// small positive threshold.  Uses raw detachment values so k = 1 is
/// meaningful.
DeltaCondition delta_condition(const CoefficientModel& m, std::size_t k_lo, std::size_t k_hi);

/// Smooth continuation of log(Q_y z^y) and log a_y for the parametric
/// families, valid for real y >= y_min().  The power-law family needs an
/// Euler-Maclaurin bridge for the partial sums of log(1 + c j^(mu-1)); it is
/// anchored on the exactly-summed prefix so integer evaluations match the
/// recurrence to ~1e-12.  Used by the near-saturation supremum search, where
/// the relevant indices are far beyond anything a direct scan can reach.
class SmoothLogWeight {
public:
    SmoothLogWeight(const CoefficientModel& m, double z);

    double y_min() const { return y_min_; }
    double value(double y) const;  // log(Q_y z^y)
    double deriv(double y) const;  // d/dy
    double deriv2(double y) const;
    double deriv3(double y) const;
    double log_attach(double y) const { return alpha_ * std::log(y); }
    double alpha() const { return alpha_; }
    double mu() const { return mu_; }
    double w() const { return w_; } // log(zs / z), the asymptotic decay rate floor

private:
    double phi(double y, int deriv) const; // log(1 + c y^(mu-1)) and derivatives
    double em_sum_phi(double y) const;     // smooth continuation of the phi partial sums

    CoefficientKind kind_;
    double alpha_, mu_, zs_, w_, log_z_, c_ = 0.0, sigma_ = 0.0;
    double y_min_ = 1.0;
    double anchor_y_ = 0.0;   // power_law: integer anchor for the EM bridge
    double anchor_sum_ = 0.0; // exact phi partial sum at the anchor
    // precomputed series data for the integral of log1p(c t^(mu-1)) and the
    // anchor-side endpoint corrections
    struct SeriesTerm {
        double coef;    // (-1)^(m+1) c^m / m
        double expo;    // m (mu - 1) + 1
        double at_a;    // a^expo / expo (or log a when expo ~ 0)
        bool log_form;
    };
    std::vector<SeriesTerm> series_;
    double phi_a0_ = 0.0, phi_a1_ = 0.0, phi_a3_ = 0.0;
};

} // namespace bd
