#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "bd/equilibrium.hpp"
#include "bd/hardy.hpp"
#include "bd/linearized.hpp"
#include "bd/model.hpp"

namespace bd {

/// Supremum over k of (tail weight mass beyond k) x (prefix sum of inverse
/// attachment-weighted rates).  Carries a certified bracket: value is the
/// best evaluated supremum, [lo, hi] accounts for evaluation error and the
/// capped remainder of the search range.
struct BQuantity {
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool finite = true;   // false: certified divergence (value, lo, hi = +inf)
    double sup_k = 0.0;   // location of the supremum (continuum-valued far out)
};

/// The sup search walks the truncation index directly over a log-domain
/// window and, for the parametric families, continues with Euler-Maclaurin
/// evaluations of both factors far beyond any scannable index; the search
/// stops once the certified cap on the remaining range drops below the
/// running supremum.  Near saturation the supremum sits around
/// w^(-1/(1-mu)), far outside the direct window.
BQuantity quantity_B(const CoefficientModel& m, double z, double tol);

struct GapBounds {
    double lambda_lo = 0.0;
    double lambda_hi = 0.0; // +inf when the upper route is unavailable
};

/// lambda_lo = 1/(4B); lambda_hi = 1/(B - m3/m2) when m3 is finite and the
/// denominator is positive, +inf otherwise.  B = +inf signals no gap and
/// returns (0, 0).
GapBounds gap_bounds(double b, double m2, double m3);

/// sigma_floor * (1 - 2 sqrt(l)/(1+l)) - delta with l = zs/z and sigma_floor
/// the infimum of the diagonal rates.  Requires z strictly below saturation.
double lambda_m_estimate(const EquilibriumProfile& profile, const CoefficientModel& model,
                         double delta);

/// Smallest eigenvalue of the negated linearized operator restricted to the
/// mass-orthogonal subspace.  The operator is symmetrized by the square-root
/// weight similarity; the known null direction (i sqrt(weight_i)) is deflated
/// and shifted out of the way.  Dense solve up to n = 2000, matrix-free
/// deflated inverse iteration above.  eigvec, when requested, is returned in
/// the symmetrized coordinates.
double numerical_gap(const LinearizedMatrix& L, double tol, std::vector<double>* eigvec = nullptr);

struct SpectralReport {
    double z = 0.0, zs = 0.0;
    std::size_t n = 0;
    double mass = 0.0, m2 = 0.0, m3 = 0.0;
    BQuantity b;
    double lambda_lo = 0.0, lambda_hi = 0.0;
    double lambda_numeric = 0.0;
    double lambda_m = 0.0;
    double hardy_b = 0.0;
    std::size_t hardy_witness_k = 0;
    double hardy_witness_ratio = 0.0;
    double lambda1_lo = 0.0, lambda1_hi = 0.0; // [1/(4B), 1/B]
};

SpectralReport spectral_report(const CoefficientModel& model, const EquilibriumProfile& profile,
                               std::size_t n_matrix, double tol);

nlohmann::json spectral_report_to_json(const SpectralReport& r);

struct SweepRow {
    double w = 0.0;
    double z = 0.0;
    double b = 0.0;
    bool b_finite = true;
    bool ok = true;
    std::string error;
    double lambda_lo = 0.0;
    double lambda_hi = 0.0;
    double lambda_numeric = 0.0; // populated only when requested
};

struct SweepOptions {
    bool with_bounds = true;
    bool with_numeric = false;
    std::size_t n_numeric = 400;
    double tol = 1e-9;
    unsigned threads = 1;
};

struct SweepResult {
    std::vector<SweepRow> rows; // in input grid order
    double fitted_exponent = 0.0;
    double fit_intercept = 0.0;
    double fit_r2 = 0.0;
    std::size_t fit_points = 0;
    // measured ratio of the tail weight mass to weight_k / (w + k^(mu-1)),
    // extremes over all grid points and probe indices (family kinds only)
    double ratio_diag_min = 0.0;
    double ratio_diag_max = 0.0;
};

/// Evaluates B on z = zs exp(-w) over the given grid, fits log B against
/// log w by least squares, and emits the tail-sum bracket-ratio diagnostics.
/// Grid points are independent; rows keep the input order regardless of the
/// thread count.
SweepResult critical_sweep(const CoefficientModel& model, const std::vector<double>& w_grid,
                           const SweepOptions& opts);

} // namespace bd
