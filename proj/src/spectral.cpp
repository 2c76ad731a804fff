#include "bd/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bd/symeig.hpp"

namespace bd {

GapBounds gap_bounds(double b, double m2, double m3) {
    GapBounds g;
    if (!std::isfinite(b)) {
        g.lambda_lo = 0.0;
        g.lambda_hi = 0.0; // no gap
        return g;
    }
    if (!(b > 0.0)) throw domain_error("gap_bounds: b must be positive");
    g.lambda_lo = 1.0 / (4.0 * b);
    if (std::isfinite(m3) && m2 > 0.0 && b > m3 / m2)
        g.lambda_hi = 1.0 / (b - m3 / m2);
    else
        g.lambda_hi = kInf;
    return g;
}

double lambda_m_estimate(const EquilibriumProfile& profile, const CoefficientModel& model,
                         double delta) {
    if (delta < 0.0) throw domain_error("lambda_m_estimate: delta must be >= 0");
    if (!(profile.z < profile.zs))
        throw domain_error("lambda_m_estimate: requires z strictly below saturation");
    const double w1 = std::exp(profile.log_weight[0]);

    // diagonal-rate infimum: scan, then lean on the eventual monotone growth
    // of both rates (families) or the constant continuation (tables)
    double sigma_floor = 3.0 * model.attach(1) * w1; // part of sigma_1; the series only adds
    {
        // sigma_1 dominates in practice; still include it properly via a
        // partial series lower bound
        double series_lo = 0.0;
        WeightWalker walk(model, profile.z);
        for (std::size_t i = 1; i <= 4096; ++i) {
            series_lo += std::exp(walk.log_weight() + model.log_attach(i));
            walk.advance();
        }
        sigma_floor += series_lo;
    }
    std::size_t scan_end = std::max<std::size_t>(profile.n, 1024);
    if (!model.is_family())
        scan_end = std::max(scan_end, std::max(model.table_a.size(), model.table_b.size() + 1) + 2);
    for (std::size_t i = 2; i <= scan_end; ++i)
        sigma_floor = std::min(sigma_floor, model.attach(i) * w1 + model.detach(i));

    const double ell = profile.zs / profile.z;
    return sigma_floor * (1.0 - 2.0 * std::sqrt(ell) / (1.0 + ell)) - delta;
}

namespace {

struct SymmetrizedGap {
    std::vector<double> diag;      // sigma_i
    std::vector<double> first_row; // entries (1, j), j = 2..n (of the negated operator, sign folded)
    std::vector<double> band;      // entries (i-1, i), i = 3..n
    std::vector<double> d_unit;    // normalized constraint direction i sqrt(weight_i)
    double shift = 0.0;
};

SymmetrizedGap symmetrize(const LinearizedMatrix& L) {
    const std::size_t n = L.n;
    const auto& lw = L.log_weight;
    SymmetrizedGap s;
    s.diag = L.sigma;
    s.first_row.resize(n - 1);
    for (std::size_t j = 2; j <= n; ++j) {
        // the column entry stays in range for any truncation; the row entry
        // carries the weight ratio and underflows once the weights are dead,
        // in which case only the column route is usable
        const double via_col = L.xi_first_col[j - 2] * std::exp(0.5 * (lw[j - 1] - lw[0]));
        if (std::abs(L.xi_first_row[j - 2]) > 1e-280) {
            const double via_row = L.xi_first_row[j - 2] * std::exp(0.5 * (lw[0] - lw[j - 1]));
            const double scale = std::max({std::abs(via_row), std::abs(via_col), 1e-300});
            if (std::abs(via_row - via_col) > 1e-10 * scale)
                throw solver_error("numerical_gap: symmetrized first row/column disagree");
            s.first_row[j - 2] = 0.5 * (via_row + via_col);
        } else {
            s.first_row[j - 2] = via_col;
        }
    }
    s.band.resize(n >= 3 ? n - 2 : 0);
    for (std::size_t i = 3; i <= n; ++i) {
        const double via_sub = L.xi_sub[i - 3] * std::exp(0.5 * (lw[i - 1] - lw[i - 2]));
        const double via_super = L.xi_super[i - 3] * std::exp(0.5 * (lw[i - 2] - lw[i - 1]));
        const double scale = std::max({std::abs(via_sub), std::abs(via_super), 1e-300});
        if (std::abs(via_sub - via_super) > 1e-10 * scale)
            throw solver_error("numerical_gap: symmetrized band disagrees");
        s.band[i - 3] = 0.5 * (via_sub + via_super);
    }
    s.d_unit.resize(n);
    double norm2 = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        s.d_unit[i - 1] = static_cast<double>(i) * std::exp(0.5 * lw[i - 1]);
        norm2 += s.d_unit[i - 1] * s.d_unit[i - 1];
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& v : s.d_unit) v *= inv;
    s.shift = 2.0 * *std::max_element(s.diag.begin(), s.diag.end());
    return s;
}

// negated symmetrized operator times x
void apply_gap(const SymmetrizedGap& s, const std::vector<double>& x, std::vector<double>& y) {
    const std::size_t n = s.diag.size();
    y.assign(n, 0.0);
    y[0] = s.diag[0] * x[0];
    for (std::size_t j = 2; j <= n; ++j) {
        y[0] -= s.first_row[j - 2] * x[j - 1];
        y[j - 1] = s.diag[j - 1] * x[j - 1] - s.first_row[j - 2] * x[0];
    }
    for (std::size_t i = 3; i <= n; ++i) {
        y[i - 2] -= s.band[i - 3] * x[i - 1];
        y[i - 1] -= s.band[i - 3] * x[i - 2];
    }
}

} // namespace

double numerical_gap(const LinearizedMatrix& L, double tol, std::vector<double>* eigvec) {
    if (!(tol > 0.0)) throw domain_error("numerical_gap: tol must be positive");
    const std::size_t n = L.n;
    {
        const double lw_max = *std::max_element(L.log_weight.begin(), L.log_weight.end());
        if (L.log_weight[n - 1] - lw_max > std::log(1e-10))
            throw domain_error(
                "numerical_gap: weight decay at the truncation edge is insufficient");
    }
    SymmetrizedGap s = symmetrize(L);

    if (n > 2000) {
        auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
            apply_gap(s, x, y);
        };
        return smallest_eigen_deflated(apply, s.d_unit, n, s.shift, tol, eigvec);
    }

    // dense: deflate the constraint direction and shift it out of the way
    SymMatrix a;
    a.n = n;
    a.a.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) a.at(i, i) = s.diag[i];
    for (std::size_t j = 2; j <= n; ++j) {
        a.at(0, j - 1) = -s.first_row[j - 2];
        a.at(j - 1, 0) = -s.first_row[j - 2];
    }
    for (std::size_t i = 3; i <= n; ++i) {
        a.at(i - 3 + 1, i - 1) = -s.band[i - 3];
        a.at(i - 1, i - 3 + 1) = -s.band[i - 3];
    }
    const auto& d = s.d_unit;
    std::vector<double> ad(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += a.at(i, j) * d[j];
        ad[i] = acc;
    }
    double dad = 0.0;
    for (std::size_t i = 0; i < n; ++i) dad += d[i] * ad[i];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            a.at(i, j) += -d[i] * ad[j] - ad[i] * d[j] + (dad + s.shift) * d[i] * d[j];

    if (eigvec) {
        SymMatrix vecs;
        std::vector<double> evs = sym_eigenvalues(a, &vecs);
        eigvec->resize(n);
        for (std::size_t i = 0; i < n; ++i) (*eigvec)[i] = vecs.at(i, 0);
        return evs.front();
    }
    std::vector<double> evs = sym_eigenvalues(a);
    return evs.front();
}

SpectralReport spectral_report(const CoefficientModel& model, const EquilibriumProfile& profile,
                               std::size_t n_matrix, double tol) {
    SpectralReport r;
    r.z = profile.z;
    r.zs = profile.zs;
    r.n = n_matrix;
    r.mass = profile.mass;
    r.m2 = profile.m2;
    r.m3 = profile.m3;

    r.b = quantity_B(model, profile.z, tol);
    const GapBounds g = gap_bounds(r.b.finite ? r.b.value : kInf, profile.m2, profile.m3);
    r.lambda_lo = g.lambda_lo;
    r.lambda_hi = g.lambda_hi;

    LinearizedMatrix L = build_linearized(profile, model, n_matrix);
    r.lambda_numeric = numerical_gap(L, std::min(tol, 1e-10));
    r.lambda_m = profile.z < profile.zs ? lambda_m_estimate(profile, model, 0.0) : 0.0;

    // Appendix-style bracket on the explicit weight pair (shifted weights,
    // attachment-weighted reciprocals); cross-checks the sup search above
    if (r.b.finite) {
        std::vector<double> mu, nu;
        WeightWalker walk(model, profile.z);
        double logw_i = walk.log_weight();
        double mu_tail = -1.0;
        double mu_sum = 0.0;
        for (std::size_t i = 1; i <= 2'000'000; ++i) {
            walk.advance();
            const double logw_next = walk.log_weight(); // weight at i+1
            mu.push_back(std::exp(logw_next));
            mu_sum += mu.back();
            nu.push_back(std::exp(logw_i + model.log_attach(i)));
            const double cap = model.qratio_tail_cap(i + 2, profile.z);
            if (std::isfinite(cap) && cap < 1.0) {
                const double bound = mu.back() * cap / (1.0 - cap);
                if (bound <= 1e-13 * mu_sum && i >= n_matrix) {
                    mu_tail = bound;
                    break;
                }
            }
            logw_i = logw_next;
        }
        if (mu_tail < 0.0)
            throw budget_error("spectral_report: weight-pair tail not certifiable");
        const HardyBracket hb = hardy_bracket(mu, nu, mu.size(), mu_tail);
        r.hardy_b = hb.b;
        r.hardy_witness_k = hb.witness_k;
        r.hardy_witness_ratio = hb.witness_ratio;
        r.lambda1_lo = 1.0 / (4.0 * r.b.value);
        r.lambda1_hi = 1.0 / r.b.value;
    } else {
        r.hardy_b = kInf;
        r.lambda1_lo = 0.0;
        r.lambda1_hi = 0.0;
    }
    return r;
}

namespace {
nlohmann::json num_or_inf(double v) {
    if (std::isfinite(v)) return v;
    return "inf";
}
} // namespace

nlohmann::json spectral_report_to_json(const SpectralReport& r) {
    nlohmann::json j;
    j["z"] = r.z;
    j["zs"] = r.zs;
    j["n"] = r.n;
    j["mass"] = r.mass;
    j["m2"] = r.m2;
    j["m3"] = num_or_inf(r.m3);
    j["B"] = num_or_inf(r.b.value);
    j["B_lo"] = num_or_inf(r.b.lo);
    j["B_hi"] = num_or_inf(r.b.hi);
    j["B_sup_k"] = num_or_inf(r.b.sup_k);
    j["lambda_lo"] = r.lambda_lo;
    j["lambda_hi"] = num_or_inf(r.lambda_hi);
    j["lambda_numeric"] = r.lambda_numeric;
    j["lambda_m"] = r.lambda_m;
    j["hardy_b"] = num_or_inf(r.hardy_b);
    j["hardy_witness_k"] = r.hardy_witness_k;
    j["hardy_witness_ratio"] = r.hardy_witness_ratio;
    j["lambda1_lo"] = r.lambda1_lo;
    j["lambda1_hi"] = r.lambda1_hi;
    return j;
}

} // namespace bd
