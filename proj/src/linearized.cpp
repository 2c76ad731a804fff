#include "bd/linearized.hpp"

#include <cmath>

namespace bd {

LinearizedMatrix build_linearized(const EquilibriumProfile& profile, const CoefficientModel& model,
                                  std::size_t n) {
    if (n < 3) throw domain_error("build_linearized: n must be >= 3");
    if (profile.n < n) throw domain_error("build_linearized: profile truncation too small");

    LinearizedMatrix L;
    L.n = n;
    L.log_weight.assign(profile.log_weight.begin(), profile.log_weight.begin() + n);
    L.weight_v.resize(n);
    L.a_rate.resize(n);
    for (std::size_t i = 1; i <= n; ++i) {
        L.weight_v[i - 1] = std::exp(L.log_weight[i - 1]);
        L.a_rate[i - 1] = model.attach(i);
    }
    const double w1 = L.weight_v[0];

    // certified series sum of a_i Q_i z^i for the first diagonal entry
    double rate_sum = 0.0;
    {
        WeightWalker walk(model, profile.z);
        bool ok = false;
        const bool at_sat = model.is_family() && !(profile.z < model.zs);
        for (std::size_t i = 1; i <= 8'000'000; ++i) {
            const double t = std::exp(walk.log_weight() + model.log_attach(i));
            rate_sum += t;
            const double cap = model.qratio_tail_cap(i + 1, profile.z) * (i + 2.0) / (i + 1.0);
            if (std::isfinite(cap) && cap < 1.0 && t * cap / (1.0 - cap) <= 1e-14 * (1.0 + rate_sum)) {
                ok = true;
                break;
            }
            if (at_sat && (i & 63) == 0) {
                // a_i grows like a power with exponent at most one
                double c = 0.0;
                if (model.kind == CoefficientKind::power_law) {
                    const double cc = model.q / model.zs;
                    const double x0 = cc * std::pow(i + 2.0, model.mu - 1.0);
                    c = cc * std::log1p(x0) / x0;
                } else {
                    c = model.sigma * model.mu;
                }
                const double bound = stretched_tail_bound(
                    walk.log_weight() + model.log_attach(i) - model.log_detach(i + 1) +
                        std::log(profile.z),
                    i, 1, c, model.mu);
                if (bound <= 1e-14 * (1.0 + rate_sum)) {
                    ok = true;
                    break;
                }
            }
            walk.advance();
        }
        if (!ok) throw budget_error("build_linearized: rate series not certifiable");
    }

    L.sigma.resize(n);
    L.sigma[0] = 3.0 * model.attach(1) * w1 + rate_sum;
    for (std::size_t i = 2; i <= n; ++i)
        L.sigma[i - 1] = model.attach(i) * w1 + model.detach(i);

    L.xi_first_row.resize(n - 1);
    L.xi_first_col.resize(n - 1);
    // the (1,2)/(2,1) pair carries a doubled detachment contribution
    {
        const double b2 = model.detach(2);
        const double a2 = model.attach(2);
        const double lw2 = L.log_weight[1];
        const double lw1 = L.log_weight[0];
        L.xi_first_row[0] = (2.0 * b2 - a2 * w1) * std::exp(lw2 - lw1);
        L.xi_first_col[0] = 2.0 * b2 - a2 * w1;
    }
    for (std::size_t i = 3; i <= n; ++i) {
        const double bi = model.detach(i);
        const double ai = model.attach(i);
        L.xi_first_col[i - 2] = bi - ai * w1;
        L.xi_first_row[i - 2] = (bi - ai * w1) * std::exp(L.log_weight[i - 1] - L.log_weight[0]);
    }

    L.xi_sub.resize(n - 2);
    L.xi_super.resize(n - 2);
    for (std::size_t i = 3; i <= n; ++i) {
        const double bi = model.detach(i);
        L.xi_sub[i - 3] = bi;
        L.xi_super[i - 3] = bi * std::exp(L.log_weight[i - 1] - L.log_weight[i - 2]);
    }
    return L;
}

std::vector<double> LinearizedMatrix::apply_table(const std::vector<double>& h) const {
    if (h.size() != n) throw domain_error("apply_table: length mismatch");
    std::vector<double> out(n, 0.0);
    // first row
    double acc = -sigma[0] * h[0];
    for (std::size_t j = 2; j <= n; ++j) acc += xi_first_row[j - 2] * h[j - 1];
    out[0] = acc;
    // second row: first-column entry, diagonal, super
    out[1] = xi_first_col[0] * h[0] - sigma[1] * h[1];
    if (n >= 3) out[1] += a_rate[1] * weight_v[0] * h[2];
    for (std::size_t i = 3; i <= n; ++i) {
        double v = xi_first_col[i - 2] * h[0] + xi_sub[i - 3] * h[i - 2] - sigma[i - 1] * h[i - 1];
        if (i < n) v += a_rate[i - 1] * weight_v[0] * h[i];
        out[i - 1] = v;
    }
    return out;
}

std::vector<double> LinearizedMatrix::apply_strong(const std::vector<double>& h) const {
    if (h.size() != n) throw domain_error("apply_strong: length mismatch");
    const double w1 = weight_v[0];
    std::vector<double> flux(n, 0.0); // linearized net rates; the edge rate is closed to zero
    for (std::size_t i = 1; i < n; ++i)
        flux[i - 1] = a_rate[i - 1] * weight_v[i - 1] * w1 * (h[i - 1] + h[0] - h[i]);

    std::vector<double> out(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += flux[i];
    out[0] = -(flux[0] + total) / w1;
    for (std::size_t i = 2; i <= n; ++i)
        out[i - 1] = (flux[i - 2] - flux[i - 1]) / weight_v[i - 1];
    return out;
}

double LinearizedMatrix::weighted_dot(const std::vector<double>& u,
                                      const std::vector<double>& v) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += weight_v[i] * u[i] * v[i];
    return acc;
}

double dirichlet_form(const EquilibriumProfile& profile, const CoefficientModel& model,
                      const std::vector<double>& h) {
    if (h.empty()) return 0.0;
    if (h.size() > profile.n) throw domain_error("dirichlet_form: h longer than the profile");
    const double w1 = std::exp(profile.log_weight[0]);
    double acc = 0.0;
    const std::size_t len = h.size();
    for (std::size_t i = 1; i <= len; ++i) {
        const double hi = h[i - 1];
        const double hnext = i < len ? h[i] : 0.0; // zero extension
        const double ai_wi = model.attach(i) * std::exp(profile.log_weight[i - 1]);
        const double d = hnext - hi - h[0];
        acc += ai_wi * w1 * d * d;
    }
    // zero-extension remainder: the (0 - 0 - h1)^2 terms past the support.
    // Cut at the profile truncation; the weight decay there puts the rest
    // below the resolution of the form.
    if (len < profile.n) {
        double rest = 0.0;
        for (std::size_t i = len + 1; i <= profile.n; ++i)
            rest += model.attach(i) * std::exp(profile.log_weight[i - 1]);
        acc += rest * w1 * h[0] * h[0];
    }
    return acc;
}

} // namespace bd
