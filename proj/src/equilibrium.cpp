#include "bd/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace bd {

namespace {

// Grow-on-demand table of log(Q_i z^i).
class WeightTable {
public:
    WeightTable(const CoefficientModel& m, double z) : walk_(m, z) {
        logs_.push_back(walk_.log_weight());
    }
    double log_at(std::size_t i) {
        while (logs_.size() < i) {
            walk_.advance();
            logs_.push_back(walk_.log_weight());
        }
        return logs_[i - 1];
    }
    const std::vector<double>& logs() const { return logs_; }

private:
    WeightWalker walk_;
    std::vector<double> logs_;
};

constexpr std::size_t kSeriesBudget = 8'000'000;

double stretched_rate_for(const CoefficientModel& m, std::size_t K) {
    if (m.kind == CoefficientKind::power_law) {
        const double c = m.q / m.zs;
        const double x0 = c * std::pow(static_cast<double>(K) + 2.0, m.mu - 1.0);
        return c * std::log1p(x0) / x0;
    }
    return m.sigma * m.mu; // surface_tension
}

struct SeriesOut {
    double value = 0.0;
    double tail = 0.0;
    std::size_t terms = 0;
    SumStatus status = SumStatus::indeterminate;
};

// sum_i i^p Q_i z^i with a certified tail; geometric certificate when the
// weight-ratio cap is below one, stretched-decay certificate at z = zs for
// the families, divergence past the fixed threshold otherwise.
SeriesOut weight_series(const CoefficientModel& m, WeightTable& wt, double z, int p, double tol,
                        std::size_t max_terms = kSeriesBudget) {
    SeriesOut out;
    double carry = 0.0;
    std::deque<double> window;
    const bool at_saturation = m.is_family() && !(z < m.zs);
    for (std::size_t i = 1; i <= max_terms; ++i) {
        const double t = std::exp(wt.log_at(i) + p * std::log(static_cast<double>(i)));
        const double y = t - carry;
        const double s = out.value + y;
        carry = (s - out.value) - y;
        out.value = s;
        out.terms = i;
        window.push_back(t);
        if (window.size() > 100) window.pop_front();

        const double grow = std::pow((i + 2.0) / (i + 1.0), p);
        const double cap = m.qratio_tail_cap(i + 1, z) * grow;
        if (std::isfinite(cap) && cap < 1.0) {
            const double bound = t * cap / (1.0 - cap);
            if (bound <= tol) {
                out.tail = bound;
                out.status = SumStatus::converged;
                return out;
            }
        } else if (at_saturation && (i & 63) == 0) {
            const double bound =
                stretched_tail_bound(wt.log_at(i + 1), i, p, stretched_rate_for(m, i), m.mu);
            if (bound <= tol) {
                out.tail = bound;
                out.status = SumStatus::converged;
                return out;
            }
        }

        if (out.value > 1e12 && window.size() == 100) {
            bool nondecreasing = true;
            for (std::size_t k = 1; k < window.size(); ++k)
                if (window[k] < window[k - 1]) { nondecreasing = false; break; }
            if (nondecreasing) {
                out.value = kInf;
                out.tail = kInf;
                out.status = SumStatus::diverged;
                return out;
            }
        }
    }
    out.tail = kInf;
    return out;
}

} // namespace

double mass_of_z(const CoefficientModel& m, double z, double tol) {
    if (!(tol > 0.0)) throw domain_error("mass_of_z: tol must be positive");
    if (z < 0.0) throw domain_error("mass_of_z: z must be nonnegative");
    if (z == 0.0) return 0.0;
    const double zsat = critical_monomer_density(m).value;
    if (z > zsat * (1.0 + 1e-14)) {
        std::ostringstream os;
        os << "mass_of_z: z = " << z << " exceeds the saturation density " << zsat;
        throw domain_error(os.str());
    }
    WeightTable wt(m, z);
    SeriesOut s = weight_series(m, wt, z, 1, tol);
    if (s.status == SumStatus::diverged) return kInf;
    if (s.status != SumStatus::converged)
        throw budget_error("mass_of_z: tail not certifiable within the summation budget");
    return s.value;
}

double z_of_mass(const CoefficientModel& m, double rho, double tol) {
    if (!(rho > 0.0)) throw domain_error("z_of_mass: rho must be positive");
    if (!(tol > 0.0)) throw domain_error("z_of_mass: tol must be positive");
    const double zsat = critical_monomer_density(m).value;

    CriticalMass rs = critical_mass(m, std::min(tol, 1e-9));
    if (rs.status == SumStatus::converged && rho > rs.value + tol) {
        std::ostringstream os;
        os << "z_of_mass: rho = " << rho << " exceeds the saturation mass " << rs.value;
        throw supercritical_error(os.str());
    }

    double lo = 0.0;
    double hi = zsat * (1.0 - 1e-12);
    const double eval_tol = tol / 4.0;
    double mid = hi;
    for (int iter = 0; iter < 200; ++iter) {
        mid = 0.5 * (lo + hi);
        const double f = mass_of_z(m, mid, eval_tol);
        if (std::abs(f - rho) <= tol) return mid;
        if (f >= rho)
            hi = mid; // ties move the bracket toward the lower endpoint
        else
            lo = mid;
    }
    // Monotonicity makes this unreachable for a continuous mass map.
    std::ostringstream os;
    os << "z_of_mass: bisection failed to settle, bracket [" << lo << ", " << hi << "]";
    throw solver_error(os.str());
}

EquilibriumProfile equilibrium_profile(const CoefficientModel& m, double z, std::size_t n,
                                       double tol) {
    if (n < 2) throw domain_error("equilibrium_profile: n must be >= 2");
    if (!(z > 0.0)) throw domain_error("equilibrium_profile: z must be positive");
    const double zsat = critical_monomer_density(m).value;
    if (z > zsat * (1.0 + 1e-14)) throw domain_error("equilibrium_profile: z above saturation");

    EquilibriumProfile p;
    p.z = z;
    p.zs = zsat;
    p.n = n;

    WeightTable wt(m, z);
    wt.log_at(n);
    p.log_weight.assign(wt.logs().begin(), wt.logs().begin() + n);

    SeriesOut mass = weight_series(m, wt, z, 1, tol);
    if (mass.status != SumStatus::converged)
        throw budget_error("equilibrium_profile: mass tail not certifiable");
    p.mass = mass.value;

    SeriesOut m2 = weight_series(m, wt, z, 2, tol);
    if (m2.status != SumStatus::converged)
        throw budget_error("equilibrium_profile: second moment tail not certifiable");
    p.m2 = m2.value;

    SeriesOut total = weight_series(m, wt, z, 0, tol);
    if (total.status != SumStatus::converged)
        throw budget_error("equilibrium_profile: weight sum not certifiable");
    p.weight_total = total.value;

    // tail of the plain weight sum past the truncation size
    {
        double tail = 0.0;
        const std::size_t far = std::max(n, total.terms);
        for (std::size_t i = n + 1; i <= far; ++i) tail += std::exp(wt.log_at(i));
        p.weight_tail_n = tail + total.tail;
    }

    // a_quantity: rate-magnitude weighted second moment.  The i = 1 term uses
    // the raw detachment value (the zeroed convention would understate the
    // rate scale there).
    {
        double acc = 0.0;
        double tail_ok = -1.0;
        const bool at_sat = m.is_family() && !(z < m.zs);
        for (std::size_t i = 1; i <= kSeriesBudget; ++i) {
            const double a = m.attach(i);
            const double b = i == 1 ? m.raw_detach(1) : m.detach(i);
            const double f = 1.0 + a + b;
            const double t =
                std::exp(wt.log_at(i) + 2.0 * std::log(static_cast<double>(i))) * f * f;
            acc += t;
            // ratio cap: weight ratio times polynomial growth of i^2 (1+a+b)^2;
            // the rate factor grows no faster than (i+1)/i for every kind
            const double grow = std::pow((i + 2.0) / (i + 1.0), 4);
            const double cap = m.qratio_tail_cap(i + 1, z) * grow;
            if (std::isfinite(cap) && cap < 1.0 && t * cap / (1.0 - cap) <= tol) {
                tail_ok = t * cap / (1.0 - cap);
                break;
            }
            if (at_sat && (i & 63) == 0) {
                // fold the rate factor into two extra polynomial powers; a+b
                // grows like a power of i with exponent at most one
                const double bound = stretched_tail_bound(
                    wt.log_at(i + 1) + 2.0 * std::log(f), i, 2, stretched_rate_for(m, i), m.mu);
                if (bound <= tol) {
                    tail_ok = bound;
                    break;
                }
            }
        }
        if (tail_ok < 0.0)
            throw budget_error("equilibrium_profile: rate-moment tail not certifiable");
        p.a_quantity = acc;
    }

    // m3: suffix sums of j Q_j z^j in one backward pass over the extended
    // range, then the weighted squares forward.  +inf when the tail cannot
    // be certified (the upper gap bound is unavailable in that case).
    {
        const double eps = std::min(tol, 1e-9);
        std::size_t K = std::max<std::size_t>(n, mass.terms);
        double tail1 = kInf; // bound on sum_{j>K} j Q_j z^j
        bool ok = false;
        auto envelope_contracts = [&](std::size_t Kc) {
            // the squared suffix bound must shrink faster than 1/(a w) grows
            const double r_cap = m.qratio_tail_cap(Kc + 1, z);
            if (!std::isfinite(r_cap) || !(r_cap < 1.0)) return false;
            const double rho_shift = r_cap * (Kc + 2.0) / (Kc + 1.0);
            double r_min;
            if (m.is_family()) {
                r_min = m.qratio(Kc + 1, z);
            } else {
                const std::size_t j_end = std::max(m.table_a.size(), m.table_b.size() + 1);
                r_min = m.qratio(std::max(Kc + 1, j_end), z);
                for (std::size_t j = Kc + 1; j <= j_end; ++j)
                    r_min = std::min(r_min, m.qratio(j, z));
            }
            return rho_shift < 1.0 && rho_shift * rho_shift / r_min <= 0.98;
        };
        for (; K <= kSeriesBudget; ++K) {
            const double t = std::exp(wt.log_at(K) + std::log(static_cast<double>(K)));
            const double cap = m.qratio_tail_cap(K + 1, z) * (K + 2.0) / (K + 1.0);
            if (std::isfinite(cap) && cap < 1.0 && t * cap / (1.0 - cap) <= eps &&
                envelope_contracts(K)) {
                tail1 = t * cap / (1.0 - cap);
                ok = true;
                break;
            }
            if (m.is_family() && !(z < m.zs) && (K & 63) == 0) {
                const double bound =
                    stretched_tail_bound(wt.log_at(K + 1), K, 1, stretched_rate_for(m, K), m.mu);
                if (bound <= eps) {
                    tail1 = bound;
                    ok = true;
                    break;
                }
            }
        }
        if (!ok) {
            p.m3 = kInf;
        } else {
            // march a certified per-term bound over the remaining terms
            // (1/(a_i w_i)) T_i^2: the suffix factor contracts by at most the
            // capped suffix-ratio squared while 1/(a w) grows by at most the
            // reciprocal weight ratio; close geometrically once the per-step
            // bound settles below the midpoint toward one
            double m3_tail = kInf;
            {
                const std::size_t table_end =
                    m.is_family() ? 0 : std::max(m.table_a.size(), m.table_b.size() + 1);
                double log_b = 2.0 * std::log(std::max(tail1, 1e-300)) -
                               (wt.log_at(K + 1) + m.log_attach(K + 1));
                double acc_tail = std::exp(log_b);
                for (std::size_t i = K + 1; i <= K + 200000; ++i) {
                    const double cap = m.qratio_tail_cap(i + 1, z);
                    if (!std::isfinite(cap) || !(cap < 1.0)) break;
                    double ar_cap = 1.0; // sup of a_j / a_{j+1} beyond i
                    if (!m.is_family())
                        for (std::size_t j = i; j <= table_end; ++j)
                            ar_cap = std::max(ar_cap, m.attach(j) / m.attach(j + 1));
                    const double poly = (i + 2.0) / (i + 1.0);
                    const double f =
                        cap * cap * poly * poly * ar_cap / m.qratio(i + 1, z);
                    if (f <= 0.5 * (1.0 + cap) && i >= table_end) {
                        m3_tail = acc_tail + std::exp(log_b) * f / (1.0 - f);
                        break;
                    }
                    log_b += std::log(f);
                    acc_tail += std::exp(log_b);
                    if (!std::isfinite(acc_tail)) break;
                }
            }
            if (!std::isfinite(m3_tail)) {
                p.m3 = kInf;
            } else {
                std::vector<double> suffix(K + 2, 0.0);
                suffix[K + 1] = tail1;
                for (std::size_t j = K; j >= 1; --j) {
                    suffix[j] = suffix[j + 1] +
                                std::exp(wt.log_at(j) + std::log(static_cast<double>(j)));
                    if (j == 1) break;
                }
                double acc = 0.0;
                for (std::size_t i = 1; i <= K; ++i) {
                    const double inv = std::exp(-(wt.log_at(i) + m.log_attach(i)));
                    acc += inv * suffix[i + 1] * suffix[i + 1];
                }
                p.m3 = acc + m3_tail;
            }
        }
    }
    return p;
}

nlohmann::json profile_to_json(const EquilibriumProfile& p) {
    nlohmann::json j;
    j["z"] = p.z;
    j["zs"] = p.zs;
    j["n"] = p.n;
    j["mass"] = p.mass;
    j["m2"] = p.m2;
    if (std::isfinite(p.m3))
        j["m3"] = p.m3;
    else
        j["m3"] = "inf";
    j["a_quantity"] = p.a_quantity;
    j["weight_total"] = p.weight_total;
    j["weight_tail_n"] = p.weight_tail_n;
    j["log_weight"] = p.log_weight;
    return j;
}

EquilibriumProfile profile_from_json(const nlohmann::json& j) {
    EquilibriumProfile p;
    p.z = j.at("z").get<double>();
    p.zs = j.at("zs").get<double>();
    p.n = j.at("n").get<std::size_t>();
    p.mass = j.at("mass").get<double>();
    p.m2 = j.at("m2").get<double>();
    p.m3 = j.at("m3").is_string() ? kInf : j.at("m3").get<double>();
    p.a_quantity = j.at("a_quantity").get<double>();
    p.weight_total = j.at("weight_total").get<double>();
    p.weight_tail_n = j.at("weight_tail_n").get<double>();
    p.log_weight = j.at("log_weight").get<std::vector<double>>();
    if (p.log_weight.size() != p.n) throw domain_error("profile: log_weight length mismatch");
    return p;
}

} // namespace bd
