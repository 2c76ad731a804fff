#include "bd/model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace bd {

namespace {

double table_at(const std::vector<double>& t, std::size_t idx0) {
    return idx0 < t.size() ? t[idx0] : t.back();
}

} // namespace

double CoefficientModel::attach(std::size_t i) const {
    if (i < 1) throw domain_error("attach: index must be >= 1");
    switch (kind) {
    case CoefficientKind::power_law:
    case CoefficientKind::surface_tension:
        return std::pow(static_cast<double>(i), alpha);
    case CoefficientKind::table:
        return table_at(table_a, i - 1);
    }
    return 0.0;
}

double CoefficientModel::raw_detach(std::size_t i) const {
    if (i < 1) throw domain_error("detach: index must be >= 1");
    switch (kind) {
    case CoefficientKind::power_law:
        return std::pow(static_cast<double>(i), alpha) *
               (zs + q * std::pow(static_cast<double>(i), mu - 1.0));
    case CoefficientKind::surface_tension: {
        if (i == 1) return 0.0;
        const double im1 = static_cast<double>(i - 1);
        const double im2 = static_cast<double>(i - 2);
        return zs * std::pow(im1, alpha) *
               std::exp(sigma * (std::pow(im1, mu) - std::pow(im2, mu)));
    }
    case CoefficientKind::table:
        return i >= 2 ? table_at(table_b, i - 2) : table_b.front();
    }
    return 0.0;
}

double CoefficientModel::detach(std::size_t i) const {
    if (i < 1) throw domain_error("detach: index must be >= 1");
    return i == 1 ? 0.0 : raw_detach(i);
}

double CoefficientModel::log_attach(std::size_t i) const {
    switch (kind) {
    case CoefficientKind::power_law:
    case CoefficientKind::surface_tension:
        return alpha * std::log(static_cast<double>(i));
    case CoefficientKind::table:
        return std::log(table_at(table_a, i - 1));
    }
    return 0.0;
}

double CoefficientModel::log_detach(std::size_t i) const {
    if (i < 2) throw domain_error("log_detach: index must be >= 2");
    switch (kind) {
    case CoefficientKind::power_law:
        return alpha * std::log(static_cast<double>(i)) + std::log(zs) +
               std::log1p((q / zs) * std::pow(static_cast<double>(i), mu - 1.0));
    case CoefficientKind::surface_tension: {
        const double im1 = static_cast<double>(i - 1);
        const double im2 = static_cast<double>(i - 2);
        return std::log(zs) + alpha * std::log(im1) +
               sigma * (std::pow(im1, mu) - std::pow(im2, mu));
    }
    case CoefficientKind::table:
        return std::log(table_at(table_b, i - 2));
    }
    return 0.0;
}

double CoefficientModel::qratio(std::size_t i, double z) const {
    return std::exp(std::log(z) + log_attach(i) - log_detach(i + 1));
}

double CoefficientModel::qratio_tail_cap(std::size_t i, double z) const {
    if (z <= 0.0) return 0.0;
    if (is_family()) {
        // The ratio increases monotonically toward z/zs for both families.
        return z < zs ? z / zs : kInf;
    }
    // Table: beyond the entries the ratio is a constant; the supremum is the
    // larger of the remaining in-table ratios and the continuation value.
    double cap = z * table_a.back() / table_b.back();
    const std::size_t j_end = std::max(table_a.size(), table_b.size() + 1);
    for (std::size_t j = std::max<std::size_t>(i, 1); j <= j_end; ++j)
        cap = std::max(cap, qratio(j, z));
    return cap < 1.0 ? cap : kInf;
}

void CoefficientModel::validate() const {
    switch (kind) {
    case CoefficientKind::power_law:
        if (!(alpha > 0.0) || !(alpha <= 1.0)) throw domain_error("power_law: alpha must be in (0,1]");
        if (!(mu > 0.0) || !(mu < 1.0)) throw domain_error("power_law: mu must be in (0,1)");
        if (!(zs > 0.0)) throw domain_error("power_law: zs must be positive");
        if (!(q > 0.0)) throw domain_error("power_law: q must be positive");
        break;
    case CoefficientKind::surface_tension:
        if (!(alpha >= 0.0) || !(alpha <= 1.0))
            throw domain_error("surface_tension: alpha must be in [0,1]");
        if (!(mu > 0.0) || !(mu < 1.0)) throw domain_error("surface_tension: mu must be in (0,1)");
        if (!(zs > 0.0)) throw domain_error("surface_tension: zs must be positive");
        if (!(sigma > 0.0)) throw domain_error("surface_tension: sigma must be positive");
        break;
    case CoefficientKind::table:
        if (table_a.empty() || table_b.empty())
            throw domain_error("table: table_a and table_b must be nonempty");
        for (double v : table_a)
            if (!(v > 0.0)) throw domain_error("table: attachment entries must be positive");
        for (double v : table_b)
            if (!(v > 0.0)) throw domain_error("table: detachment entries must be positive");
        break;
    }
}

CoefficientModel model_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw domain_error("model: expected a JSON object");
    static const std::vector<std::string> known = {"kind",  "alpha",   "mu",     "zs",
                                                   "q",     "sigma",   "table_a", "table_b"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw domain_error("model: unknown field '" + it.key() + "'");
    }
    if (!j.contains("kind")) throw domain_error("model: missing 'kind'");
    const std::string kind = j.at("kind").get<std::string>();

    CoefficientModel m;
    auto reject = [&](const char* field) {
        if (j.contains(field))
            throw domain_error("model: field '" + std::string(field) + "' not valid for kind '" +
                               kind + "'");
    };
    if (kind == "power_law") {
        m.kind = CoefficientKind::power_law;
        m.alpha = j.at("alpha").get<double>();
        m.mu = j.at("mu").get<double>();
        m.zs = j.at("zs").get<double>();
        m.q = j.at("q").get<double>();
        reject("sigma");
        reject("table_a");
        reject("table_b");
    } else if (kind == "surface_tension") {
        m.kind = CoefficientKind::surface_tension;
        m.alpha = j.at("alpha").get<double>();
        m.mu = j.at("mu").get<double>();
        m.zs = j.at("zs").get<double>();
        m.sigma = j.at("sigma").get<double>();
        reject("q");
        reject("table_a");
        reject("table_b");
    } else if (kind == "table") {
        m.kind = CoefficientKind::table;
        m.table_a = j.at("table_a").get<std::vector<double>>();
        m.table_b = j.at("table_b").get<std::vector<double>>();
        reject("alpha");
        reject("mu");
        reject("zs");
        reject("q");
        reject("sigma");
    } else {
        throw domain_error("model: kind must be power_law, surface_tension or table");
    }
    m.validate();
    return m;
}

nlohmann::json model_to_json(const CoefficientModel& m) {
    nlohmann::json j;
    switch (m.kind) {
    case CoefficientKind::power_law:
        j["kind"] = "power_law";
        j["alpha"] = m.alpha;
        j["mu"] = m.mu;
        j["zs"] = m.zs;
        j["q"] = m.q;
        break;
    case CoefficientKind::surface_tension:
        j["kind"] = "surface_tension";
        j["alpha"] = m.alpha;
        j["mu"] = m.mu;
        j["zs"] = m.zs;
        j["sigma"] = m.sigma;
        break;
    case CoefficientKind::table:
        j["kind"] = "table";
        j["table_a"] = m.table_a;
        j["table_b"] = m.table_b;
        break;
    }
    return j;
}

LogDetailedBalance log_detailed_balance(const CoefficientModel& m, std::size_t n) {
    if (n < 1) throw domain_error("log_detailed_balance: n must be >= 1");
    LogDetailedBalance db;
    db.n = n;
    db.log_q.resize(n);
    db.log_q[0] = 0.0;
    for (std::size_t i = 1; i < n; ++i)
        db.log_q[i] = db.log_q[i - 1] + m.log_attach(i) - m.log_detach(i + 1);
    return db;
}

WeightWalker::WeightWalker(const CoefficientModel& model, double z)
    : m_(&model), log_z_(std::log(z)), i_(1), logw_(std::log(z)) {}

void WeightWalker::advance() {
    logw_ += m_->log_attach(i_) - m_->log_detach(i_ + 1) + log_z_;
    ++i_;
}

ZsEstimate critical_monomer_density(const CoefficientModel& m) {
    ZsEstimate e;
    if (m.is_family()) {
        e.value = m.zs;
        e.exact = true;
        return e;
    }
    // Ratio Q_i / Q_{i+1} = b_{i+1} / a_i; constant continuation makes the
    // limit the continuation value.  Probe a trailing window to report how
    // settled the sequence already is.
    const std::size_t len = std::max(m.table_a.size(), m.table_b.size() + 1);
    const std::size_t w = std::min<std::size_t>(32, len) + 32;
    const std::size_t first = len > 32 ? len - 32 : 1;
    double lo = kInf, hi = -kInf;
    for (std::size_t i = first; i < first + w; ++i) {
        const double r = m.raw_detach(i + 1) / m.attach(i);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    e.value = m.table_b.back() / m.table_a.back();
    e.spread = hi - lo;
    e.window = w;
    if (e.spread > 0.25 * std::abs(e.value)) {
        std::ostringstream os;
        os << "critical_monomer_density: ratio window oscillates in [" << lo << ", " << hi
           << "], estimate unreliable";
        throw domain_error(os.str());
    }
    return e;
}

namespace {

// Exponent constant for the stretched-tail certificate at z = zs:
// weight ratios obey Q-ratio <= exp(-c (j+1)^(mu-1)) for j > K.
double stretched_rate_constant(const CoefficientModel& m, std::size_t K) {
    if (m.kind == CoefficientKind::power_law) {
        const double c = m.q / m.zs;
        const double x0 = c * std::pow(static_cast<double>(K) + 2.0, m.mu - 1.0);
        return c * std::log1p(x0) / x0;
    }
    if (m.kind == CoefficientKind::surface_tension) return m.sigma * m.mu;
    return 0.0;
}

} // namespace

CriticalMass critical_mass(const CoefficientModel& m, double tol) {
    if (!(tol > 0.0)) throw domain_error("critical_mass: tol must be positive");
    const double zsat = critical_monomer_density(m).value;
    CriticalMass out;

    WeightWalker walk(m, zsat);
    SumOptions opts;
    opts.tol = tol;

    double carry = 0.0;
    std::deque<double> window;
    for (std::size_t i = 1; i <= opts.max_terms; ++i) {
        const double t = static_cast<double>(i) * std::exp(walk.log_weight());
        const double y = t - carry;
        const double s = out.value + y;
        carry = (s - out.value) - y;
        out.value = s;
        out.terms = i;
        window.push_back(t);
        if (window.size() > opts.divergence_window) window.pop_front();

        // geometric certificate (tables below saturation ratio), then the
        // stretched certificate for the families where the ratio tends to 1
        const double cap = m.qratio_tail_cap(i + 1, zsat) * (i + 2.0) / (i + 1.0);
        if (std::isfinite(cap) && cap < 1.0) {
            const double bound = t * cap / (1.0 - cap);
            if (bound <= tol) {
                out.tail_bound = bound;
                out.finite = true;
                out.status = SumStatus::converged;
                return out;
            }
        } else if (m.is_family() && (i & 63) == 0) {
            const double c = stretched_rate_constant(m, i);
            const double log_next =
                walk.log_weight() + m.log_attach(i) - m.log_detach(i + 1) + std::log(zsat);
            const double bound = stretched_tail_bound(log_next, i, 1, c, m.mu);
            if (bound <= tol) {
                out.tail_bound = bound;
                out.finite = true;
                out.status = SumStatus::converged;
                return out;
            }
        }

        if (out.value > opts.divergence_threshold && window.size() == opts.divergence_window) {
            bool nondecreasing = true;
            for (std::size_t k = 1; k < window.size(); ++k)
                if (window[k] < window[k - 1]) { nondecreasing = false; break; }
            if (nondecreasing) {
                out.value = kInf;
                out.finite = false;
                out.tail_bound = kInf;
                out.status = SumStatus::diverged;
                return out;
            }
        }
        walk.advance();
    }
    out.status = SumStatus::indeterminate;
    out.tail_bound = kInf;
    return out;
}

DeltaCondition delta_condition(const CoefficientModel& m, std::size_t k_lo, std::size_t k_hi) {
    if (k_lo < 1 || k_hi < k_lo) throw domain_error("delta_condition: empty window");
    const double zsat = critical_monomer_density(m).value;
    if (!std::isfinite(zsat) || !(zsat > 0.0))
        throw domain_error("delta_condition: saturation density not finite");

    DeltaCondition out;
    out.k_begin = k_lo;
    out.scaled.reserve(k_hi - k_lo + 1);
    for (std::size_t k = k_lo; k <= k_hi; ++k) {
        const double a = m.attach(k);
        const double delta = m.raw_detach(k) / (a * zsat) - 1.0;
        out.scaled.push_back(delta * std::sqrt(a));
    }
    const std::size_t half = out.scaled.size() / 2;
    double inf_head = kInf, inf_tail = kInf;
    for (std::size_t j = 0; j < half; ++j) inf_head = std::min(inf_head, out.scaled[j]);
    for (std::size_t j = half; j < out.scaled.size(); ++j)
        inf_tail = std::min(inf_tail, out.scaled[j]);
    out.tail_infimum = inf_tail;
    // positivity threshold plus a trend guard: a sequence sliding toward zero
    // (power-law decay) fails even while still above the threshold
    out.verdict = inf_tail > 1e-6 && inf_tail >= 0.999 * inf_head;
    return out;
}

// ---------------------------------------------------------------------------
// SmoothLogWeight

SmoothLogWeight::SmoothLogWeight(const CoefficientModel& m, double z) : kind_(m.kind) {
    if (!m.is_family())
        throw domain_error("SmoothLogWeight: only parametric families have a smooth continuation");
    alpha_ = m.alpha;
    mu_ = m.mu;
    zs_ = m.zs;
    log_z_ = std::log(z);
    w_ = std::log(m.zs) - log_z_;
    if (kind_ == CoefficientKind::surface_tension) {
        sigma_ = m.sigma;
        y_min_ = 2.0;
        return;
    }
    c_ = m.q / m.zs;
    // anchor where the log1p series argument is comfortably below one
    double y = 1024.0;
    while (c_ * std::pow(y, mu_ - 1.0) > 0.5) y *= 2.0;
    anchor_y_ = y;
    anchor_sum_ = 0.0;
    for (std::size_t j = 2; j <= static_cast<std::size_t>(anchor_y_); ++j)
        anchor_sum_ += std::log1p(c_ * std::pow(static_cast<double>(j), mu_ - 1.0));
    y_min_ = anchor_y_;
    // series constants for the integral of log1p(c t^(mu-1)) from the anchor
    double cpow = 1.0;
    const double la = std::log(anchor_y_);
    for (int mm = 1; mm <= 48; ++mm) {
        cpow *= c_;
        SeriesTerm t;
        t.coef = ((mm & 1) ? 1.0 : -1.0) * cpow / mm;
        t.expo = mm * (mu_ - 1.0) + 1.0;
        t.log_form = std::abs(t.expo) < 1e-12;
        t.at_a = t.log_form ? la : std::exp(t.expo * la) / t.expo;
        series_.push_back(t);
    }
    phi_a0_ = phi(anchor_y_, 0);
    phi_a1_ = phi(anchor_y_, 1);
    phi_a3_ = phi(anchor_y_, 3);
}

double SmoothLogWeight::phi(double y, int d) const {
    const double u = c_ * std::pow(y, mu_ - 1.0);
    const double u1 = u * (mu_ - 1.0) / y;
    const double u2 = u1 * (mu_ - 2.0) / y;
    const double u3 = u2 * (mu_ - 3.0) / y;
    const double u4 = u3 * (mu_ - 4.0) / y;
    const double s = 1.0 + u;
    switch (d) {
    case 0: return std::log1p(u);
    case 1: return u1 / s;
    case 2: return u2 / s - u1 * u1 / (s * s);
    case 3: return u3 / s - 3.0 * u1 * u2 / (s * s) + 2.0 * u1 * u1 * u1 / (s * s * s);
    default:
        return u4 / s - (4.0 * u1 * u3 + 3.0 * u2 * u2) / (s * s) +
               12.0 * u1 * u1 * u2 / (s * s * s) - 6.0 * std::pow(u1, 4) / std::pow(s, 4);
    }
}

double SmoothLogWeight::em_sum_phi(double y) const {
    // integral of log1p(c t^(mu-1)) via the alternating series, valid since
    // the argument stays <= 0.5 beyond the anchor
    const double ly = std::log(y);
    double integral = 0.0;
    for (const auto& t : series_) {
        const double at_y = t.log_form ? ly : std::exp(t.expo * ly) / t.expo;
        const double term = t.coef * (at_y - t.at_a);
        integral += term;
        if (std::abs(term) < 1e-17 * (std::abs(integral) + 1.0)) break;
    }
    // endpoint corrections with all phi orders sharing one power evaluation
    const double u = c_ * std::exp((mu_ - 1.0) * ly);
    const double u1 = u * (mu_ - 1.0) / y;
    const double u2 = u1 * (mu_ - 2.0) / y;
    const double u3 = u2 * (mu_ - 3.0) / y;
    const double sdenom = 1.0 + u;
    const double p0 = std::log1p(u);
    const double p1 = u1 / sdenom;
    const double p3 = u3 / sdenom - 3.0 * u1 * u2 / (sdenom * sdenom) +
                      2.0 * u1 * u1 * u1 / (sdenom * sdenom * sdenom);
    return anchor_sum_ + integral + 0.5 * (p0 - phi_a0_) + (p1 - phi_a1_) / 12.0 -
           (p3 - phi_a3_) / 720.0;
}

double SmoothLogWeight::value(double y) const {
    if (kind_ == CoefficientKind::surface_tension)
        return std::log(zs_) - sigma_ * std::pow(y - 1.0, mu_) - y * w_;
    return std::log(zs_) - alpha_ * std::log(y) - em_sum_phi(y) - y * w_;
}

double SmoothLogWeight::deriv(double y) const {
    if (kind_ == CoefficientKind::surface_tension)
        return -sigma_ * mu_ * std::pow(y - 1.0, mu_ - 1.0) - w_;
    return -alpha_ / y - (phi(y, 0) + 0.5 * phi(y, 1) + phi(y, 2) / 12.0 - phi(y, 4) / 720.0) - w_;
}

double SmoothLogWeight::deriv2(double y) const {
    if (kind_ == CoefficientKind::surface_tension)
        return -sigma_ * mu_ * (mu_ - 1.0) * std::pow(y - 1.0, mu_ - 2.0);
    return alpha_ / (y * y) - (phi(y, 1) + 0.5 * phi(y, 2) + phi(y, 3) / 12.0);
}

double SmoothLogWeight::deriv3(double y) const {
    if (kind_ == CoefficientKind::surface_tension)
        return -sigma_ * mu_ * (mu_ - 1.0) * (mu_ - 2.0) * std::pow(y - 1.0, mu_ - 3.0);
    return -2.0 * alpha_ / (y * y * y) - (phi(y, 2) + 0.5 * phi(y, 3) + phi(y, 4) / 12.0);
}

} // namespace bd
