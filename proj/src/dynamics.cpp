#include "bd/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace bd {

void StateVector::refresh_mass() {
    double acc = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) acc += (i + 1.0) * c[i];
    mass = acc;
}

StateVector StateVector::from(std::vector<double> values) {
    for (double v : values)
        if (v < 0.0) throw domain_error("StateVector: negative concentration");
    StateVector s;
    s.c = std::move(values);
    s.refresh_mass();
    return s;
}

double flux(const CoefficientModel& m, const StateVector& s, std::size_t i) {
    const std::size_t n = s.n();
    if (i < 1 || i > n) throw domain_error("flux: index out of range");
    if (i == n) return 0.0; // closure
    return m.attach(i) * s.c[0] * s.c[i - 1] - m.detach(i + 1) * s.c[i];
}

namespace {

void rhs_into(const CoefficientModel& m, const std::vector<double>& a_rate,
              const std::vector<double>& b_rate, const std::vector<double>& c,
              std::vector<double>& out) {
    const std::size_t n = c.size();
    // net rates; the edge rate is zero by the closure
    double total = 0.0;
    double w_prev = 0.0;
    out.assign(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        const double w = a_rate[i - 1] * c[0] * c[i - 1] - b_rate[i] * c[i];
        total += w;
        if (i >= 2) out[i - 1] = w_prev - w;
        w_prev = w;
    }
    out[n - 1] = w_prev; // W_{n-1} - 0
    const double w1 = a_rate[0] * c[0] * c[0] - b_rate[1] * c[1];
    out[0] = -w1 - total;
}

} // namespace

std::vector<double> bd_rhs(const CoefficientModel& m, const StateVector& s) {
    const std::size_t n = s.n();
    if (n < 2) throw domain_error("bd_rhs: n must be >= 2");
    std::vector<double> a_rate(n), b_rate(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        a_rate[i - 1] = m.attach(i);
        b_rate[i - 1] = m.detach(i);
    }
    b_rate[n] = m.detach(n + 1);
    std::vector<double> out;
    rhs_into(m, a_rate, b_rate, s.c, out);
    return out;
}

namespace {

// Dormand-Prince 5(4) coefficients
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

// Generic adaptive driver shared by the nonlinear and linearized systems.
// Calls on_snapshot(t, y) at multiples of snapshot_every plus t_end.
template <typename Rhs, typename OnSnapshot>
void dopri5_drive(const Rhs& rhs, std::vector<double>& y, double t_end,
                  const IntegrateOptions& opts, const OnSnapshot& on_snapshot,
                  std::size_t& accepted, std::size_t& rejected) {
    const std::size_t n = y.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n);
    double t = 0.0;
    rhs(y, k1);
    on_snapshot(0.0, y);
    double next_snap = std::min(opts.snapshot_every, t_end);

    // initial step from the derivative scale
    double h;
    {
        double ynorm = 0.0, fnorm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            ynorm = std::max(ynorm, std::abs(y[i]));
            fnorm = std::max(fnorm, std::abs(k1[i]));
        }
        h = fnorm > 0.0 ? 0.01 * std::max(ynorm, 1e-6) / fnorm : 1e-6;
        h = std::min(h, t_end);
    }

    double facold = 1e-4;
    bool rejected_last = false;
    for (std::size_t step = 0; step < opts.max_steps; ++step) {
        if (t >= t_end * (1.0 - 1e-14)) return;
        if (h < 1e-14 * std::max(1.0, std::abs(t)))
            throw integration_error(
                "integrate: step size underflow (stiff regime); reduce the truncation size or "
                "rates, an implicit scheme is out of scope");
        bool hit_snap = false;
        if (t + h >= next_snap * (1.0 - 1e-14)) {
            h = next_snap - t;
            hit_snap = true;
        }

        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
        rhs(ytmp, k2);
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        rhs(ytmp, k3);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        rhs(ytmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        rhs(ytmp, k5);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                  a65 * k5[i]);
        rhs(ytmp, k6);
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] +
                                  a76 * k6[i]);
        rhs(ynew, k7);

        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double ee = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                   e6 * k6[i] + e7 * k7[i]);
            const double sc = opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            err += (ee / sc) * (ee / sc);
        }
        err = std::sqrt(err / n);

        const double fac11 = std::pow(std::max(err, 1e-32), 0.2 - 0.04 * 0.75);
        double fac = fac11 / std::pow(facold, 0.04);
        fac = std::max(0.1, std::min(5.0, fac / 0.9));
        double h_new = h / fac;

        if (err > 1.0) {
            h /= std::min(10.0, fac11 / 0.9);
            rejected_last = true;
            ++rejected;
            continue;
        }
        facold = std::max(err, 1e-4);
        t += h;
        y.swap(ynew);
        k1.swap(k7); // first-same-as-last
        ++accepted;
        if (hit_snap) {
            on_snapshot(t, y);
            next_snap = next_snap + opts.snapshot_every >= t_end * (1.0 - 1e-14)
                            ? t_end
                            : next_snap + opts.snapshot_every;
            if (t >= t_end * (1.0 - 1e-14)) return;
        }
        if (rejected_last) h_new = std::min(h_new, h);
        rejected_last = false;
        h = std::min(h_new, t_end - t);
    }
    throw integration_error("integrate: step budget exhausted");
}

} // namespace

Trajectory integrate(const CoefficientModel& m, const StateVector& s0, double t_end,
                     const IntegrateOptions& opts, const ObservablePlan* plan) {
    if (!(t_end > 0.0)) throw domain_error("integrate: t_end must be positive");
    if (!(opts.rtol > 0.0) || !(opts.atol > 0.0))
        throw domain_error("integrate: tolerances must be positive");
    const std::size_t n = s0.n();
    std::vector<double> a_rate(n), b_rate(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        a_rate[i - 1] = m.attach(i);
        b_rate[i - 1] = m.detach(i);
    }
    b_rate[n] = m.detach(n + 1);

    Trajectory traj;
    auto rhs = [&](const std::vector<double>& c, std::vector<double>& out) {
        rhs_into(m, a_rate, b_rate, c, out);
    };
    std::vector<double> y = s0.c;
    auto snapshot = [&](double t, std::vector<double>& state) {
        // negativity policy: clamp integration noise, abort on real loss
        for (auto& v : state) {
            if (v < 0.0) {
                if (v < -opts.atol) {
                    std::ostringstream os;
                    os << "integrate: component fell to " << v << " at t = " << t;
                    throw integration_error(os.str());
                }
                v = 0.0;
                ++traj.clamped_negatives;
            }
        }
        traj.times.push_back(t);
        traj.states.push_back(state);
        if (plan) {
            StateVector s;
            s.c = state;
            s.refresh_mass();
            ObservableRow row;
            row.t = t;
            row.mass = s.mass;
            const FreeEnergy fe = free_energy(s, *plan->profile);
            row.h = fe.h;
            row.fz = fe.fz;
            row.d = dissipation(s, m);
            row.exp_moment = exp_moment(s, plan->nu);
            row.l1_dist = weighted_l1_distance(m, s, *plan->profile, plan->eta);
            traj.observables.push_back(row);
        }
    };
    dopri5_drive(rhs, y, t_end, opts, snapshot, traj.steps_accepted, traj.steps_rejected);

    double mass_end = 0.0;
    for (std::size_t i = 0; i < n; ++i) mass_end += (i + 1.0) * traj.states.back()[i];
    if (std::abs(mass_end - s0.mass) > 1e-8 * std::max(s0.mass, 1e-300))
        traj.mass_drift_flagged = true;
    return traj;
}

FreeEnergy free_energy(const StateVector& s, const EquilibriumProfile& profile) {
    if (s.n() > profile.n) throw domain_error("free_energy: state longer than the profile");
    const double log_z = std::log(profile.z);
    FreeEnergy out;
    double acc = 0.0;
    for (std::size_t i = 1; i <= s.n(); ++i) {
        const double ci = s.c[i - 1];
        if (ci <= 0.0) continue; // x log x -> 0
        const double log_q = profile.log_weight[i - 1] - i * log_z;
        acc += ci * (std::log(ci) - log_q - 1.0);
    }
    out.h = acc;
    out.fz = acc - log_z * s.mass + profile.weight_total;
    return out;
}

double dissipation(const StateVector& s, const CoefficientModel& m) {
    // (forward - backward) * log(forward/backward) per reaction, both sides
    // in plain rate units so nothing under- or overflows
    const std::size_t n = s.n();
    double acc = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double fwd = m.attach(i) * s.c[0] * s.c[i - 1];
        const double bwd = m.detach(i + 1) * s.c[i];
        if (fwd == 0.0 && bwd == 0.0) continue;
        if (fwd == 0.0 || bwd == 0.0) return kInf;
        acc += (fwd - bwd) * (std::log(fwd) - std::log(bwd));
    }
    return acc;
}

double exp_moment(const StateVector& s, double nu) {
    if (nu < 0.0) throw domain_error("exp_moment: nu must be nonnegative");
    double acc = 0.0;
    for (std::size_t i = 1; i <= s.n(); ++i) {
        const double ci = s.c[i - 1];
        if (ci <= 0.0) continue;
        const double log_term = nu * i + std::log(ci);
        if (log_term > 700.0)
            throw domain_error("exp_moment: overflow at the truncation edge; reduce nu");
        acc += std::exp(log_term);
    }
    return acc;
}

double weighted_l1_distance(const CoefficientModel& m, const StateVector& s,
                            const EquilibriumProfile& profile, double eta) {
    const double w = std::log(profile.zs / profile.z);
    if (!(eta > 0.0) || !(eta < 0.5 * w)) {
        std::ostringstream os;
        os << "weighted_l1_distance: eta must lie in (0, " << 0.5 * w
           << ") for this profile (half the log saturation ratio)";
        throw domain_error(os.str());
    }
    if (s.n() > profile.n) throw domain_error("weighted_l1_distance: state longer than profile");
    double acc = 0.0;
    for (std::size_t i = 1; i <= s.n(); ++i)
        acc += std::exp(eta * i) * std::abs(s.c[i - 1] - std::exp(profile.log_weight[i - 1]));
    // equilibrium tail beyond the state, certified geometrically; the ratio
    // cap e^eta qratio stays below e^(-w/2)
    WeightWalker walk(m, profile.z);
    for (std::size_t i = 1; i < s.n() + 1; ++i) walk.advance(); // now at index n+1
    double tail = 0.0;
    for (std::size_t i = s.n() + 1; i <= s.n() + 2'000'000; ++i) {
        const double term = std::exp(eta * i + walk.log_weight());
        tail += term;
        const double cap = std::exp(eta) * m.qratio_tail_cap(i + 1, profile.z);
        if (cap < 1.0 && term * cap / (1.0 - cap) <= 1e-14 * std::max(acc + tail, 1e-300)) {
            return acc + tail + term * cap / (1.0 - cap);
        }
        walk.advance();
    }
    throw budget_error("weighted_l1_distance: equilibrium tail not certifiable");
}

Fluctuation fluctuation_split(const StateVector& s, const EquilibriumProfile& profile) {
    if (profile.n < s.n()) throw domain_error("fluctuation_split: profile truncation too small");
    Fluctuation out;
    out.h.assign(s.n(), 0.0);
    out.valid_n = s.n();
    for (std::size_t i = 1; i <= s.n(); ++i) {
        const double lw = profile.log_weight[i - 1];
        if (lw < -700.0) {
            out.valid_n = i - 1;
            out.clipped = true;
            out.h.resize(out.valid_n);
            break;
        }
        out.h[i - 1] = s.c[i - 1] * std::exp(-lw) - 1.0;
    }
    return out;
}

std::vector<double> gamma_term(const EquilibriumProfile& profile, const CoefficientModel& m,
                               const std::vector<double>& f, const std::vector<double>& g) {
    if (f.size() != g.size()) throw domain_error("gamma_term: length mismatch");
    const std::size_t n = f.size();
    if (n < 2 || profile.n < n) throw domain_error("gamma_term: bad lengths");
    const double w1 = std::exp(profile.log_weight[0]);
    // symmetrized quadratic rates, zero at the truncation edge
    std::vector<double> u(n, 0.0);
    for (std::size_t i = 1; i < n; ++i)
        u[i - 1] = 0.5 * m.attach(i) * std::exp(profile.log_weight[i - 1]) * w1 *
                   (f[i - 1] * g[0] + f[0] * g[i - 1]);
    std::vector<double> out(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += u[i];
    out[0] = -(u[0] + total) / w1;
    for (std::size_t i = 2; i <= n; ++i)
        out[i - 1] = (u[i - 2] - u[i - 1]) / std::exp(profile.log_weight[i - 1]);
    return out;
}

LinearTrajectory integrate_linearized(const LinearizedMatrix& L, const std::vector<double>& h0,
                                      double t_end, const IntegrateOptions& opts, double eta) {
    if (h0.size() != L.n) throw domain_error("integrate_linearized: length mismatch");
    LinearTrajectory traj;
    std::vector<double> y = h0;
    // mass-orthogonality of the initial fluctuation
    {
        const auto& w = L.weights();
        double num = 0.0, den = 0.0, scale = 0.0;
        for (std::size_t i = 1; i <= L.n; ++i) {
            num += i * w[i - 1] * y[i - 1];
            den += i * i * w[i - 1];
            scale += std::abs(i * w[i - 1] * y[i - 1]);
        }
        if (std::abs(num) > 1e-10 * std::max(scale, 1e-300)) {
            traj.projected_initial = true;
            for (std::size_t i = 1; i <= L.n; ++i) y[i - 1] -= (num / den) * i;
        }
    }
    auto rhs = [&](const std::vector<double>& h, std::vector<double>& out) {
        out = L.apply_strong(h);
    };
    auto snapshot = [&](double t, std::vector<double>& h) {
        traj.times.push_back(t);
        traj.states.push_back(h);
        double n2 = 0.0, x1 = 0.0;
        const auto& w = L.weights();
        for (std::size_t i = 1; i <= L.n; ++i) {
            n2 += w[i - 1] * h[i - 1] * h[i - 1];
            x1 += std::exp(eta * i) * w[i - 1] * std::abs(h[i - 1]);
        }
        traj.h_norm.push_back(std::sqrt(0.5 * n2));
        traj.x_norm.push_back(x1);
    };
    std::size_t rejected = 0;
    dopri5_drive(rhs, y, t_end, opts, snapshot, traj.steps_accepted, rejected);
    return traj;
}

DecayFit fit_decay_rate(const std::vector<double>& times, const std::vector<double>& values) {
    if (times.size() != values.size() || times.size() < 8)
        throw domain_error("fit_decay_rate: need at least 8 rows");
    const double t_end = times.back();
    double vmax = 0.0;
    for (double v : values) vmax = std::max(vmax, std::abs(v));
    const double floor = 100.0 * std::numeric_limits<double>::epsilon() * vmax;

    DecayFit fit;
    fit.window_lo = 0.5 * t_end;
    fit.window_hi = t_end;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < fit.window_lo - 1e-12) continue;
        if (!(values[i] > floor)) continue;
        xs.push_back(times[i]);
        ys.push_back(std::log(values[i]));
    }
    if (xs.size() < 8) throw domain_error("fit_decay_rate: fewer than 8 usable rows in the window");
    fit.points = xs.size();

    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.intercept = (sy - slope * sx) / n;
    fit.rate = -slope;
    double ss_res = 0.0, ss_tot = 0.0;
    const double mean_y = sy / n;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - (slope * xs[i] + fit.intercept);
        ss_res += e * e;
        ss_tot += (ys[i] - mean_y) * (ys[i] - mean_y);
    }
    fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

StateVector perturbed_equilibrium(const EquilibriumProfile& profile, double epsilon,
                                  std::uint64_t seed) {
    const std::size_t n = profile.n;
    std::vector<double> g(n);
    std::uint64_t x = seed + 0x9e3779b97f4a7c15ull;
    for (std::size_t i = 0; i < n; ++i) {
        // splitmix64
        x += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        z = z ^ (z >> 31);
        g[i] = 2.0 * (static_cast<double>(z >> 11) / 9007199254740992.0) - 1.0;
    }
    // mass correction through the monomer component keeps the perturbation
    // orthogonal to the conserved quantity
    double acc = 0.0;
    for (std::size_t i = 2; i <= n; ++i) acc += i * std::exp(profile.log_weight[i - 1]) * g[i - 1];
    g[0] = -acc / std::exp(profile.log_weight[0]);

    std::vector<double> c(n);
    for (std::size_t i = 1; i <= n; ++i) {
        const double v = std::exp(profile.log_weight[i - 1]) * (1.0 + epsilon * g[i - 1]);
        if (!(v >= 0.0))
            throw domain_error("perturbed_equilibrium: epsilon too large, state went negative");
        c[i - 1] = v;
    }
    return StateVector::from(std::move(c));
}

} // namespace bd
