#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "bd/dynamics.hpp"
#include "bd/spectral.hpp"

using namespace bd;

namespace {

CoefficientModel geometric() {
    CoefficientModel m;
    m.kind = CoefficientKind::table;
    m.table_a = {1.0};
    m.table_b = {2.0};
    return m;
}

CoefficientModel pt_model() {
    CoefficientModel m;
    m.kind = CoefficientKind::power_law;
    m.alpha = 1.0 / 3.0;
    m.mu = 2.0 / 3.0;
    m.zs = 1.0;
    m.q = 1.0;
    return m;
}

StateVector equilibrium_state(const EquilibriumProfile& p) {
    std::vector<double> c(p.n);
    for (std::size_t i = 1; i <= p.n; ++i) c[i - 1] = p.weight(i);
    return StateVector::from(std::move(c));
}

} // namespace

TEST_CASE("net rates") {
    auto m = geometric();
    auto p = equilibrium_profile(m, 1.0, 32, 1e-13);
    auto s = equilibrium_state(p);
    for (std::size_t i = 1; i < s.n(); ++i)
        CHECK(std::abs(flux(m, s, i)) < 1e-12 * (1.0 + std::abs(s.c[i - 1])));
    CHECK(flux(m, s, s.n()) == 0.0);

    std::vector<double> c(8, 0.0);
    c[0] = 1.0;
    auto mono = StateVector::from(std::move(c));
    CHECK(flux(m, mono, 1) == doctest::Approx(1.0));
}

TEST_CASE("time derivative identities") {
    auto m = pt_model();
    auto p = equilibrium_profile(m, 0.8, 64, 1e-13);
    auto eq = equilibrium_state(p);
    for (double v : bd_rhs(m, eq)) CHECK(std::abs(v) < 1e-12);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> c(64);
        for (auto& v : c) v = u(rng);
        auto s = StateVector::from(std::move(c));
        auto d = bd_rhs(m, s);
        double acc = 0.0, scale = 0.0;
        for (std::size_t i = 1; i <= s.n(); ++i) {
            acc += double(i) * d[i - 1];
            scale += std::abs(double(i) * d[i - 1]);
        }
        CHECK(std::abs(acc) <= 1e-12 * std::max(scale, 1e-300));

        // weak form: sum phi_i dc_i = sum_i W_i (phi_{i+1} - phi_i - phi_1),
        // with the edge rate zero
        std::vector<double> phi(65);
        for (auto& v : phi) v = u(rng) - 0.5;
        phi[64] = phi[63] + phi[0];
        double lhs = 0.0;
        for (std::size_t i = 1; i <= 64; ++i) lhs += phi[i - 1] * d[i - 1];
        double rhs = 0.0;
        for (std::size_t i = 1; i <= 64; ++i)
            rhs += flux(m, s, i) * (phi[i] - phi[i - 1] - phi[0]);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }

    // five-component brute force of the mass identity
    std::vector<double> c5 = {0.3, 0.7, 0.2, 0.9, 0.4};
    auto s5 = StateVector::from(std::move(c5));
    auto d5 = bd_rhs(m, s5);
    const double w1 = flux(m, s5, 1), w2 = flux(m, s5, 2), w3 = flux(m, s5, 3),
                 w4 = flux(m, s5, 4);
    CHECK(d5[0] == doctest::Approx(-w1 - (w1 + w2 + w3 + w4)).epsilon(1e-14));
    CHECK(d5[1] == doctest::Approx(w1 - w2).epsilon(1e-14));
    CHECK(d5[2] == doctest::Approx(w2 - w3).epsilon(1e-14));
    CHECK(d5[3] == doctest::Approx(w3 - w4).epsilon(1e-14));
    CHECK(d5[4] == doctest::Approx(w4).epsilon(1e-14));
}

TEST_CASE("equilibrium is a fixed point of the integrator") {
    auto m = geometric();
    auto p = equilibrium_profile(m, 1.0, 48, 1e-13);
    auto s0 = equilibrium_state(p);
    IntegrateOptions opts;
    opts.snapshot_every = 1.0;
    auto traj = integrate(m, s0, 5.0, opts);
    REQUIRE(!traj.states.empty());
    for (std::size_t i = 0; i < s0.n(); ++i)
        CHECK(std::abs(traj.states.back()[i] - s0.c[i]) <= 10 * opts.atol);
    CHECK(!traj.mass_drift_flagged);
}

TEST_CASE("free energy and dissipation at and off equilibrium") {
    auto m = pt_model();
    auto p = equilibrium_profile(m, 0.8, 200, 1e-13);
    auto eq = equilibrium_state(p);
    auto fe = free_energy(eq, p);
    CHECK(std::abs(fe.fz) < 1e-10);
    CHECK(dissipation(eq, m) < 1e-20);

    StateVector zero;
    zero.c.assign(200, 0.0);
    zero.refresh_mass();
    auto fe0 = free_energy(zero, p);
    CHECK(fe0.h == 0.0);
    CHECK(fe0.fz == doctest::Approx(p.weight_total));

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> c(200);
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = u(rng) * p.weight(i + 1);
        auto s = StateVector::from(std::move(c));
        CHECK(dissipation(s, m) >= 0.0);
    }

    // one vanished side of a reaction with the other alive
    std::vector<double> c = {1.0, 0.0, 1.0};
    auto s = StateVector::from(std::move(c));
    CHECK(std::isinf(dissipation(s, m)));
}

TEST_CASE("exponential moment") {
    std::vector<double> c(16, 0.0);
    c[0] = 1.0;
    auto s = StateVector::from(std::move(c));
    CHECK(exp_moment(s, 1.0) == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
    CHECK(exp_moment(s, 0.0) == doctest::Approx(1.0));

    std::vector<double> big(2000, 1.0);
    auto sb = StateVector::from(std::move(big));
    CHECK_THROWS_AS(exp_moment(sb, 1.0), domain_error);
}

TEST_CASE("weighted l1 distance") {
    auto m = geometric();
    auto p = equilibrium_profile(m, 1.0, 80, 1e-13);
    auto eq = equilibrium_state(p);
    const double eta = 0.1; // admissible: below log(2)/2
    CHECK(weighted_l1_distance(m, eq, p, eta) < 1e-10);
    CHECK_THROWS_AS(weighted_l1_distance(m, eq, p, 0.4), domain_error);

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.5);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> a(80), b(80), mid(80);
        for (std::size_t i = 0; i < 80; ++i) {
            a[i] = u(rng) * p.weight(i + 1);
            b[i] = u(rng) * p.weight(i + 1);
            mid[i] = 0.5 * (a[i] + b[i]);
        }
        auto sa = StateVector::from(a), sb = StateVector::from(b), sm = StateVector::from(mid);
        const double da = weighted_l1_distance(m, sa, p, eta);
        const double db = weighted_l1_distance(m, sb, p, eta);
        const double dm = weighted_l1_distance(m, sm, p, eta);
        CHECK(dm <= 0.5 * (da + db) + 1e-12); // convexity of the norm distance
    }
}

TEST_CASE("fluctuation split and mass matching") {
    auto m = pt_model();
    auto p = equilibrium_profile(m, 0.8, 128, 1e-13);
    auto eq = equilibrium_state(p);
    auto h0 = fluctuation_split(eq, p);
    for (double v : h0.h) CHECK(std::abs(v) < 1e-14);

    auto s = perturbed_equilibrium(p, 1e-3, 42);
    auto h = fluctuation_split(s, p);
    double num = 0.0, scale = 0.0;
    for (std::size_t i = 1; i <= h.h.size(); ++i) {
        num += double(i) * p.weight(i) * h.h[i - 1];
        scale += std::abs(double(i) * p.weight(i) * h.h[i - 1]);
    }
    CHECK(std::abs(num) <= 1e-10 * std::max(scale, 1e-300));

    // round trip within one rounding
    for (std::size_t i = 1; i <= h.h.size(); ++i) {
        const double back = p.weight(i) * (1.0 + h.h[i - 1]);
        CHECK(back == doctest::Approx(s.c[i - 1]).epsilon(1e-15));
    }
}

TEST_CASE("quadratic remainder: bilinearity, telescoping, decomposition") {
    auto m = pt_model();
    auto p = equilibrium_profile(m, 0.8, 400, 1e-13);

    std::vector<double> zero(64, 0.0), g(64, 0.25);
    for (double v : gamma_term(p, m, zero, g)) CHECK(v == 0.0);

    // weighted telescoping for inputs supported away from the edge
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> f(64, 0.0), gg(64, 0.0);
        for (std::size_t i = 0; i < 50; ++i) {
            f[i] = u(rng);
            gg[i] = u(rng);
        }
        auto gam = gamma_term(p, m, f, gg);
        double acc = 0.0, scale = 0.0;
        for (std::size_t i = 1; i <= 64; ++i) {
            const double t = double(i) * p.weight(i) * gam[i - 1];
            acc += t;
            scale += std::abs(t);
        }
        CHECK(std::abs(acc) <= 1e-10 * std::max(scale, 1e-300));
    }

    // six-component brute force through the weak form
    {
        const std::size_t n = 6;
        std::vector<double> f = {0.3, -0.2, 0.5, 0.1, -0.4, 0.2};
        std::vector<double> gg = {-0.1, 0.6, -0.3, 0.2, 0.5, -0.2};
        auto gam = gamma_term(p, m, f, gg);
        const double w1 = p.weight(1);
        // quadratic rates, edge closed
        std::vector<double> q(n, 0.0);
        for (std::size_t i = 1; i < n; ++i)
            q[i - 1] = 0.5 * m.attach(i) * p.weight(i) * w1 *
                       (f[i - 1] * gg[0] + f[0] * gg[i - 1]);
        // weak form against indicator sequences reproduces the strong form
        for (std::size_t comp = 1; comp <= n; ++comp) {
            double weak = 0.0;
            for (std::size_t i = 1; i <= n; ++i) {
                const double phi_next = (i + 1 == comp) ? 1.0 : 0.0;
                const double phi_i = (i == comp) ? 1.0 : 0.0;
                const double phi_1 = (comp == 1) ? 1.0 : 0.0;
                weak += q[i - 1] * (phi_next - phi_i - phi_1);
            }
            CHECK(gam[comp - 1] == doctest::Approx(weak / p.weight(comp)).epsilon(1e-12));
        }
        double tele = 0.0;
        for (std::size_t i = 1; i <= n; ++i) tele += double(i) * p.weight(i) * gam[i - 1];
        CHECK(std::abs(tele) < 1e-14);
    }

    // full decomposition: rhs in fluctuation variables equals linear + quadratic
    auto L = build_linearized(p, m, 400);
    auto s = perturbed_equilibrium(p, 1e-2, 7);
    auto h = fluctuation_split(s, p);
    REQUIRE(h.h.size() == 400);
    auto lin = L.apply_strong(h.h);
    auto gam = gamma_term(p, m, h.h, h.h);
    auto rhs = bd_rhs(m, s);
    double scale = 0.0;
    for (std::size_t i = 1; i <= 400; ++i)
        scale = std::max(scale, std::abs(rhs[i - 1] / p.weight(i)));
    for (std::size_t i = 1; i <= 400; ++i) {
        const double lhs = rhs[i - 1] / p.weight(i);
        CHECK(std::abs(lhs - (lin[i - 1] + gam[i - 1])) <= 1e-10 * scale);
    }
}

TEST_CASE("linearized evolution: projection, contraction, orthogonality") {
    auto m = geometric();
    auto p = equilibrium_profile(m, 1.0, 180, 1e-13);
    auto L = build_linearized(p, m, 180);
    IntegrateOptions opts;
    opts.snapshot_every = 0.5;

    std::vector<double> null_dir(180);
    for (std::size_t i = 1; i <= 180; ++i) null_dir[i - 1] = double(i);
    auto tn = integrate_linearized(L, null_dir, 2.0, opts, 0.1);
    CHECK(tn.projected_initial);
    CHECK(tn.h_norm.front() < 1e-9);

    auto s = perturbed_equilibrium(p, 1e-2, 21);
    auto h = fluctuation_split(s, p);
    auto traj = integrate_linearized(L, h.h, 10.0, opts, 0.1);
    CHECK(!traj.projected_initial);
    for (std::size_t k = 1; k < traj.h_norm.size(); ++k)
        CHECK(traj.h_norm[k] <= traj.h_norm[k - 1] * (1.0 + 1e-10));
    for (const auto& state : traj.states) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 1; i <= 180; ++i) {
            num += double(i) * p.weight(i) * state[i - 1];
            den += std::abs(double(i) * p.weight(i) * state[i - 1]);
        }
        CHECK(std::abs(num) <= 1e-8 * std::max(den, 1e-300));
    }
}

TEST_CASE("decay-rate fitting") {
    std::vector<double> t, v;
    for (int k = 0; k < 20; ++k) {
        t.push_back(0.5 * k);
        v.push_back(std::exp(-3.0 * 0.5 * k));
    }
    auto fit = fit_decay_rate(t, v);
    CHECK(fit.rate == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(fit.r2 > 1.0 - 1e-12);

    std::vector<double> c(20, 0.7);
    auto fc = fit_decay_rate(t, c);
    CHECK(std::abs(fc.rate) < 1e-12);

    std::vector<double> wob;
    for (int k = 0; k < 20; ++k)
        wob.push_back(std::exp(-0.5 * k) * (1.0 + 0.01 * std::sin(0.5 * k)));
    auto fw = fit_decay_rate(t, wob);
    CHECK(fw.rate == doctest::Approx(1.0).epsilon(0.02));

    CHECK_THROWS_AS(fit_decay_rate({0, 1, 2}, {1, 1, 1}), domain_error);
}

TEST_CASE("nonlinear versus linearized divergence is quadratic in the amplitude") {
    auto m = geometric();
    auto p = equilibrium_profile(m, 1.0, 128, 1e-13);
    auto L = build_linearized(p, m, 128);
    IntegrateOptions opts;
    opts.rtol = 1e-11;
    opts.atol = 1e-14;
    opts.snapshot_every = 1.0;
    const double t_star = 3.0;

    auto divergence = [&](double eps) {
        auto s0 = perturbed_equilibrium(p, eps, 33);
        auto h0 = fluctuation_split(s0, p);
        auto nl = integrate(m, s0, t_star, opts);
        auto lin = integrate_linearized(L, h0.h, t_star, opts, 0.1);
        auto hend = fluctuation_split(StateVector::from(nl.states.back()), p);
        double acc = 0.0;
        for (std::size_t i = 1; i <= 128; ++i) {
            const double d = hend.h[i - 1] - lin.states.back()[i - 1];
            acc += p.weight(i) * d * d;
        }
        return std::sqrt(acc);
    };
    const double ratio = divergence(1e-2) / divergence(1e-3);
    CHECK(ratio > 50.0);
    CHECK(ratio < 200.0);
}
