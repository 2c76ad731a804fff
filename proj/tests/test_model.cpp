#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bd/model.hpp"

using namespace bd;

namespace {

CoefficientModel pt(double alpha, double mu, double zs, double q) {
    CoefficientModel m;
    m.kind = CoefficientKind::power_law;
    m.alpha = alpha;
    m.mu = mu;
    m.zs = zs;
    m.q = q;
    return m;
}

CoefficientModel cf(double alpha, double mu, double zs, double sigma) {
    CoefficientModel m;
    m.kind = CoefficientKind::surface_tension;
    m.alpha = alpha;
    m.mu = mu;
    m.zs = zs;
    m.sigma = sigma;
    return m;
}

CoefficientModel table(std::vector<double> a, std::vector<double> b) {
    CoefficientModel m;
    m.kind = CoefficientKind::table;
    m.table_a = std::move(a);
    m.table_b = std::move(b);
    return m;
}

} // namespace

TEST_CASE("rate evaluation") {
    auto m = pt(1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0);
    auto [a8, b8] = m.rates(8);
    CHECK(a8 == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(b8 == doctest::Approx(3.0).epsilon(1e-14));

    CHECK(m.detach(1) == 0.0);
    CHECK(cf(0.5, 0.5, 1.0, 1.0).detach(1) == 0.0);
    CHECK(table({1.0}, {2.0}).detach(1) == 0.0);

    auto t = table({1.0}, {2.0});
    auto [a5, b5] = t.rates(5);
    CHECK(a5 == 1.0);
    CHECK(b5 == 2.0);

    CHECK_THROWS_AS(m.rates(0), domain_error);
}

TEST_CASE("detailed balance weights in log form") {
    auto t = table({1.0}, {2.0});
    auto db = log_detailed_balance(t, 4);
    CHECK(db.log_q[0] == 0.0);
    CHECK(db.log_q[1] == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
    CHECK(db.log_q[2] == doctest::Approx(-2.0 * std::log(2.0)).epsilon(1e-15));
    CHECK(db.log_q[3] == doctest::Approx(-3.0 * std::log(2.0)).epsilon(1e-15));

    // matched rates cancel the recursion
    auto flat = table({3.0}, {3.0});
    auto db2 = log_detailed_balance(flat, 6);
    for (double v : db2.log_q) CHECK(v == 0.0);

    // surface-tension closed form: log Q_i = -(i-1) log zs - sigma (i-1)^mu
    auto m = cf(0.0, 0.5, 1.0, 1.0);
    auto db3 = log_detailed_balance(m, 3);
    CHECK(db3.log_q[1] == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(db3.log_q[2] == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("log detailed balance is reproducible bit for bit") {
    auto m = pt(1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0);
    auto a = log_detailed_balance(m, 2000);
    auto b = log_detailed_balance(m, 2000);
    for (std::size_t i = 0; i < a.log_q.size(); ++i) CHECK(a.log_q[i] == b.log_q[i]);
}

TEST_CASE("detailed balance identity across kinds") {
    for (const auto& m : {pt(1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0), cf(0.5, 0.5, 2.0, 1.5),
                          table({1.0, 2.0, 0.5}, {2.0, 1.0, 3.0})}) {
        const double z = 0.4;
        WeightWalker walk(m, z);
        double lw_prev = walk.log_weight();
        for (std::size_t i = 1; i <= 500; ++i) {
            walk.advance();
            const double lw_next = walk.log_weight();
            // a_i w_1 w_i vs b_{i+1} w_{i+1} in log form
            const double lhs = m.log_attach(i) + std::log(z) + lw_prev;
            const double rhs = m.log_detach(i + 1) + lw_next;
            CHECK(std::abs(std::expm1(lhs - rhs)) < 1e-12);
            lw_prev = lw_next;
        }
    }
}

TEST_CASE("saturation density") {
    CHECK(critical_monomer_density(pt(1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0)).value == 1.0);
    CHECK(critical_monomer_density(pt(1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0)).exact);
    CHECK(critical_monomer_density(table({1.0}, {2.0})).value == doctest::Approx(2.0));
    CHECK(critical_monomer_density(table({1.0}, {1.0})).value == doctest::Approx(1.0));
    CHECK_THROWS_AS(critical_monomer_density(table({1.0, 100.0, 1.0, 100.0, 1.0},
                                                   {100.0, 1.0, 100.0, 1.0, 100.0})),
                    domain_error);
}

TEST_CASE("saturation mass") {
    // geometric table: summand 2i grows without bound
    auto diverging = critical_mass(table({1.0}, {2.0}), 1e-10);
    CHECK(diverging.status == SumStatus::diverged);
    CHECK(!diverging.finite);
    CHECK(std::isinf(diverging.value));

    // surface-tension family: finite, cross-checked by brute force
    auto m = cf(1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0);
    auto rs = critical_mass(m, 1e-10);
    CHECK(rs.status == SumStatus::converged);
    double brute = 0.0;
    for (std::size_t i = 1; i <= 200000; ++i)
        brute += double(i) * std::exp(-std::pow(double(i - 1), 2.0 / 3.0));
    CHECK(rs.value == doctest::Approx(brute).epsilon(1e-9));
}

TEST_CASE("detachment dominance condition at saturation") {
    // alpha = 2(1-mu): the scaled sequence is identically one
    auto crit = delta_condition(pt(2.0 / 3.0, 2.0 / 3.0, 1.0, 1.0), 1, 400);
    for (double v : crit.scaled) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(crit.verdict);

    // alpha < 2(1-mu): scaled sequence decays like k^(-1/6)
    auto sub = delta_condition(pt(1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0), 1, 400);
    CHECK(sub.scaled[99] == doctest::Approx(std::pow(100.0, -1.0 / 6.0)).epsilon(1e-12));
    CHECK(!sub.verdict);

    // above the boundary: growing sequence
    auto sup = delta_condition(pt(1.0, 2.0 / 3.0, 1.0, 1.0), 1, 400);
    CHECK(sup.verdict);
}

TEST_CASE("family asymptotics agree between the two parametrizations") {
    // detachment-to-attachment ratio approaches zs + zs sigma mu i^(mu-1)
    auto m = cf(1.0 / 3.0, 2.0 / 3.0, 1.5, 0.8);
    double prev = kInf;
    for (double i : {1e3, 1e4, 1e5}) {
        const std::size_t k = static_cast<std::size_t>(i);
        const double ratio = m.raw_detach(k) / m.attach(k);
        const double resid =
            std::abs(ratio - m.zs - m.zs * m.sigma * m.mu * std::pow(i, m.mu - 1.0)) /
            std::pow(i, m.mu - 1.0);
        CHECK(resid < prev);
        prev = resid;
    }
    CHECK(prev < 1e-2);
}

TEST_CASE("model json round trip and strictness") {
    nlohmann::json j = {{"kind", "power_law"}, {"alpha", 0.5}, {"mu", 0.5}, {"zs", 2.0}, {"q", 1.0}};
    auto m = model_from_json(j);
    CHECK(m.kind == CoefficientKind::power_law);
    CHECK(model_to_json(m) == j);

    j["extra"] = 1;
    CHECK_THROWS_AS(model_from_json(j), domain_error);

    nlohmann::json bad = {{"kind", "power_law"}, {"alpha", 0.5}, {"mu", 0.5}, {"zs", 2.0},
                          {"q", 1.0},            {"sigma", 1.0}};
    CHECK_THROWS_AS(model_from_json(bad), domain_error);

    nlohmann::json tj = {{"kind", "table"}, {"table_a", {1.0, 2.0}}, {"table_b", {2.0}}};
    auto t = model_from_json(tj);
    CHECK(t.attach(10) == 2.0);
    CHECK(t.detach(10) == 2.0);

    nlohmann::json neg = {{"kind", "table"}, {"table_a", {1.0, -2.0}}, {"table_b", {2.0}}};
    CHECK_THROWS_AS(model_from_json(neg), domain_error);
}
