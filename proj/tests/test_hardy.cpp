#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "bd/hardy.hpp"

using namespace bd;

TEST_CASE("matched geometric weights approach four") {
    std::vector<double> mu(64), nu(64);
    for (std::size_t i = 1; i <= 64; ++i) mu[i - 1] = nu[i - 1] = std::pow(2.0, -double(i));
    // with the exact remainder folded in, the running product is 4 - 2^(2-k)
    auto hb = hardy_bracket(mu, nu, 64, std::pow(2.0, -64.0));
    CHECK(hb.b == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(hb.witness_ratio >= hb.b * (1.0 - 1e-12));

    // truncated weights instead: the supremum moves inside and drops below 4
    auto ht = hardy_bracket(mu, nu, 64);
    CHECK(ht.b < 4.0);
    CHECK(ht.b > 4.0 - 1e-8);
    CHECK(ht.witness_ratio >= ht.b * (1.0 - 1e-12));
}

TEST_CASE("shifted equilibrium pair reproduces the gap quantity") {
    // weights of the geometric model at unit density: w_i = 2^(1-i)
    const std::size_t len = 200;
    std::vector<double> mu(len), nu(len);
    for (std::size_t i = 1; i <= len; ++i) {
        mu[i - 1] = std::pow(2.0, -double(i));      // w_{i+1}
        nu[i - 1] = std::pow(2.0, 1.0 - double(i)); // a_i w_i
    }
    const double mu_tail = std::pow(2.0, -double(len)); // exact geometric remainder
    auto hb = hardy_bracket(mu, nu, len, mu_tail);
    CHECK(hb.b == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(hb.witness_ratio >= hb.b * (1.0 - 1e-12));
}

TEST_CASE("bracket property on random weights") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int pair = 0; pair < 20; ++pair) {
        const std::size_t len = 80;
        std::vector<double> mu(len), nu(len);
        double decay = 0.5 + 0.4 * u(rng);
        for (std::size_t i = 0; i < len; ++i) {
            mu[i] = u(rng) * std::pow(decay, double(i));
            nu[i] = u(rng);
        }
        auto hb = hardy_bracket(mu, nu, len);
        CHECK(hb.witness_ratio >= hb.b * (1.0 - 1e-9));

        // inequality with constant 4B on random sequences
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> f(len);
            for (auto& v : f) v = u(rng) - 0.5;
            double lhs = 0.0, partial = 0.0, rhs = 0.0;
            for (std::size_t i = 0; i < len; ++i) {
                partial += f[i];
                lhs += mu[i] * partial * partial;
                rhs += nu[i] * f[i] * f[i];
            }
            CHECK(lhs <= 4.0 * hb.b * rhs * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("input validation") {
    CHECK_THROWS_AS(hardy_bracket({}, {}, 1), domain_error);
    CHECK_THROWS_AS(hardy_bracket({1.0}, {1.0, 2.0}, 1), domain_error);
    CHECK_THROWS_AS(hardy_bracket({1.0, -1.0}, {1.0, 1.0}, 2), domain_error);
}
