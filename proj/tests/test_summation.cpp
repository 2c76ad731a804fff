#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bd/summation.hpp"

using namespace bd;

TEST_CASE("log_add_exp basics") {
    CHECK(log_add_exp(-kInf, 0.0) == 0.0);
    CHECK(log_add_exp(0.0, 0.0) == doctest::Approx(std::log(2.0)));
    CHECK(log_add_exp(700.0, 690.0) ==
          doctest::Approx(700.0 + std::log1p(std::exp(-10.0))));
}

TEST_CASE("geometric series converges with certified tail") {
    SumOptions opts;
    opts.tol = 1e-14;
    auto res = sum_positive_series([](std::size_t i) { return std::pow(2.0, 1.0 - double(i)); },
                                   [](std::size_t) { return 0.5; }, opts);
    CHECK(res.status == SumStatus::converged);
    CHECK(res.value + res.tail_bound >= 2.0 - 1e-12);
    CHECK(res.value <= 2.0);
    CHECK(res.tail_bound <= 1e-13);
}

TEST_CASE("linear growth is declared divergent") {
    SumOptions opts;
    auto res = sum_positive_series([](std::size_t i) { return 2.0 * double(i); },
                                   [](std::size_t) { return kInf; }, opts);
    CHECK(res.status == SumStatus::diverged);
}

TEST_CASE("slowly decaying series without a ratio cap is indeterminate") {
    SumOptions opts;
    opts.max_terms = 10000;
    auto res = sum_positive_series([](std::size_t i) { return 1.0 / (double(i) * double(i)); },
                                   [](std::size_t) { return kInf; }, opts);
    CHECK(res.status == SumStatus::indeterminate);
}

TEST_CASE("stretched tail bound dominates the true tail") {
    // weights exp(-3 j^(2/3)); increments 3((j+1)^(2/3)-j^(2/3)) >= 2 (j+1)^(-1/3)
    const double mu = 2.0 / 3.0;
    const double c = 2.0;
    const std::size_t K = 50;
    double true_tail = 0.0;
    for (std::size_t j = K + 1; j <= 4000; ++j)
        true_tail += double(j) * std::exp(-3.0 * std::pow(double(j), mu));
    const double log_w_K1 = -3.0 * std::pow(double(K + 1), mu);
    const double bound = stretched_tail_bound(log_w_K1, K, 1, c, mu);
    CHECK(bound >= true_tail);
    CHECK(bound < kInf);
    CHECK(bound <= 1e4 * true_tail); // not wildly loose
}
