#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "bd/symeig.hpp"

using namespace bd;

namespace {

SymMatrix random_sym(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SymMatrix a;
    a.n = n;
    a.a.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const double v = u(rng);
            a.at(i, j) = v;
            a.at(j, i) = v;
        }
    return a;
}

} // namespace

TEST_CASE("two by two") {
    SymMatrix a{2, {2.0, 1.0, 1.0, 2.0}};
    auto ev = sym_eigenvalues(a);
    CHECK(ev[0] == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(ev[1] == doctest::Approx(3.0).epsilon(1e-13));
}

TEST_CASE("random spectral decompositions are consistent") {
    std::mt19937_64 rng(3);
    for (std::size_t n : {5u, 23u, 60u}) {
        SymMatrix a = random_sym(rng, n);
        SymMatrix copy = a;
        SymMatrix vecs;
        auto ev = sym_eigenvalues(copy, &vecs);
        REQUIRE(ev.size() == n);
        for (std::size_t k = 0; k + 1 < n; ++k) CHECK(ev[k] <= ev[k + 1] + 1e-12);
        // residuals and orthonormality
        double trace = 0.0;
        for (std::size_t i = 0; i < n; ++i) trace += a.at(i, i);
        double ev_sum = 0.0;
        for (double v : ev) ev_sum += v;
        CHECK(ev_sum == doctest::Approx(trace).epsilon(1e-10));
        for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += a.at(i, j) * vecs.at(j, k);
                CHECK(acc == doctest::Approx(ev[k] * vecs.at(i, k)).epsilon(1e-8).scale(1.0));
            }
            double norm = 0.0;
            for (std::size_t i = 0; i < n; ++i) norm += vecs.at(i, k) * vecs.at(i, k);
            CHECK(norm == doctest::Approx(1.0).epsilon(1e-10));
        }
    }
}

TEST_CASE("deflated smallest eigenvalue matches the dense route") {
    std::mt19937_64 rng(17);
    const std::size_t n = 40;
    // positive semidefinite with a known deflation direction
    SymMatrix b = random_sym(rng, n);
    SymMatrix a;
    a.n = n;
    a.a.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) acc += b.at(k, i) * b.at(k, j);
            a.at(i, j) = acc;
        }
    std::vector<double> d(n);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double norm = 0.0;
    for (auto& v : d) {
        v = u(rng);
        norm += v * v;
    }
    for (auto& v : d) v /= std::sqrt(norm);

    const double shift = 1e3;
    // dense: P A P + shift d d^T
    SymMatrix m = a;
    std::vector<double> ad(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) ad[i] += a.at(i, j) * d[j];
    double dad = 0.0;
    for (std::size_t i = 0; i < n; ++i) dad += d[i] * ad[i];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            m.at(i, j) += -d[i] * ad[j] - ad[i] * d[j] + (dad + shift) * d[i] * d[j];
    const double dense = sym_eigenvalues(m).front();

    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        y.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) y[i] += a.at(i, j) * x[j];
    };
    const double iter = smallest_eigen_deflated(apply, d, n, shift, 1e-12);
    CHECK(iter == doctest::Approx(dense).epsilon(1e-7));
}
