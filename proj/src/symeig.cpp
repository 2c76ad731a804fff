#include "bd/symeig.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "bd/errors.hpp"

namespace bd {

namespace {

double hypot2(double a, double b) { return std::sqrt(a * a + b * b); }

// Householder reduction to tridiagonal form; d gets the diagonal, e the
// subdiagonal (e[0] unused).  When accumulate is true the transform is
// accumulated in a so eigenvectors can be recovered.
void tridiagonalize(SymMatrix& a, std::vector<double>& d, std::vector<double>& e,
                    bool accumulate) {
    const std::size_t n = a.n;
    d.assign(n, 0.0);
    e.assign(n, 0.0);
    for (std::size_t i = n - 1; i >= 1; --i) {
        std::size_t l = i - 1;
        double h = 0.0, scale = 0.0;
        if (l > 0) {
            for (std::size_t k = 0; k <= l; ++k) scale += std::abs(a.at(i, k));
            if (scale == 0.0) {
                e[i] = a.at(i, l);
            } else {
                for (std::size_t k = 0; k <= l; ++k) {
                    a.at(i, k) /= scale;
                    h += a.at(i, k) * a.at(i, k);
                }
                double f = a.at(i, l);
                double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
                e[i] = scale * g;
                h -= f * g;
                a.at(i, l) = f - g;
                f = 0.0;
                for (std::size_t j = 0; j <= l; ++j) {
                    if (accumulate) a.at(j, i) = a.at(i, j) / h;
                    g = 0.0;
                    for (std::size_t k = 0; k <= j; ++k) g += a.at(j, k) * a.at(i, k);
                    for (std::size_t k = j + 1; k <= l; ++k) g += a.at(k, j) * a.at(i, k);
                    e[j] = g / h;
                    f += e[j] * a.at(i, j);
                }
                const double hh = f / (h + h);
                for (std::size_t j = 0; j <= l; ++j) {
                    f = a.at(i, j);
                    e[j] = g = e[j] - hh * f;
                    for (std::size_t k = 0; k <= j; ++k)
                        a.at(j, k) -= f * e[k] + g * a.at(i, k);
                }
            }
        } else {
            e[i] = a.at(i, l);
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    if (accumulate) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t l = i;
            if (d[i] != 0.0) {
                for (std::size_t j = 0; j < l; ++j) {
                    double g = 0.0;
                    for (std::size_t k = 0; k < l; ++k) g += a.at(i, k) * a.at(k, j);
                    for (std::size_t k = 0; k < l; ++k) a.at(k, j) -= g * a.at(k, i);
                }
            }
            d[i] = a.at(i, i);
            a.at(i, i) = 1.0;
            for (std::size_t j = 0; j < l; ++j) a.at(j, i) = a.at(i, j) = 0.0;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) d[i] = a.at(i, i);
    }
}

// Implicit-shift QL on a tridiagonal matrix; z accumulates rotations when
// not null (columns become eigenvectors).
void ql_implicit(std::vector<double>& d, std::vector<double>& e, SymMatrix* z) {
    const std::size_t n = d.size();
    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= 1e-300 + std::numeric_limits<double>::epsilon() * dd) break;
            }
            if (m != l) {
                if (++iter == 60) throw solver_error("sym_eigenvalues: QL did not converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = hypot2(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
                double s = 1.0, c = 1.0, p = 0.0;
                for (std::size_t i = m; i >= l + 1; --i) {
                    double f = s * e[i - 1];
                    const double b = c * e[i - 1];
                    r = hypot2(f, g);
                    e[i] = r;
                    if (r == 0.0) {
                        d[i] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i] - p;
                    r = (d[i - 1] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i] = g + p;
                    g = c * r - b;
                    if (z) {
                        for (std::size_t k = 0; k < n; ++k) {
                            f = z->at(k, i);
                            z->at(k, i) = s * z->at(k, i - 1) + c * f;
                            z->at(k, i - 1) = c * z->at(k, i - 1) - s * f;
                        }
                    }
                    if (i == l + 1) break;
                }
                if (r == 0.0 && m - l > 1) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

} // namespace

std::vector<double> sym_eigenvalues(SymMatrix a, SymMatrix* vectors) {
    if (a.n == 0) return {};
    if (a.n == 1) {
        if (vectors) *vectors = SymMatrix{1, {1.0}};
        return {a.a[0]};
    }
    std::vector<double> d, e;
    tridiagonalize(a, d, e, vectors != nullptr);
    ql_implicit(d, e, vectors ? &a : nullptr);
    if (vectors) {
        // sort eigenpairs ascending
        std::vector<std::size_t> idx(d.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return d[i] < d[j]; });
        SymMatrix v;
        v.n = a.n;
        v.a.resize(a.n * a.n);
        std::vector<double> ds(d.size());
        for (std::size_t c = 0; c < idx.size(); ++c) {
            ds[c] = d[idx[c]];
            for (std::size_t r = 0; r < a.n; ++r) v.at(r, c) = a.at(r, idx[c]);
        }
        *vectors = std::move(v);
        return ds;
    }
    std::sort(d.begin(), d.end());
    return d;
}

double smallest_eigen_deflated(const std::function<void(const std::vector<double>&,
                                                        std::vector<double>&)>& apply,
                               const std::vector<double>& d_unit, std::size_t n, double shift,
                               double tol, std::vector<double>* eigvec) {
    auto project = [&](std::vector<double>& x) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += d_unit[i] * x[i];
        for (std::size_t i = 0; i < n; ++i) x[i] -= dot * d_unit[i];
    };
    // deflated operator M = P A P + shift * d d^T
    std::vector<double> tmp(n);
    auto apply_m = [&](const std::vector<double>& x, std::vector<double>& y) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += d_unit[i] * x[i];
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] - dot * d_unit[i];
        apply(tmp, y);
        project(y);
        for (std::size_t i = 0; i < n; ++i) y[i] += shift * dot * d_unit[i];
    };
    auto cg_solve = [&](const std::vector<double>& b, std::vector<double>& x) {
        x.assign(n, 0.0);
        std::vector<double> r = b, p = b, ap(n);
        double rs = std::inner_product(r.begin(), r.end(), r.begin(), 0.0);
        const double b2 = rs;
        for (std::size_t it = 0; it < 20 * n + 200; ++it) {
            if (rs <= 1e-24 * b2) return true;
            apply_m(p, ap);
            const double pap = std::inner_product(p.begin(), p.end(), ap.begin(), 0.0);
            if (!(pap > 0.0)) return false;
            const double alpha = rs / pap;
            for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
            for (std::size_t i = 0; i < n; ++i) r[i] -= alpha * ap[i];
            const double rs_new = std::inner_product(r.begin(), r.end(), r.begin(), 0.0);
            const double beta = rs_new / rs;
            rs = rs_new;
            for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
        }
        return rs <= 1e-16 * b2;
    };

    // deterministic start vector, orthogonal to d
    std::vector<double> v(n), av(n);
    unsigned long long s = 0x9e3779b97f4a7c15ull;
    for (std::size_t i = 0; i < n; ++i) {
        s ^= s << 13; s ^= s >> 7; s ^= s << 17;
        v[i] = static_cast<double>(s >> 11) / 9007199254740992.0 - 0.5;
    }
    project(v);
    double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (auto& x : v) x /= norm;

    double lambda = 0.0, lambda_prev = std::numeric_limits<double>::infinity();
    std::vector<double> next(n);
    for (int it = 0; it < 500; ++it) {
        if (!cg_solve(v, next))
            throw solver_error("smallest_eigen_deflated: inner CG solve failed");
        project(next);
        norm = std::sqrt(std::inner_product(next.begin(), next.end(), next.begin(), 0.0));
        if (!(norm > 0.0)) throw solver_error("smallest_eigen_deflated: iterate vanished");
        for (std::size_t i = 0; i < n; ++i) next[i] /= norm;
        apply_m(next, av);
        lambda = std::inner_product(next.begin(), next.end(), av.begin(), 0.0);
        v = next;
        if (std::abs(lambda - lambda_prev) <= tol * std::max(1.0, std::abs(lambda))) {
            if (eigvec) *eigvec = v;
            return lambda;
        }
        lambda_prev = lambda;
    }
    std::ostringstream os;
    os << "smallest_eigen_deflated: no convergence, last drift "
       << std::abs(lambda - lambda_prev);
    throw solver_error(os.str());
}

} // namespace bd
