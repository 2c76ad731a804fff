#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace bd {

/// Dense symmetric matrix in row-major storage, n x n.
struct SymMatrix {
    std::size_t n = 0;
    std::vector<double> a; // row-major

    double& at(std::size_t i, std::size_t j) { return a[i * n + j]; }
    double at(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

/// All eigenvalues (ascending) of a dense symmetric matrix via Householder
/// tridiagonalization and implicit-shift QL.  When vectors != nullptr the
/// columns of *vectors hold the corresponding eigenvectors.
std::vector<double> sym_eigenvalues(SymMatrix a, SymMatrix* vectors = nullptr);

/// Smallest eigenvalue of the symmetric positive semidefinite operator
/// restricted to the orthogonal complement of the unit vector d.  Matrix-free:
/// apply(x, y) writes A x into y.  Uses inverse iteration on the deflated
/// operator P A P + shift d d^T solved by conjugate gradients.  Throws
/// solver_error (with the residual) on non-convergence.
double smallest_eigen_deflated(const std::function<void(const std::vector<double>&,
                                                        std::vector<double>&)>& apply,
                               const std::vector<double>& d_unit, std::size_t n, double shift,
                               double tol, std::vector<double>* eigvec = nullptr);

} // namespace bd
