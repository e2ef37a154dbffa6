#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "coneflow/errors.hpp"

namespace coneflow {

struct CgResult {
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
};

// Jacobi-preconditioned conjugate gradients for a symmetric positive definite A.
// Stops when sqrt(rᵀD⁻¹r) ≤ tol · sqrt(bᵀD⁻¹b), i.e. in the norm induced by the
// preconditioner rather than the Euclidean one. x holds the initial guess on entry.
template <class Matrix>
CgResult pcg_jacobi(const Matrix& A, const Eigen::VectorXd& diag, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                    double tol, int max_iterations) {
    CgResult res;
    const Eigen::VectorXd inv_d = diag.cwiseInverse();
    const double bnorm = std::sqrt(b.dot(inv_d.cwiseProduct(b)));
    if (bnorm == 0.0) {
        x.setZero();
        res.converged = true;
        return res;
    }
    Eigen::VectorXd r = b - A * x;
    Eigen::VectorXd z = inv_d.cwiseProduct(r);
    double rz = r.dot(z);
    res.relative_residual = std::sqrt(std::abs(rz)) / bnorm;
    if (res.relative_residual <= tol) {
        res.converged = true;
        return res;
    }
    Eigen::VectorXd p = z;
    Eigen::VectorXd q(x.size());
    for (int it = 1; it <= max_iterations; ++it) {
        q.noalias() = A * p;
        const double alpha = rz / p.dot(q);
        x.noalias() += alpha * p;
        r.noalias() -= alpha * q;
        z = inv_d.cwiseProduct(r);
        const double rz_new = r.dot(z);
        res.iterations = it;
        res.relative_residual = std::sqrt(std::abs(rz_new)) / bnorm;
        if (res.relative_residual <= tol) {
            res.converged = true;
            return res;
        }
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    return res;
}

// Iteration cap 10 · sqrt(n) · log(1/tol).
inline int cg_iteration_cap(std::size_t unknowns, double tol) {
    const double cap = 10.0 * std::sqrt(static_cast<double>(unknowns)) * std::log(1.0 / tol);
    return std::max(50, static_cast<int>(std::ceil(cap)));
}

// Symmetric tridiagonal matrix: diag[0..n), off[0..n-1) couples k and k+1.
struct Tridiagonal {
    std::vector<double> diag;
    std::vector<double> off;

    std::size_t size() const { return diag.size(); }

    std::vector<double> apply(const std::vector<double>& x) const {
        const std::size_t n = diag.size();
        std::vector<double> y(n);
        for (std::size_t k = 0; k < n; ++k) {
            double s = diag[k] * x[k];
            if (k > 0) s += off[k - 1] * x[k - 1];
            if (k + 1 < n) s += off[k] * x[k + 1];
            y[k] = s;
        }
        return y;
    }

    // Number of eigenvalues of (this - shift * D) below zero, D = diag(d) > 0,
    // from the signs of the LDLᵀ pivots (Sylvester's law of inertia).
    int count_below(double shift, const std::vector<double>& d) const {
        int neg = 0;
        double pivot = 1.0;
        for (std::size_t k = 0; k < diag.size(); ++k) {
            const double a = diag[k] - shift * d[k];
            pivot = (k == 0) ? a : a - off[k - 1] * off[k - 1] / pivot;
            if (pivot == 0.0) pivot = 1e-300;
            if (pivot < 0.0) ++neg;
        }
        return neg;
    }
};

// Solves a (possibly indefinite) tridiagonal system by Gaussian elimination with partial
// pivoting; the matrix is given by its three diagonals.
inline std::vector<double> solve_tridiagonal(std::vector<double> sub, std::vector<double> diag,
                                              std::vector<double> super, std::vector<double> rhs) {
    const std::size_t n = diag.size();
    if (n == 0) return {};
    std::vector<double> super2(n, 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        if (std::abs(sub[k]) > std::abs(diag[k])) {
            // Swap rows k and k+1.
            std::swap(diag[k], sub[k]);
            std::swap(super[k], diag[k + 1]);
            if (k + 2 < n) std::swap(super2[k], super[k + 1]);
            std::swap(rhs[k], rhs[k + 1]);
        }
        if (diag[k] == 0.0) throw SolverError("singular tridiagonal system");
        const double m = sub[k] / diag[k];
        diag[k + 1] -= m * super[k];
        if (k + 2 < n) super[k + 1] -= m * super2[k];
        rhs[k + 1] -= m * rhs[k];
    }
    if (diag[n - 1] == 0.0) throw SolverError("singular tridiagonal system");
    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    if (n >= 2) x[n - 2] = (rhs[n - 2] - super[n - 2] * x[n - 1]) / diag[n - 2];
    if (n >= 3)
        for (std::size_t k = n - 2; k-- > 0;) x[k] = (rhs[k] - super[k] * x[k + 1] - super2[k] * x[k + 2]) / diag[k];
    return x;
}

inline std::vector<double> solve_tridiagonal(const Tridiagonal& t, std::vector<double> rhs) {
    return solve_tridiagonal(t.off, t.diag, t.off, std::move(rhs));
}

} // namespace coneflow
