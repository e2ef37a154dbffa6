#pragma once

#include <cmath>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "coneflow/errors.hpp"
#include "coneflow/grid.hpp"

namespace coneflow {

struct AssemblyOptions {
    // Fault injection for the verification suite: reverses the sign of every angular flux.
    bool flip_angular_flux = false;
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Discrete axisymmetric forms assembled in flux form.
//
// The Laplacian part K is a sum of face terms
//   radial face  (i,j)-(i+1,j):  ω W_j r_{i+1/2}^{N-1} / h_r
//   angular face (i,j)-(i,j+1):  ω w_i r_i^{-2} cos^{N-2}(θ_{j+1/2}) / h_θ
// (w_i, W_j the radial and angular quadrature weights), so K is symmetric by construction.
// The mass form is the diagonal of quadrature weights. Dirichlet rows r = R0, R1 are
// eliminated; the polar faces carry no flux.
//
// Unknowns are the interior rows i = 1..nr-2; the compact index of node (i, j) is
// index(i, j) - ntheta.
class OperatorSet {
public:
    explicit OperatorSet(GridPtr grid, AssemblyOptions opts = {}) : grid_(std::move(grid)), opts_(opts) {
        assemble();
    }

    const AnnulusGrid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    const AssemblyOptions& options() const { return opts_; }

    int unknowns() const { return n_; }
    std::size_t offset() const { return static_cast<std::size_t>(grid_->ntheta()); }

    // Compact interior matrices.
    const SparseMatrix& radial_flux() const { return kr_; }
    const SparseMatrix& angular_flux() const { return ka_; }
    const SparseMatrix& laplace() const { return k_; }
    // Matrix of the H¹ form: K + M.
    const SparseMatrix& system() const { return a_; }
    const Vector& mass_diag() const { return m_; }
    const Vector& inv_r2_diag() const { return m_r2_; }
    const Vector& system_diag() const { return a_diag_; }

    Eigen::Map<const Vector> interior(const Field& u) const {
        check(u);
        return {u.values().data() + offset(), n_};
    }
    Field from_interior(const Vector& x) const {
        Field out(grid_);
        std::copy(x.data(), x.data() + n_, out.values().data() + offset());
        return out;
    }

    // ∫ (∇u·∇v + uv) dx on interior degrees of freedom.
    double stiffness_form(const Field& u, const Field& v) const {
        const auto uc = interior(u);
        const auto vc = interior(v);
        return uc.dot(a_ * vc);
    }
    double laplace_form(const Field& u, const Field& v) const {
        const auto uc = interior(u);
        const auto vc = interior(v);
        return uc.dot(k_ * vc);
    }
    double mass_form(const Field& u, const Field& v) const {
        const auto uc = interior(u);
        const auto vc = interior(v);
        return (uc.array() * m_.array() * vc.array()).sum();
    }
    double inv_r2_form(const Field& u, const Field& v) const {
        const auto uc = interior(u);
        const auto vc = interior(v);
        return (uc.array() * m_r2_.array() * vc.array()).sum();
    }

    // (−Δ_h u) at interior nodes: M^{-1} K u; zero on the Dirichlet rows.
    Field apply_minus_laplacian(const Field& u) const {
        Vector y = k_ * interior(u);
        y.array() /= m_.array();
        return from_interior(y);
    }

    // −Δ_{S^{N-1},h} applied row by row: r_i² M^{-1} K_angular u; zero on the Dirichlet rows.
    Field apply_minus_sphere_laplacian(const Field& u) const {
        Vector y = ka_ * interior(u);
        y.array() /= m_r2_.array();
        return from_interior(y);
    }

    // Coordinate triplets (row col value) of the H¹ system matrix, compact indexing.
    void dump_triplets(std::ostream& os) const {
        os.precision(17);
        for (int k = 0; k < a_.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(a_, k); it; ++it)
                os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }

private:
    void check(const Field& u) const {
        if (u.empty() || !grid_->same_shape(u.grid())) throw GridMismatch("field does not live on operator grid");
    }

    void assemble() {
        const auto& g = *grid_;
        const int nr = g.nr();
        const int nt = g.ntheta();
        const int N = g.params().N;
        const double omega = g.sphere_measure();
        n_ = (nr - 2) * nt;
        auto compact = [&](int i, int j) { return (i - 1) * nt + j; };
        auto interior_row = [&](int i) { return i >= 1 && i <= nr - 2; };

        std::vector<Eigen::Triplet<double>> tr, ta;
        tr.reserve(static_cast<std::size_t>(n_) * 3);
        ta.reserve(static_cast<std::size_t>(n_) * 3);

        for (int i = 0; i + 1 < nr; ++i) {
            const double rmid = 0.5 * (g.r(i) + g.r(i + 1));
            const double face = omega * std::pow(rmid, N - 1) / g.hr();
            for (int j = 0; j < nt; ++j) {
                const double kappa = face * g.angular_weights()[j];
                const bool a = interior_row(i), b = interior_row(i + 1);
                if (a) tr.emplace_back(compact(i, j), compact(i, j), kappa);
                if (b) tr.emplace_back(compact(i + 1, j), compact(i + 1, j), kappa);
                if (a && b) {
                    tr.emplace_back(compact(i, j), compact(i + 1, j), -kappa);
                    tr.emplace_back(compact(i + 1, j), compact(i, j), -kappa);
                }
            }
        }

        const double sign = opts_.flip_angular_flux ? -1.0 : 1.0;
        for (int i = 1; i + 1 < nr; ++i) {
            const double row = sign * omega * g.radial_weights()[i] / (g.r(i) * g.r(i)) / g.htheta();
            for (int j = 0; j + 1 < nt; ++j) {
                // Nodes are exactly mirrored, so the face weights are too.
                const double tface = 0.5 * (g.theta(j) + g.theta(j + 1));
                const double kappa = row * std::pow(std::cos(tface), N - 2);
                ta.emplace_back(compact(i, j), compact(i, j), kappa);
                ta.emplace_back(compact(i, j + 1), compact(i, j + 1), kappa);
                ta.emplace_back(compact(i, j), compact(i, j + 1), -kappa);
                ta.emplace_back(compact(i, j + 1), compact(i, j), -kappa);
            }
        }

        kr_.resize(n_, n_);
        ka_.resize(n_, n_);
        kr_.setFromTriplets(tr.begin(), tr.end());
        ka_.setFromTriplets(ta.begin(), ta.end());
        k_ = kr_ + ka_;

        m_.resize(n_);
        m_r2_.resize(n_);
        for (int i = 1; i + 1 < nr; ++i)
            for (int j = 0; j < nt; ++j) {
                const double w = g.quad_weights()[g.index(i, j)];
                m_[compact(i, j)] = w;
                m_r2_[compact(i, j)] = w / (g.r(i) * g.r(i));
            }

        SparseMatrix mass(n_, n_);
        std::vector<Eigen::Triplet<double>> tm;
        tm.reserve(n_);
        for (int k = 0; k < n_; ++k) tm.emplace_back(k, k, m_[k]);
        mass.setFromTriplets(tm.begin(), tm.end());
        a_ = k_ + mass;
        a_.makeCompressed();
        a_diag_ = a_.diagonal();
    }

    GridPtr grid_;
    AssemblyOptions opts_;
    int n_ = 0;
    SparseMatrix kr_, ka_, k_, a_;
    Vector m_, m_r2_, a_diag_;
};

inline OperatorSet assemble(GridPtr grid, AssemblyOptions opts = {}) { return OperatorSet(std::move(grid), opts); }

// ‖u‖²_{H¹}; u must vanish on r ∈ {R0, R1}.
inline double h1_norm_sq(const OperatorSet& ops, const Field& u) {
    if (u.max_boundary_abs() != 0.0)
        throw ValidationError("h1_norm_sq: field has nonzero values on the Dirichlet boundary");
    return ops.stiffness_form(u, u);
}

// ∂_θ u: centered differences inside, second-order one-sided at θ = ±π/2.
inline Field apply_dtheta(const Field& u) {
    const auto& g = u.grid();
    const int nt = g.ntheta();
    const double h = g.htheta();
    Field out(u.grid_ptr());
    for (int i = 0; i < g.nr(); ++i) {
        out(i, 0) = (-3.0 * u(i, 0) + 4.0 * u(i, 1) - u(i, 2)) / (2.0 * h);
        for (int j = 1; j + 1 < nt; ++j) out(i, j) = (u(i, j + 1) - u(i, j - 1)) / (2.0 * h);
        out(i, nt - 1) = (3.0 * u(i, nt - 1) - 4.0 * u(i, nt - 2) + u(i, nt - 3)) / (2.0 * h);
    }
    return out;
}

inline Field apply_dtheta(const OperatorSet&, const Field& u) { return apply_dtheta(u); }

} // namespace coneflow
