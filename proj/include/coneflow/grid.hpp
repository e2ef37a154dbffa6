#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "coneflow/errors.hpp"
#include "coneflow/params.hpp"

namespace coneflow {

// How the angular quadrature weights were built.
enum class AngularRule {
    clenshaw_curtis, // exact for cosine polynomials up to degree ntheta-1 in φ = θ + π/2
    cell_volume      // exact integral of cos^{N-2} over each dual cell
};

namespace detail {

// Surface measure of the unit (N-2)-sphere: 2 π^{(N-1)/2} / Γ((N-1)/2).
inline double sphere_measure(int N) {
    const double k = 0.5 * (N - 1);
    return 2.0 * std::pow(std::numbers::pi, k) / std::tgamma(k);
}

// Antiderivative of cos^m on [0, x], by the usual reduction formula.
inline double cos_power_antiderivative(int m, double x) {
    if (m == 0) return x;
    if (m == 1) return std::sin(x);
    return std::pow(std::cos(x), m - 1) * std::sin(x) / m +
           (m - 1.0) / m * cos_power_antiderivative(m - 2, x);
}

// Weights w_j with Σ_j w_j g(θ_j) = ∫_{-π/2}^{π/2} g cos^m for every g whose
// φ-profile (φ = θ + π/2) is a cosine polynomial of degree ≤ n = ntheta - 1.
// Moments μ_k = ∫_0^π cos(kφ) sin^m φ dφ satisfy μ_{k+2} = μ_k (k - m)/(k + m + 2).
inline std::vector<double> clenshaw_curtis_weights(int m, int ntheta) {
    const int n = ntheta - 1;
    std::vector<double> mu(static_cast<std::size_t>(n) + 1, 0.0);
    double wallis = (m % 2 == 0) ? std::numbers::pi : 2.0;
    for (int q = m % 2 + 2; q <= m; q += 2) wallis *= (q - 1.0) / q;
    mu[0] = wallis;
    for (int k = 0; k + 2 <= n; k += 2) mu[k + 2] = mu[k] * (k - m) / (k + m + 2.0);

    std::vector<double> w(static_cast<std::size_t>(ntheta), 0.0);
    const int center = n / 2;
    for (int j = 0; j <= center; ++j) {
        const double phi = std::numbers::pi * j / n;
        double s = 0.0;
        for (int k = 0; k <= n; k += 2) {
            const double c = (k == 0 || k == n) ? 0.5 : 1.0;
            s += c * mu[k] * std::cos(k * phi);
        }
        const double cj = (j == 0) ? 0.5 : 1.0;
        w[j] = 2.0 / n * cj * s;
        w[n - j] = w[j];
    }
    return w;
}

inline std::vector<double> cell_volume_weights(int m, std::span<const double> theta, double h) {
    const std::size_t n = theta.size();
    std::vector<double> w(n, 0.0);
    const double half_pi = 0.5 * std::numbers::pi;
    for (std::size_t j = 0; j <= (n - 1) / 2; ++j) {
        const double t = std::abs(theta[j]);
        const double lo = std::max(0.0, t - 0.5 * h);
        const double hi = std::min(half_pi, t + 0.5 * h);
        double v = cos_power_antiderivative(m, hi) - cos_power_antiderivative(m, lo);
        if (t == 0.0) v *= 2.0; // the central cell straddles θ = 0
        w[j] = v;
        w[n - 1 - j] = v;
    }
    return w;
}

} // namespace detail

// Tensor grid on [R0, R1] x [-π/2, π/2] in the axisymmetric chart (r, θ), with
// quadrature weights realising ∫_A f dx = ω_{N-2} ∫∫ f r^{N-1} cos^{N-2}θ dθ dr.
// Node (i, j) is stored at i * ntheta + j.
class AnnulusGrid {
public:
    AnnulusGrid(const ProblemParams& params, int nr, int ntheta) : params_(params), nr_(nr), ntheta_(ntheta) {
        params_.validate();
        CONEFLOW_REQUIRE(nr >= 3, "nr must be >= 3 (got " + std::to_string(nr) + ")");
        CONEFLOW_REQUIRE(ntheta >= 3, "ntheta must be >= 3 (got " + std::to_string(ntheta) + ")");
        CONEFLOW_REQUIRE(ntheta % 2 == 1, "ntheta must be odd so that θ = 0 is a node (got " +
                                              std::to_string(ntheta) + ")");
        const int N = params_.N;
        hr_ = (params_.R1 - params_.R0) / (nr - 1);
        htheta_ = std::numbers::pi / (ntheta - 1);

        r_.resize(nr);
        for (int i = 0; i < nr; ++i) r_[i] = params_.R0 + i * hr_;
        r_.front() = params_.R0;
        r_.back() = params_.R1;

        // Exactly mirror-symmetric angular nodes.
        theta_.resize(ntheta);
        const int c = center();
        for (int j = 0; j <= c; ++j) {
            const double t = (j == 0) ? -0.5 * std::numbers::pi : -(c - j) * htheta_;
            theta_[j] = t;
            theta_[ntheta - 1 - j] = -t;
        }
        theta_[c] = 0.0;

        radial_weights_.resize(nr);
        for (int i = 0; i < nr; ++i) {
            const double end = (i == 0 || i == nr - 1) ? 0.5 : 1.0;
            radial_weights_[i] = end * hr_ * std::pow(r_[i], N - 1);
        }

        angular_weights_ = detail::clenshaw_curtis_weights(N - 2, ntheta);
        rule_ = AngularRule::clenshaw_curtis;
        if (std::any_of(angular_weights_.begin(), angular_weights_.end(), [](double w) { return !(w > 0.0); })) {
            angular_weights_ = detail::cell_volume_weights(N - 2, theta_, htheta_);
            rule_ = AngularRule::cell_volume;
        }

        omega_ = detail::sphere_measure(N);
        quad_.resize(static_cast<std::size_t>(nr) * ntheta);
        for (int i = 0; i < nr; ++i)
            for (int j = 0; j < ntheta; ++j) quad_[index(i, j)] = omega_ * radial_weights_[i] * angular_weights_[j];
    }

    const ProblemParams& params() const { return params_; }
    int nr() const { return nr_; }
    int ntheta() const { return ntheta_; }
    std::size_t size() const { return static_cast<std::size_t>(nr_) * ntheta_; }
    int center() const { return (ntheta_ - 1) / 2; }
    double hr() const { return hr_; }
    double htheta() const { return htheta_; }
    double r(int i) const { return r_[i]; }
    double theta(int j) const { return theta_[j]; }
    std::span<const double> r_nodes() const { return r_; }
    std::span<const double> theta_nodes() const { return theta_; }

    // Trapezoid weights h * r_i^{N-1} (halved at the ends).
    std::span<const double> radial_weights() const { return radial_weights_; }
    // Weights for ∫ g(θ) cos^{N-2}θ dθ.
    std::span<const double> angular_weights() const { return angular_weights_; }
    AngularRule angular_rule() const { return rule_; }
    double sphere_measure() const { return omega_; }
    std::span<const double> quad_weights() const { return quad_; }

    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * ntheta_ + j; }
    bool is_boundary_row(int i) const { return i == 0 || i == nr_ - 1; }

    // |A| = ω_{N-1} (R1^N - R0^N) / N.
    double exact_volume() const {
        const int N = params_.N;
        return detail::sphere_measure(N + 1) * (std::pow(params_.R1, N) - std::pow(params_.R0, N)) / N;
    }

    bool same_shape(const AnnulusGrid& o) const {
        return nr_ == o.nr_ && ntheta_ == o.ntheta_ && params_.N == o.params_.N && params_.R0 == o.params_.R0 &&
               params_.R1 == o.params_.R1;
    }

private:
    ProblemParams params_;
    int nr_;
    int ntheta_;
    double hr_ = 0.0;
    double htheta_ = 0.0;
    std::vector<double> r_;
    std::vector<double> theta_;
    std::vector<double> radial_weights_;
    std::vector<double> angular_weights_;
    AngularRule rule_ = AngularRule::clenshaw_curtis;
    double omega_ = 0.0;
    std::vector<double> quad_;
};

using GridPtr = std::shared_ptr<const AnnulusGrid>;

inline GridPtr build_grid(const ProblemParams& params, int nr, int ntheta) {
    return std::make_shared<const AnnulusGrid>(params, nr, ntheta);
}

// Axially symmetric function sampled at the grid nodes.
class Field {
public:
    Field() = default;
    explicit Field(GridPtr grid) : grid_(std::move(grid)), values_(grid_->size(), 0.0) {}
    Field(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
        if (values_.size() != grid_->size())
            throw GridMismatch("field has " + std::to_string(values_.size()) + " values, grid has " +
                               std::to_string(grid_->size()) + " nodes");
    }

    template <class F>
    static Field from_function(GridPtr grid, F&& f) {
        Field out(grid);
        for (int i = 0; i < grid->nr(); ++i)
            for (int j = 0; j < grid->ntheta(); ++j) out(i, j) = f(grid->r(i), grid->theta(j));
        return out;
    }

    const AnnulusGrid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    bool empty() const { return !grid_; }
    std::size_t size() const { return values_.size(); }

    double operator()(int i, int j) const { return values_[grid_->index(i, j)]; }
    double& operator()(int i, int j) { return values_[grid_->index(i, j)]; }
    double operator[](std::size_t k) const { return values_[k]; }
    double& operator[](std::size_t k) { return values_[k]; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    const std::vector<double>& data() const { return values_; }

    bool same_grid(const Field& o) const {
        return grid_ && o.grid_ && (grid_ == o.grid_ || grid_->same_shape(*o.grid_));
    }
    void require_same_grid(const Field& o) const {
        if (!same_grid(o)) throw GridMismatch("fields live on different grids");
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }
    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }
    double max_boundary_abs() const {
        double m = 0.0;
        for (int j = 0; j < grid_->ntheta(); ++j)
            m = std::max({m, std::abs((*this)(0, j)), std::abs((*this)(grid_->nr() - 1, j))});
        return m;
    }
    void zero_boundary() {
        for (int j = 0; j < grid_->ntheta(); ++j) (*this)(0, j) = (*this)(grid_->nr() - 1, j) = 0.0;
    }

    Field& operator+=(const Field& o) {
        require_same_grid(o);
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
        return *this;
    }
    Field& operator-=(const Field& o) {
        require_same_grid(o);
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
        return *this;
    }
    Field& operator*=(double s) {
        for (double& v : values_) v *= s;
        return *this;
    }
    // this += s * o
    Field& axpy(double s, const Field& o) {
        require_same_grid(o);
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += s * o.values_[k];
        return *this;
    }

    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(double s, Field a) { return a *= s; }
    friend Field operator*(Field a, double s) { return a *= s; }

private:
    GridPtr grid_;
    std::vector<double> values_;
};

// Σ quad_weights · values, summed in storage order.
inline double integrate(const AnnulusGrid& grid, const Field& f) {
    if (f.empty() || !grid.same_shape(f.grid())) throw GridMismatch("integrate: field does not live on grid");
    const auto w = grid.quad_weights();
    const auto v = f.values();
    double s = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) s += w[k] * v[k];
    return s;
}

inline double integrate(const Field& f) { return integrate(f.grid(), f); }

} // namespace coneflow
