#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coneflow/cone.hpp"
#include "coneflow/energy.hpp"
#include "coneflow/flow.hpp"
#include "coneflow/grid.hpp"
#include "coneflow/operators.hpp"
#include "coneflow/radial.hpp"
#include "coneflow/resolvent.hpp"
#include "coneflow/spectral.hpp"

namespace coneflow {

struct VerifyContext {
    ProblemParams params{};
    int nr = 33;
    int ntheta = 33;
    int n1d = 129;
    std::uint64_t seed = 1;
    AssemblyOptions assembly{};
};

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

namespace verify_detail {

inline std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", x);
    return buf;
}

inline double order(double e_coarse, double e_fine) { return std::log2(e_coarse / e_fine); }

inline ProblemParams unit_weight(ProblemParams P) {
    P.weight = WeightFamily::constant(1.0);
    return P;
}

// Largest |(I_k - I(η - dt Φ))/(dt ‖Φ‖²) - 1| style defect from one state.
inline double dissipation_defect(const OperatorSet& ops, const Field& a, double p, const Field& eta, double dt) {
    const Field phi = gradient_field(ops, a, p, eta);
    const double pn2 = ops.stiffness_form(phi, phi);
    Field next = eta;
    next.axpy(-dt, phi);
    const double drop = action(ops, a, p, eta).action - action(ops, a, p, next).action;
    return drop / (dt * pn2) - 1.0;
}

} // namespace verify_detail

// Positive scaling and sums of samples stay in the cone; odd fields are rejected.
inline SuiteResult suite_cone_axioms(const VerifyContext& c) {
    auto g = build_grid(c.params, c.nr, c.ntheta);
    const auto s = sample_cone(g, c.seed, 20);
    int bad = 0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        bad += !check_cone(s[k], 0.0).in_cone;
        bad += !check_cone(3.5 * s[k], 0.0).in_cone;
        bad += !check_cone(s[k] + s[(k + 1) % s.size()], 0.0).in_cone;
    }
    const double width = c.params.R1 - c.params.R0;
    Field odd = Field::from_function(
        g, [&](double r, double t) { return std::sin(std::numbers::pi * (r - c.params.R0) / width) * std::sin(t); });
    odd.zero_boundary();
    const bool odd_rejected = !check_cone(odd, 0.0).in_cone;
    return {"cone_axioms", bad == 0 && odd_rejected,
            std::to_string(bad) + " failures over 60 cone checks; odd field rejected=" + (odd_rejected ? "yes" : "no")};
}

// u(r, θ) ≤ u(r, 0) + τ on samples and on T(samples).
inline SuiteResult suite_slice_domination(const VerifyContext& c) {
    auto g = build_grid(c.params, c.nr, c.ntheta);
    OperatorSet ops(g, c.assembly);
    const Field a = make_weight(g, c.params.weight);
    double worst = -1e300;
    for (const auto& u : sample_cone(g, c.seed + 1, 20)) {
        worst = std::max(worst, slice_domination_defect(u));
        const Field Tu = apply_T(ops, a, c.params.p, u);
        worst = std::max(worst, slice_domination_defect(Tu) - 1e-8 * Tu.max_abs());
    }
    return {"slice_domination", worst <= 0.0, "max u(r,θ) - u(r,0) - τ = " + verify_detail::num(worst)};
}

// apply_T maps cone samples into the cone for three weight families.
inline SuiteResult suite_t_cone_invariance(const VerifyContext& c) {
    auto g = build_grid(c.params, c.nr, c.ntheta);
    OperatorSet ops(g, c.assembly);
    const WeightFamily fams[] = {WeightFamily::constant(1.0), WeightFamily::radial(1.0, 1.0),
                                 WeightFamily::angular(0.5, 2.0)};
    const auto samples = sample_cone(g, c.seed + 2, 50);
    int bad = 0, total = 0;
    for (const auto& fam : fams) {
        const Field a = make_weight(g, fam);
        for (const auto& u : samples) {
            const Field Tu = apply_T(ops, a, c.params.p, u);
            bad += !check_cone(Tu, 1e-8 * Tu.max_abs()).in_cone;
            ++total;
        }
    }
    return {"t_cone_invariance", bad == 0, std::to_string(bad) + " of " + std::to_string(total) + " outputs left the cone"};
}

// (I_k - I_{k+1})/dt_k = ‖Φ_k‖² (1 ± 0.1) for dt ≤ dt0/8 along a decaying and an escaping
// trace, with a defect that halves with the step.
inline SuiteResult suite_dissipation(const VerifyContext& c) {
    const ProblemParams P = verify_detail::unit_weight(c.params);
    auto g = build_grid(P, c.nr, c.ntheta);
    OperatorSet ops(g, c.assembly);
    const Field a = make_weight(g, P.weight);
    const double p = P.p;
    Field u0 = sample_cone(g, c.seed + 3, 1).front();
    u0 *= nehari_scale(ops, a, p, u0);

    const double h = FlowConfig{}.dt0 / 8.0;
    auto run = [&](double scale, double dt) {
        FlowConfig cfg;
        cfg.dt0 = cfg.dt_max = dt;
        cfg.dt_min = std::min(cfg.dt_min, dt);
        cfg.max_steps = 400;
        const FlowTrace tr = flow(ops, a, p, scale * u0, cfg);
        double worst = 0.0;
        for (std::size_t k = 1; k < tr.samples.size(); ++k) {
            const auto& s0 = tr.samples[k - 1];
            const auto& s1 = tr.samples[k];
            worst = std::max(worst, std::abs((s0.action - s1.action) / (s1.dt * s0.phi_norm * s0.phi_norm) - 1.0));
        }
        return std::pair<double, FlowTrace>(worst, tr);
    };
    double worst = 0.0, ratio_lo = 1e300, ratio_hi = -1e300;
    std::string outcomes;
    for (double scale : {0.8, 1.0}) {
        auto [w1, tr1] = run(scale, h);
        auto [w2, tr2] = run(scale, h / 2);
        worst = std::max({worst, w1, w2});
        ratio_lo = std::min(ratio_lo, w1 / w2);
        ratio_hi = std::max(ratio_hi, w1 / w2);
        outcomes += std::string(outcomes.empty() ? "" : ", ") + std::string(to_string(tr1.outcome));
        const Field& state = tr1.samples.size() > 2 ? tr1.final : u0;
        const double d1 = verify_detail::dissipation_defect(ops, a, p, state, h);
        const double d2 = verify_detail::dissipation_defect(ops, a, p, state, h / 2);
        ratio_lo = std::min(ratio_lo, d1 / d2);
        ratio_hi = std::max(ratio_hi, d1 / d2);
    }
    const bool ok = worst <= 0.1 && ratio_lo >= 1.6 && ratio_hi <= 2.4;
    return {"dissipation", ok,
            "max relative defect " + verify_detail::num(worst) + " at dt<=" + verify_detail::num(h) + " (" + outcomes +
                "); halving ratio in [" + verify_detail::num(ratio_lo) + ", " + verify_detail::num(ratio_hi) + "]"};
}

// Central differences of I against I'(u)φ = ⟨u - T(u), φ⟩_{H¹}.
inline SuiteResult suite_gradient_fd(const VerifyContext& c) {
    auto g = build_grid(c.params, c.nr, c.ntheta);
    OperatorSet ops(g, c.assembly);
    const Field a = make_weight(g, c.params.weight);
    const double p = c.params.p;
    const auto s = sample_cone(g, c.seed + 4, 6);
    double worst = 0.0;
    for (int k = 0; k < 3; ++k) {
        Field u = s[2 * k];
        u *= 0.8 * nehari_scale(ops, a, p, u);
        const Field& phi = s[2 * k + 1];
        const double eps = 1e-5;
        const double fd = (action(ops, a, p, u + eps * phi).action - action(ops, a, p, u - eps * phi).action) / (2 * eps);
        const double exact = ops.stiffness_form(gradient_field(ops, a, p, u), phi);
        worst = std::max(worst, std::abs(fd - exact) / std::abs(exact));
    }
    return {"gradient_fd", worst <= 1e-5, "max relative error " + verify_detail::num(worst)};
}

inline SuiteResult suite_hessian_fd(const VerifyContext& c) {
    auto g = build_grid(c.params, c.nr, c.ntheta);
    OperatorSet ops(g, c.assembly);
    const Field a = make_weight(g, c.params.weight);
    const double p = c.params.p;
    const auto s = sample_cone(g, c.seed + 5, 6);
    double worst = 0.0;
    for (int k = 0; k < 3; ++k) {
        Field u = s[2 * k];
        u *= nehari_scale(ops, a, p, u);
        const Field& v = s[2 * k + 1];
        const double eps = 1e-3 * u.max_abs() / v.max_abs();
        const double fd = (action(ops, a, p, u + eps * v).action - 2.0 * action(ops, a, p, u).action +
                           action(ops, a, p, u - eps * v).action) /
                          (eps * eps);
        const double exact = second_variation(ops, a, p, u, v);
        worst = std::max(worst, std::abs(fd - exact) / std::abs(exact));
    }
    return {"hessian_fd", worst <= 1e-4, "max relative error " + verify_detail::num(worst)};
}

namespace verify_detail {

// max |−Δ_S Y − 2N Y| over rows and over |θ| ≤ π/2 − π/8.
inline double laplace_beltrami_error(const ProblemParams& P, int nr, int ntheta, const AssemblyOptions& opts) {
    auto g = build_grid(P, nr, ntheta);
    OperatorSet ops(g, opts);
    const int N = P.N;
    Field Y = Field::from_function(g, [&](double, double t) { return 1.0 - N * std::sin(t) * std::sin(t); });
    Y.zero_boundary();
    const Field L = ops.apply_minus_sphere_laplacian(Y);
    double err = 0.0;
    for (int i = 1; i + 1 < g->nr(); ++i)
        for (int j = 0; j < g->ntheta(); ++j)
            if (std::abs(g->theta(j)) <= 0.5 * std::numbers::pi - std::numbers::pi / 8 + 1e-12)
                err = std::max(err, std::abs(L(i, j) - 2.0 * N * Y(i, j)));
    return err;
}

} // namespace verify_detail

inline SuiteResult suite_laplace_beltrami(const VerifyContext& c) {
    ProblemParams P = c.params;
    P.N = 3;
    const int nt = c.ntheta;
    const double e1 = verify_detail::laplace_beltrami_error(P, 5, nt, c.assembly);
    const double e2 = verify_detail::laplace_beltrami_error(P, 5, 2 * nt - 1, c.assembly);
    const double ord = verify_detail::order(e1, e2);
    const double h = std::numbers::pi / (nt - 1);
    const bool ok = e1 <= 2.0 * 6.0 * h * h && ord >= 1.8;
    return {"laplace_beltrami", ok,
            "N=3: max |−Δ_S Y − 6Y| = " + verify_detail::num(e1) + " (ntheta=" + std::to_string(nt) + "), " +
                verify_detail::num(e2) + " (ntheta=" + std::to_string(2 * nt - 1) + "), order " + verify_detail::num(ord)};
}

inline SuiteResult suite_volume_quadrature(const VerifyContext& c) {
    ProblemParams P = c.params;
    P.N = 3;
    P.R0 = 1.0;
    P.R1 = 2.0;
    auto err = [&](int nr, int nt) {
        auto g = build_grid(P, nr, nt);
        Field one = Field::from_function(g, [](double, double) { return 1.0; });
        Field r = Field::from_function(g, [](double rr, double) { return rr; });
        const double exact_r = std::numbers::pi * (std::pow(P.R1, 4) - std::pow(P.R0, 4));
        return std::max(std::abs(integrate(one) - 28.0 * std::numbers::pi / 3.0) / (28.0 * std::numbers::pi / 3.0),
                        std::abs(integrate(r) - exact_r) / exact_r);
    };
    const int nr = c.nr, nt = c.ntheta;
    const double e1 = err(nr, nt), e2 = err(2 * nr - 1, 2 * nt - 1);
    const double h = (P.R1 - P.R0) / (nr - 1);
    const double ord = verify_detail::order(e1, e2);
    const bool ok = e1 <= h * h && ord >= 1.8;
    return {"volume_quadrature", ok,
            "relative error " + verify_detail::num(e1) + " -> " + verify_detail::num(e2) + ", order " + verify_detail::num(ord)};
}

namespace verify_detail {

inline double manufactured_error(const ProblemParams& P, int nr, int nt, const AssemblyOptions& opts) {
    auto g = build_grid(P, nr, nt);
    OperatorSet ops(g, opts);
    const double w = P.R1 - P.R0, k = std::numbers::pi / w;
    const int N = P.N;
    auto exact = [&](double r, double) { return std::sin(k * (r - P.R0)); };
    auto rhs = [&](double r, double) {
        const double x = k * (r - P.R0);
        return k * k * std::sin(x) - (N - 1.0) / r * k * std::cos(x) + std::sin(x);
    };
    const Field v = resolvent(ops, Field::from_function(g, rhs));
    Field ve = Field::from_function(g, exact);
    ve.zero_boundary();
    return (v - ve).max_abs();
}

} // namespace verify_detail

inline SuiteResult suite_manufactured_convergence(const VerifyContext& c) {
    const int nt = 9;
    const double e1 = verify_detail::manufactured_error(c.params, 17, nt, c.assembly);
    const double e2 = verify_detail::manufactured_error(c.params, 33, nt, c.assembly);
    const double e3 = verify_detail::manufactured_error(c.params, 65, nt, c.assembly);
    const double o1 = verify_detail::order(e1, e2), o2 = verify_detail::order(e2, e3);
    return {"manufactured_convergence", o1 >= 1.8 && o2 >= 1.8,
            "sup errors " + verify_detail::num(e1) + ", " + verify_detail::num(e2) + ", " + verify_detail::num(e3) +
                "; orders " + verify_detail::num(o1) + ", " + verify_detail::num(o2)};
}

// Inverse iteration against a dense generalized symmetric eigensolver on the same matrices.
inline SuiteResult suite_dense_eigen_oracle(const VerifyContext& c) {
    const ProblemParams P = verify_detail::unit_weight(c.params);
    const auto rad = solve_radial(P, c.n1d);
    double worst = 0.0;
    for (bool zero : {true, false}) {
        SpectralOptions opt;
        opt.zero_potential = zero;
        const auto eig = alpha1_solve(rad, c.n1d, opt);
        const auto ep = radial_eigenproblem(rad, c.n1d, opt);
        const int m = static_cast<int>(ep.M.size());
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m), B = Eigen::MatrixXd::Zero(m, m);
        for (int q = 0; q < m; ++q) {
            A(q, q) = ep.A.diag[q];
            B(q, q) = ep.M[q];
            if (q + 1 < m) A(q, q + 1) = A(q + 1, q) = ep.A.off[q];
        }
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, B, Eigen::EigenvaluesOnly);
        const double dense = es.eigenvalues()(0);
        worst = std::max(worst, std::abs(eig.alpha1 - dense) / std::max(1.0, std::abs(dense)));
    }
    return {"dense_eigen_oracle", worst <= 1e-8, "max relative difference " + verify_detail::num(worst)};
}

struct SuiteEntry {
    const char* name;
    SuiteResult (*run)(const VerifyContext&);
};

inline const std::vector<SuiteEntry>& all_suites() {
    static const std::vector<SuiteEntry> suites = {
        {"cone_axioms", suite_cone_axioms},
        {"slice_domination", suite_slice_domination},
        {"t_cone_invariance", suite_t_cone_invariance},
        {"dissipation", suite_dissipation},
        {"gradient_fd", suite_gradient_fd},
        {"hessian_fd", suite_hessian_fd},
        {"laplace_beltrami", suite_laplace_beltrami},
        {"volume_quadrature", suite_volume_quadrature},
        {"manufactured_convergence", suite_manufactured_convergence},
        {"dense_eigen_oracle", suite_dense_eigen_oracle},
    };
    return suites;
}

// Runs the named suites in the given order; an exception inside a suite is a failure.
inline std::vector<SuiteResult> run_suites(const VerifyContext& c, const std::vector<std::string>& names) {
    std::vector<SuiteResult> out;
    for (const auto& n : names) {
        const auto& all = all_suites();
        auto it = std::find_if(all.begin(), all.end(), [&](const SuiteEntry& e) { return n == e.name; });
        if (it == all.end()) throw ValidationError("unknown verification suite '" + n + "'");
        const auto t0 = std::chrono::steady_clock::now();
        SuiteResult r;
        try {
            r = it->run(c);
        } catch (const std::exception& e) {
            r = {n, false, std::string("exception: ") + e.what()};
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<std::string> all_suite_names() {
    std::vector<std::string> v;
    for (const auto& e : all_suites()) v.emplace_back(e.name);
    return v;
}

} // namespace coneflow
