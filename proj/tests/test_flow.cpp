#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "coneflow/flow.hpp"
#include "coneflow/radial.hpp"

using namespace coneflow;

namespace {
GridPtr grid(int nr = 33, int nt = 17) { return build_grid(ProblemParams{}, nr, nt); }
Field ones(const GridPtr& g) { return make_weight(g, WeightFamily::constant(1.0)); }
Field bump(const GridPtr& g) {
    Field u = Field::from_function(g, [](double r, double t) {
        return std::sin(std::numbers::pi * (r - 1.0)) * (1.0 + std::cos(t) * std::cos(t));
    });
    u.zero_boundary();
    return u;
}
} // namespace

TEST(Flow, ZeroIsAnImmediateFixedPoint) {
    auto g = grid();
    OperatorSet ops(g);
    const auto tr = flow(ops, ones(g), 4.0, Field(g), FlowConfig{});
    EXPECT_EQ(tr.outcome, FlowOutcome::converged_fixed_point);
    EXPECT_EQ(tr.accepted, 0);
    EXPECT_EQ(tr.final.max_abs(), 0.0);
}

TEST(Flow, TinyDataStartInsideDecayBall) {
    auto g = grid();
    OperatorSet ops(g);
    const auto tr = flow(ops, ones(g), 4.0, 0.01 * bump(g), FlowConfig{});
    EXPECT_EQ(tr.outcome, FlowOutcome::decayed_to_zero);
    EXPECT_EQ(tr.accepted, 0);
}

TEST(Flow, SubcriticalDataDecayWithMonotoneAction) {
    auto g = grid();
    OperatorSet ops(g);
    const Field a = ones(g);
    const Field u = bump(g);
    const Field u0 = 0.6 * nehari_scale(ops, a, 4.0, u) * u;
    const auto tr = flow(ops, a, 4.0, u0, FlowConfig{});
    EXPECT_EQ(tr.outcome, FlowOutcome::decayed_to_zero) << tr.message;
    ASSERT_GE(tr.samples.size(), 2u);
    for (std::size_t k = 1; k < tr.samples.size(); ++k) {
        EXPECT_LT(tr.samples[k].action, tr.samples[k - 1].action);
        EXPECT_LE(tr.samples[k].dt, 1.0);
    }
    EXPECT_LT(tr.final.max_abs(), u0.max_abs());
}

TEST(Flow, LargeDataEscape) {
    auto g = grid();
    OperatorSet ops(g);
    const Field a = ones(g);
    const Field u = bump(g);
    const auto tr = flow(ops, a, 4.0, 3.0 * nehari_scale(ops, a, 4.0, u) * u, FlowConfig{});
    EXPECT_EQ(tr.outcome, FlowOutcome::escaped_negative);
    EXPECT_LT(action(ops, a, 4.0, tr.final).action, -1.0);
}

TEST(Flow, IteratesStayInCone) {
    auto g = grid();
    OperatorSet ops(g);
    const Field a = make_weight(g, WeightFamily::angular(0.5, 2.0));
    const Field u = bump(g);
    for (double s : {0.5, 1.5}) {
        const auto tr = flow(ops, a, 4.0, s * nehari_scale(ops, a, 4.0, u) * u, FlowConfig{});
        EXPECT_TRUE(check_cone(tr.final, default_cone_tau(tr.final)).in_cone);
        EXPECT_TRUE(check_cone(tr.best, default_cone_tau(tr.best)).in_cone);
    }
}

TEST(Flow, RejectsInvalidInput) {
    auto g = grid();
    OperatorSet ops(g);
    const Field a = ones(g);
    Field odd = Field::from_function(g, [](double r, double t) { return std::sin(std::numbers::pi * (r - 1)) * (1.0 + 0.5 * std::sin(t)); });
    odd.zero_boundary();
    EXPECT_THROW(flow(ops, a, 4.0, odd, FlowConfig{}), ValidationError);
    FlowConfig bad;
    bad.dt_max = 2.0;
    EXPECT_THROW(flow(ops, a, 4.0, bump(g), bad), ValidationError);
    bad = FlowConfig{};
    bad.dt0 = 1e-9;
    EXPECT_THROW(flow(ops, a, 4.0, bump(g), bad), ValidationError);
    bad = FlowConfig{};
    bad.max_steps = 0;
    EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Flow, MountainPassGeometry) {
    auto g = grid();
    OperatorSet ops(g);
    const Field a = ones(g);
    const auto geo = mountain_pass_geometry(ops, a, 4.0);
    EXPECT_GT(geo.alpha, 0.0);
    EXPECT_GT(geo.rho_alpha, 0.0);
    for (const auto& u : sample_cone(g, 0x5eed, 64)) {
        const Field s = (geo.alpha / std::sqrt(h1_norm_sq(ops, u))) * u;
        EXPECT_GE(action(ops, a, 4.0, s).action, 2.0 * geo.rho_alpha * (1.0 - 1e-12));
    }
}

TEST(Flow, BudgetExhaustionKeepsBestIterate) {
    auto g = grid();
    OperatorSet ops(g);
    const Field a = ones(g);
    const Field u = bump(g);
    FlowConfig cfg;
    cfg.max_steps = 3;
    const auto tr = flow(ops, a, 4.0, nehari_scale(ops, a, 4.0, u) * u, cfg);
    EXPECT_EQ(tr.outcome, FlowOutcome::budget_exhausted);
    EXPECT_TRUE(std::isfinite(tr.best_phi));
    EXPECT_LE(tr.best_phi, tr.samples.front().phi_norm);
    EXPECT_NEAR(phi_norm(ops, a, 4.0, tr.best), tr.best_phi, 1e-8 * tr.best_phi);
}

TEST(Flow, SeparatrixClassificationIsMonotone) {
    auto g = grid(17, 9);
    OperatorSet ops(g);
    const Field a = ones(g);
    Field psi = bump(g);
    psi *= nehari_scale(ops, a, 4.0, psi);
    const FlowConfig cfg;
    const auto sep = separatrix_scale(ops, a, 4.0, psi, cfg, 1e-10);
    EXPECT_GT(sep.t_star, 0.0);
    EXPECT_LT(sep.t_star, 2.0);
    for (int k = 1; k <= 5; ++k) {
        const auto below = flow(ops, a, 4.0, sep.t_star * (1.0 - 0.02 * k) * psi, cfg);
        const auto above = flow(ops, a, 4.0, sep.t_star * (1.0 + 0.02 * k) * psi, cfg);
        EXPECT_EQ(below.outcome, FlowOutcome::decayed_to_zero) << k;
        EXPECT_EQ(above.outcome, FlowOutcome::escaped_negative) << k;
    }
    for (const auto& pr : sep.probes) EXPECT_EQ(pr.lower_side, pr.t < sep.t_star) << pr.t;
}

TEST(Flow, SeparatrixAlongRadialRayIsAtUnitScale) {
    ProblemParams P;
    const auto rad = solve_radial(P, 65);
    auto g = grid(65, 5);
    OperatorSet ops(g);
    const Field a = ones(g);
    const Field u = lift_radial(g, rad);
    const auto sep = separatrix_scale(ops, a, 4.0, u, FlowConfig{}, 1e-10);
    EXPECT_NEAR(sep.t_star, 1.0, 1e-6);
}

TEST(Flow, NewtonPolishConvergesSuperlinearly) {
    auto g = grid(17, 9);
    OperatorSet ops(g);
    const Field a = ones(g);
    Field psi = bump(g);
    psi *= nehari_scale(ops, a, 4.0, psi);
    const auto sep = separatrix_scale(ops, a, 4.0, psi, FlowConfig{}, 1e-10);
    const auto ref = refine_fixed_point(ops, a, 4.0, sep.witness.best, 1e-12);
    ASSERT_TRUE(ref.converged) << ref.warning;
    const auto& h = ref.phi_history;
    ASSERT_GE(h.size(), 3u);
    EXPECT_LE(h.back(), 1e-12 * std::sqrt(h1_norm_sq(ops, ref.u)));
    EXPECT_LT(h[h.size() - 1], 0.1 * h[h.size() - 2]);
    EXPECT_GT(action(ops, a, 4.0, ref.u).action, 0.0);
    EXPECT_TRUE(check_cone(ref.u, default_cone_tau(ref.u)).in_cone);
    // Already converged input is returned unchanged.
    const auto again = refine_fixed_point(ops, a, 4.0, ref.u, 1e-10);
    EXPECT_TRUE(again.converged);
    EXPECT_EQ(again.iterations, 0);
}

TEST(Flow, LocateCriticalPoint) {
    auto g = grid(17, 9);
    OperatorSet ops(g);
    const Field a = ones(g);
    const auto cp = locate_critical_point(ops, a, 4.0, bump(g), FlowConfig{});
    ASSERT_TRUE(cp.converged);
    const auto e = action(ops, a, 4.0, cp.u);
    EXPECT_LE(std::abs(e.nehari_residual), 1e-8 * e.h1_sq);
    EXPECT_NEAR(e.action, 0.25 * e.h1_sq, 1e-8 * e.h1_sq);
    EXPECT_LE(phi_norm(ops, a, 4.0, cp.u), 1e-9 * std::sqrt(e.h1_sq));
}

TEST(Flow, RadialFlowMatchesOneDimensionalSolution) {
    ProblemParams P;
    const auto rad = solve_radial(P, 65);
    auto g = grid(65, 5);
    OperatorSet ops(g);
    const Field a = ones(g);
    Field psi = Field::from_function(g, [](double r, double) { return std::sin(std::numbers::pi * (r - 1.0)); });
    psi.zero_boundary();
    const auto cp = locate_critical_point(ops, a, 4.0, psi, FlowConfig{});
    ASSERT_TRUE(cp.converged);
    const Field ref = lift_radial(g, rad);
    EXPECT_LE((cp.u - ref).max_abs(), 1e-8 * ref.max_abs());
}
