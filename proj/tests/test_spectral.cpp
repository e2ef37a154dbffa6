#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "coneflow/spectral.hpp"

using namespace coneflow;

namespace {
ProblemParams params(double p = 4.0) {
    ProblemParams P;
    P.p = p;
    return P;
}

// Smallest generalized eigenvalue of the conservative three-point discretisation,
// assembled here from the formula and solved densely.
double dense_alpha1(const RadialSolution& s, bool zero_potential) {
    const int n = static_cast<int>(s.size()), m = n - 2, N = s.params.N;
    const double h = s.h(), p = s.params.p;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m), M = Eigen::MatrixXd::Zero(m, m);
    for (int k = 1; k + 1 < n; ++k) {
        const double r = s.r_nodes[k];
        const double fp = std::pow(r + 0.5 * h, N - 1) / h, fm = std::pow(r - 0.5 * h, N - 1) / h;
        const double pot = zero_potential ? 0.0 : (p - 1.0) * std::pow(s.values[k], p - 2.0);
        A(k - 1, k - 1) = fp + fm + h * std::pow(r, N - 1) * (1.0 - pot);
        if (k < m) A(k - 1, k) = A(k, k - 1) = -fp;
        M(k - 1, k - 1) = h * std::pow(r, N - 3);
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, M);
    return es.eigenvalues()[0];
}
} // namespace

TEST(Spectral, ZeroPotentialMatchesDenseOracle) {
    const auto rad = solve_radial(params(), 257);
    SpectralOptions opt;
    opt.zero_potential = true;
    const auto sp = alpha1_solve(rad, 257, opt);
    const double ref = dense_alpha1(rad, true);
    EXPECT_GT(sp.alpha1, 0.0);
    EXPECT_NEAR(sp.alpha1, ref, 1e-8 * std::abs(ref));
}

TEST(Spectral, PotentialCaseMatchesDenseOracle) {
    for (double p : {2.2, 4.0, 10.0}) {
        const auto rad = solve_radial(params(p), 257);
        const auto sp = alpha1_solve(rad, 257);
        const double ref = dense_alpha1(rad, false);
        EXPECT_NEAR(sp.alpha1, ref, 1e-8 * std::abs(ref)) << p;
        EXPECT_NEAR(sp.criterion, sp.alpha1 + 6.0, 1e-12 * std::abs(sp.alpha1));
        EXPECT_LT(sp.shift, sp.alpha1);
    }
}

TEST(Spectral, RegressionSnapshot) {
    const auto rad = solve_radial(params(), 513);
    EXPECT_NEAR(alpha1_solve(rad, 513).alpha1, -48.2993, 1e-3);
}

TEST(Spectral, EigenfunctionAndRayleighCharacterisation) {
    const auto rad = solve_radial(params(), 257);
    const auto sp = alpha1_solve(rad, 257);
    const auto ep = radial_eigenproblem(rad, 257);
    for (std::size_t k = 1; k + 1 < sp.w.size(); ++k) {
        EXPECT_GT(sp.w[k], 0.0);
    }
    const std::vector<double> w(sp.w.begin() + 1, sp.w.end() - 1);
    EXPECT_NEAR(detail::rayleigh(ep, w), sp.alpha1, 1e-8 * std::abs(sp.alpha1));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> x(w.size());
        for (auto& v : x) v = U(rng);
        EXPECT_GE(detail::rayleigh(ep, x), sp.alpha1);
    }
}

TEST(Spectral, MeshConvergence) {
    std::vector<double> a;
    for (int n : {129, 257, 513}) a.push_back(alpha1_solve(solve_radial(params(), n), n).alpha1);
    EXPECT_GE(std::log2(std::abs(a[0] - a[1]) / std::abs(a[1] - a[2])), 1.8);
}

TEST(Spectral, InstabilityDirection) {
    const auto rad = solve_radial(params(), 129);
    const auto sp = alpha1_solve(rad, 129);
    for (int nt : {33, 65, 129}) {
        auto g = build_grid(params(), 129, nt);
        const Field v = build_instability_direction(g, rad, sp);
        for (int i = 1; i + 1 < g->nr(); ++i) {
            EXPECT_NEAR(v(i, g->center()), sp.w[i], 1e-14);
            EXPECT_NEAR(v(i, 0), -2.0 * sp.w[i], 1e-12);
            double avg = 0.0, wsum = 0.0;
            for (int j = 0; j < nt; ++j) {
                avg += g->angular_weights()[j] * v(i, j);
                wsum += g->angular_weights()[j];
            }
            EXPECT_LE(std::abs(avg), 1e-10 * wsum * sp.w[i] + 1e-300);
        }
        const Field dv = apply_dtheta(v);
        for (int i = 0; i < g->nr(); ++i)
            for (int j = g->center() + 1; j + 1 < nt; ++j) {
                EXPECT_LE(dv(i, j), 1e-12);
            }
        EXPECT_EQ(v.max_boundary_abs(), 0.0);
    }
}

TEST(Spectral, CertificateAtSupercriticalExponent) {
    const auto rad = solve_radial(params(), 513);
    const auto sp = alpha1_solve(rad, 513);
    ASSERT_LT(sp.criterion, 0.0);
    auto g = build_grid(params(), 33, 33);
    OperatorSet ops(g);
    const Field a = make_weight(g, WeightFamily::constant(1.0));
    const auto rep = nonradiality_certificate(ops, a, 4.0, rad, sp);
    EXPECT_TRUE(rep.radial_refined);
    EXPECT_LT(rep.second_variation_value, 0.0);
    EXPECT_NEAR(rep.crosscheck_ratio, 1.0, 0.01);
    ASSERT_TRUE(rep.competitor_found);
    EXPECT_LT(rep.competitor_action, rep.action_rad);
    EXPECT_GT(rep.competitor_s, 0.0);
    EXPECT_TRUE(check_cone(rep.competitor, 1e-12 * rep.competitor.max_abs()).in_cone);
    EXPECT_NEAR(nehari_scale(ops, a, 4.0, rep.competitor), 1.0, 1e-10);
    EXPECT_TRUE(rep.nonradial_expected);
}

TEST(Spectral, NoCertificateWhenCriterionIsPositive) {
    const auto rad = solve_radial(params(2.2), 513);
    const auto sp = alpha1_solve(rad, 513);
    ASSERT_GT(sp.criterion, 0.0);
    auto g = build_grid(params(2.2), 33, 33);
    OperatorSet ops(g);
    const auto rep = nonradiality_certificate(ops, make_weight(g, WeightFamily::constant(1.0)), 2.2, rad, sp);
    EXPECT_FALSE(rep.competitor_found);
    EXPECT_FALSE(rep.nonradial_expected);
    EXPECT_GT(rep.second_variation_value, 0.0);
}

TEST(Spectral, SecondVariationSignAgreesWithCriterion) {
    for (double p : {2.2, 3.0, 6.0}) {
        const auto rad = solve_radial(params(p), 257);
        auto sp = alpha1_solve(rad, 257);
        auto g = build_grid(params(p), 257, 65);
        OperatorSet ops(g);
        const Field a = make_weight(g, WeightFamily::constant(1.0));
        spectral_crosscheck(ops, a, p, lift_radial(g, rad), build_instability_direction(g, rad, sp), sp);
        EXPECT_EQ(sp.second_variation_value < 0.0, sp.criterion < 0.0) << p;
        EXPECT_NEAR(sp.crosscheck_ratio, 1.0, 0.01) << p;
    }
}

TEST(Spectral, CertificateRequiresUnitWeight) {
    const auto rad = solve_radial(params(), 65);
    const auto sp = alpha1_solve(rad, 65);
    auto g = build_grid(params(), 17, 9);
    OperatorSet ops(g);
    EXPECT_THROW(nonradiality_certificate(ops, make_weight(g, WeightFamily::angular(0.5, 2.0)), 4.0, rad, sp),
                 ValidationError);
}

TEST(Spectral, SweepSingleSample) {
    SweepOptions o;
    o.lo = o.hi = 4.0;
    o.samples = 1;
    o.n1d = 129;
    const auto res = threshold_sweep(o);
    ASSERT_EQ(res.rows.size(), 1u);
    EXPECT_TRUE(res.rows[0].ok);
    EXPECT_FALSE(res.threshold.has_value());
    EXPECT_FALSE(res.fit_exponent.has_value());
}

TEST(Spectral, SweepIsMonotoneAndDeterministicAcrossWorkers) {
    SweepOptions o;
    o.lo = 2.1;
    o.hi = 6.0;
    o.samples = 8;
    o.n1d = 129;
    const auto a = threshold_sweep(o);
    o.workers = 3;
    const auto b = threshold_sweep(o);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
        EXPECT_EQ(a.rows[k].alpha1, b.rows[k].alpha1);
    }
    EXPECT_EQ(a.monotone_violations, 0);
    EXPECT_EQ(a.failures, 0);
    ASSERT_TRUE(a.threshold.has_value());
    EXPECT_EQ(*a.threshold, *b.threshold);
    EXPECT_GT(a.threshold_lo, 2.1);
    EXPECT_LT(a.threshold_hi - a.threshold_lo, 5e-4 * *a.threshold);
    SweepOptions in = o;
    in.lo = in.hi = a.threshold_lo;
    in.samples = 1;
    SweepOptions out = in;
    out.lo = out.hi = a.threshold_hi;
    EXPECT_LT(threshold_sweep(in).rows[0].criterion * threshold_sweep(out).rows[0].criterion, 0.0);
}

TEST(Spectral, SweepReusesKnownRows) {
    SweepOptions o;
    o.lo = 3.0;
    o.hi = 5.0;
    o.samples = 3;
    o.n1d = 65;
    const auto a = threshold_sweep(o);
    std::vector<SweepRow> known = a.rows;
    known[1].alpha1 = -1234.0; // sentinel: reused rows are not recomputed
    const auto b = threshold_sweep(o, known);
    EXPECT_EQ(b.rows[1].alpha1, -1234.0);
    EXPECT_EQ(b.rows[0].alpha1, a.rows[0].alpha1);
}

TEST(Spectral, SweepValidation) {
    SweepOptions o;
    o.lo = 2.0;
    EXPECT_THROW(threshold_sweep(o), ValidationError);
    o = SweepOptions{};
    o.mode = SweepMode::vary_R;
    o.lo = 1.0;
    o.hi = 3.0;
    o.fixed.R1 = 3.0;
    EXPECT_THROW(threshold_sweep(o), ValidationError);
    o.fixed.R1 = 2.0;
    o.samples = 0;
    EXPECT_THROW(threshold_sweep(o), ValidationError);
    EXPECT_THROW(sweep_mode_from_string("vary_N"), ValidationError);
}
