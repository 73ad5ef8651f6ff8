#include "bvm/experiments.hpp"
#include "bvm/spde.hpp"

#include <boost/math/special_functions/bessel.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

namespace bvm {
namespace {

const auto zero = [](double) { return 0.0; };

TEST(Spde, StabilityIsChecked) {
    EXPECT_THROW((Mesh{0.1, 0.01, 10}).check_stability(1.0), std::domain_error);
    EXPECT_NO_THROW((Mesh{0.1, 0.0025, 10}).check_stability(1.0));
}

TEST(Spde, ConstantStatesAreFixedPoints) {
    const Mesh mesh{0.1, 1e-3, 40};
    const LimitParams lim{1.0, 1.0, 1.0};
    for (double c : {0.0, 1.0}) {
        SPDEField f = SPDEField::sample(mesh, [c](double) { return c; }, zero);
        Rng rng(1);
        for (int s = 0; s < 100; ++s) step_wf_spde(f, mesh, lim, 0.5, rng);
        for (double u : f.u) EXPECT_EQ(u, c);
        EXPECT_EQ(f.clamps, 0u);
    }
}

TEST(Spde, ZeroNoiseReductions) {
    const LimitParams lim{1.0, 1.0, 0.0};
    const ReductionReport h = homogeneous_logistic_check(Mesh{0.1, 2e-3, 40}, lim, 0.5, 1.0, 0.5, 0.2);
    EXPECT_TRUE(h.pass) << h.u_error << ' ' << h.ell_error;
    // Neutral heat flow of a bump against a refined-mesh reference.
    const ReductionReport f = refined_mesh_check(
        Mesh{0.05, 2.5e-4, 160}, LimitParams{1.0, 0.0, 0.0}, 0.0, 0.5,
        [](double x) { return 0.2 + 0.6 * std::exp(-(x - 4) * (x - 4)); },
        [](double x) { return 0.1 + 0.3 * std::exp(-(x - 4) * (x - 4)); });
    EXPECT_TRUE(f.pass) << f.u_error << ' ' << f.ell_error;
}

TEST(Spde, FieldsStayAdmissible) {
    const Mesh mesh{0.1, 2e-3, 40};
    SPDEField f = SPDEField::sample(mesh, [](double x) { return 0.5 + 0.4 * std::sin(x); },
                                    [](double x) { return 0.2 + 0.15 * std::sin(x); });
    Rng a(2), b(3), c(4);
    for (int s = 0; s < 300; ++s) {
        step_coupled_spde(f, mesh, LimitParams{1.0, 1.0, 5.0}, 0.5, a, b, c);
        for (std::size_t i = 0; i < mesh.cells; ++i) {
            EXPECT_GE(f.ell[i], 0.0);
            EXPECT_LE(f.ell[i], f.u[i]);
            EXPECT_LE(f.u[i], 1.0);
        }
    }
}

TEST(Spde, FullyLabelledFieldStaysLabelled) {
    const Mesh mesh{0.1, 2e-3, 40};
    SPDEField f = SPDEField::sample(mesh, [](double x) { return 0.5 + 0.3 * std::cos(x); },
                                    [](double x) { return 0.5 + 0.3 * std::cos(x); });
    Rng a(5), b(6), c(7);
    for (int s = 0; s < 200; ++s) step_coupled_spde(f, mesh, LimitParams{1.0, 1.0, 1.0}, 0.5, a, b, c);
    for (std::size_t i = 0; i < mesh.cells; ++i) EXPECT_DOUBLE_EQ(f.ell[i], f.u[i]);
}

TEST(Spde, UnlabelledCoupledStepIsTheSingleStep) {
    const Mesh mesh{0.1, 2e-3, 40};
    const auto u0 = [](double x) { return 0.5 + 0.3 * std::cos(x); };
    SPDEField coupled = SPDEField::sample(mesh, u0, zero);
    SPDEField single = coupled;
    Rng rng(8);
    std::vector<double> n0(mesh.cells), n1(mesh.cells), n2(mesh.cells);
    for (int s = 0; s < 200; ++s) {
        for (std::size_t i = 0; i < mesh.cells; ++i) {
            n0[i] = rng.normal();
            n1[i] = rng.normal();
            n2[i] = rng.normal();
        }
        step_coupled_spde(coupled, mesh, LimitParams{1.0, 1.0, 1.0}, 0.5, n0, n1, n2);
        step_wf_spde(single, mesh, LimitParams{1.0, 1.0, 1.0}, 0.5, n1);
    }
    for (std::size_t i = 0; i < mesh.cells; ++i) EXPECT_NEAR(coupled.u[i], single.u[i], 1e-12);
    for (double l : coupled.ell) EXPECT_EQ(l, 0.0);
}

TEST(Spde, RefinedPairWithoutNoiseMatchesSeparateSolves) {
    const Mesh mesh{0.2, 0.005, 40};
    const LimitParams lim{1.0, 1.0, 0.0};
    const auto u0 = [](double x) { return 0.5 + 0.3 * std::cos(2 * M_PI * x / 8); };
    const RefinedPair pair = solve_spde_refined_pair(u0, zero, mesh, lim, 0.5, 0.5, 1, false);
    const SpdeRun coarse = solve_spde(SPDEField::sample(mesh, u0, zero), mesh, lim, 0.5, 0.5, 2, false);
    const Mesh fine = halved(mesh);
    const SpdeRun ref = solve_spde(SPDEField::sample(fine, u0, zero), fine, lim, 0.5, 0.5, 3, false);
    EXPECT_EQ(pair.coarse.u, coarse.final.u);
    EXPECT_EQ(pair.fine.u, ref.final.u);
    EXPECT_EQ(pair.fine_mesh.cells, 80u);
}

// Coarse noise built from the fine normals keeps unit variance.
TEST(Spde, RefinedPairNoiseHasCorrectScale) {
    const Mesh mesh{0.4, 0.005, 20};
    const LimitParams lim{1.0, 0.0, 0.01};
    const auto half = [](double) { return 0.5; };
    std::vector<double> diff(4000);
    for (std::size_t i = 0; i < diff.size(); ++i) {
        const RefinedPair p = solve_spde_refined_pair(half, zero, mesh, lim, 0.0, 0.005, i, false);
        diff[i] = (p.coarse.u[3] - 0.5) / std::sqrt(mesh.dt / mesh.dx * 4 * 0.01 * 0.25);
    }
    std::vector<double> sq(diff.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = diff[i] * diff[i];
    const Estimate e = estimate(sq);
    EXPECT_LE(std::abs(e.mean - 1.0), 3.0 * e.se);
}

TEST(HeatKernel, PointMassAtTimeZero) {
    const HeatKernel k(8, 0.0);
    EXPECT_EQ(k(0.0), 8.0);
    EXPECT_EQ(k(0.125), 0.0);
}

// The walk's increment is a Skellam difference of two Poisson(L^2 t) counts:
// P(X = k) = exp(-2 L^2 t) I_k(2 L^2 t).
TEST(HeatKernel, MatchesBesselFormula) {
    for (double L : {4.0, 8.0, 32.0}) {
        for (double t : {0.01, 0.1, 1.0}) {
            const HeatKernel k(L, t);
            const double mu = L * L * t;
            if (2 * mu > 600) continue;  // e^{2 mu} overflows in the oracle
            for (long j : {0L, 1L, 3L, 10L}) {
                const double exact = std::exp(-2 * mu) * boost::math::cyl_bessel_i(static_cast<double>(j), 2 * mu);
                EXPECT_NEAR(k.probability(j), exact, 1e-13 + 1e-10 * exact) << L << ' ' << t << ' ' << j;
                EXPECT_NEAR(heat_kernel(L, t, j / L), L * exact, L * (1e-13 + 1e-10 * exact));
            }
        }
    }
}

TEST(HeatKernel, Identities) {
    for (double L : {8.0, 32.0}) {
        for (double t : {0.01, 0.1, 1.0}) {
            const KernelIdentityReport r = heat_kernel_identities(L, t);
            EXPECT_TRUE(r.pass) << r.normalization_error << ' ' << r.symmetry_error << ' ' << r.chapman_error;
        }
    }
}

TEST(HeatKernel, SemigroupPreservesConstants) {
    const std::vector<double> ones(16, 1.0);
    for (double v : heat_semigroup(ones, 2.0, 0.3)) EXPECT_NEAR(v, 1.0, 1e-13);
}

TEST(Residual, DeterministicCaseIsQuadratureError) {
    const Mesh mesh{0.05, 5e-4, 160};
    const SPDEField start = SPDEField::sample(mesh, [](double x) { return 0.5 + 0.3 * std::cos(2 * M_PI * x / 8); }, zero);
    const LimitParams lim{1.0, 1.0, 0.0};
    const SpdeRun run = solve_spde(start, mesh, lim, 0.5, 0.5, 1, false, 1);
    const ResidualSeries r = martingale_residual(run.trajectory, mesh, gaussian_test_function(4, 0.7, 0.5), lim, 0.5);
    EXPECT_LT(std::abs(r.martingale.back()), 1e-3);
    EXPECT_EQ(r.predicted_qv.back(), 0.0);
}

TEST(Residual, NoisyCaseIsCentred) {
    const Mesh mesh{0.1, 2e-3, 80};
    const SPDEField start = SPDEField::sample(mesh, [](double x) { return 0.5 + 0.3 * std::cos(2 * M_PI * x / 8); }, zero);
    const ResidualReport r = martingale_residual_experiment(
        start, mesh, gaussian_test_function(4, 0.7, 0.5), LimitParams{1.0, 1.0, 0.02}, 0.5, 0.5, 1, 300, 9);
    EXPECT_TRUE(r.pass) << r.final_residual.mean << " +- " << r.final_residual.se << " ratio " << r.qv_ratio;
}

TEST(Green, DecompositionCases) {
    const Torus t(8, 4);
    Configuration c(t);
    for (int d = 0; d < 4; ++d)
        for (int k = 0; k < 4; ++k) c.xi[t.index({d, k})] = 1;
    const GreenReport at0 = green_representation_check(c, ScalingFamily{1, 4, 4, 1, 0.5}, 0.0, 2, 10, 1);
    EXPECT_EQ(at0.remainder.mean, 0.0);

    Configuration full(t, Field(t.size(), 1), Field(t.size(), 0));
    const GreenReport ones = green_representation_check(full, ScalingFamily{1, 4, 4, 1, 0.5}, 0.5, 2, 10, 2);
    EXPECT_NEAR(ones.semigroup_value, 1.0, 1e-12);
    EXPECT_NEAR(ones.remainder.mean, 0.0, 1e-12);

    const GreenReport neutral = green_representation_check(c, ScalingFamily{1, 4, 4, 1, 0.0}, 0.5, 2, 2000, 3);
    EXPECT_LE(std::abs(neutral.remainder.mean), 3.0 * neutral.remainder.se);

    const GreenReport biased = green_representation_check(c, ScalingFamily{1, 4, 4, 1, 1.0}, 0.5, 3, 2000, 4);
    EXPECT_TRUE(biased.pass) << biased.difference.mean << " +- " << biased.difference.se;
}

}  // namespace
}  // namespace bvm
