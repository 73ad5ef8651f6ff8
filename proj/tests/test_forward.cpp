#include "bvm/experiments.hpp"
#include "bvm/forward.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

namespace bvm {
namespace {

TEST(Forward, AllZerosIsAbsorbing) {
    const Torus t(6, 3);
    const ForwardRun run = simulate_forward(Configuration(t), ScalingFamily{1, 3, 1, 1, 1.0}, 5.0, 1);
    EXPECT_EQ(run.final.xi, Field(t.size(), 0));
}

TEST(Forward, LabelsStayBelowTypes) {
    const Torus t(6, 3);
    Rng rng(3);
    const Configuration c = random_configuration(t, 0.5, 0.5, rng);
    const double times[] = {0.5, 1.0, 2.0};
    const ForwardRun run = simulate_forward(c, ScalingFamily{1, 3, 2, 1, 1.0}, 2.0, 4, times);
    ASSERT_EQ(run.samples.size(), 3u);
    for (const Configuration& s : run.samples) EXPECT_TRUE(s.labels_dominated());
    EXPECT_TRUE(run.final.labels_dominated());
}

// Without selection the total type-1 density is a martingale.
TEST(Forward, NeutralDensityIsMartingale) {
    const Torus t(6, 2);
    Rng rng(8);
    const Configuration c = random_configuration(t, 0.4, 0.0, rng);
    const double d0 = std::accumulate(c.xi.begin(), c.xi.end(), 0.0) / t.size();
    std::vector<double> change(4000);
    for (std::size_t i = 0; i < change.size(); ++i) {
        const ForwardRun run = simulate_forward(c, ScalingFamily{1, 2, 1, 1, 0.0}, 1.0, stream_key(9, {i}));
        change[i] = std::accumulate(run.final.xi.begin(), run.final.xi.end(), 0.0) / t.size() - d0;
    }
    const Estimate e = estimate(change);
    EXPECT_LE(std::abs(e.mean), 3.0 * e.se);
}

// Two sites copying each other: fixation on type 1 with probability 1/2.
TEST(Forward, TwoSiteVoterFixesWithProbabilityHalf) {
    const Torus t(2, 1);
    Configuration c(t);
    c.xi = {1, 0};
    std::vector<double> ones(4000);
    for (std::size_t i = 0; i < ones.size(); ++i) {
        const ForwardRun run = simulate_forward(c, ScalingFamily{1, 1, 1, 1, 0.0}, 30.0, stream_key(10, {i}));
        ASSERT_EQ(run.final.xi[0], run.final.xi[1]);
        ones[i] = run.final.xi[0];
    }
    const Estimate e = estimate(ones);
    EXPECT_LE(std::abs(e.mean - 0.5), 3.0 * e.se);
}

TEST(Profiles, DensitiesAndInterpolation) {
    const Torus t(4, 4);
    Configuration c(t);
    for (int k = 0; k < 2; ++k) c.xi[t.index({1, k})] = 1;
    const DensityProfile p = density_profiles(c, ScalingFamily{2, 4, 1, 1, 0.0});
    EXPECT_DOUBLE_EQ(p.u[1], 0.5);
    EXPECT_DOUBLE_EQ(p.position(1), 0.5);

    Configuration d(t, Field(t.size(), 1), Field(t.size(), 0));
    for (double u : density_profiles(d, ScalingFamily{1, 4, 1, 1, 0.0}).u) EXPECT_EQ(u, 1.0);

    Configuration e(t);
    // Demes 0 and 1 at densities 0.25 and 0.75: midpoint 0.5.
    e.xi[t.index({0, 0})] = 1;
    for (int k = 0; k < 3; ++k) e.xi[t.index({1, k})] = 1;
    const DensityProfile q = density_profiles(e, ScalingFamily{1, 4, 1, 1, 0.0});
    EXPECT_DOUBLE_EQ(q.u_at(0.5), 0.5);
}

TEST(Profiles, ProductStatisticOverMultisets) {
    const Torus t(4, 2);
    Configuration c(t);
    EXPECT_EQ(product_statistic(c, std::vector<int>{0, 1, 1}), 1.0);
    c.xi[t.index({0, 0})] = 1;
    c.xi[t.index({1, 0})] = 1;
    c.xi[t.index({1, 1})] = 1;
    // (1 - u(0))^3 (1 - u(2))^2 with u(0) = 1/2, u(2) = 0.
    EXPECT_DOUBLE_EQ(product_statistic(c, std::vector<int>{0, 0, 0, 2, 2}), 0.125);
    EXPECT_EQ(product_statistic(c, std::vector<int>{0, 1}), 0.0);
}

}  // namespace
}  // namespace bvm
