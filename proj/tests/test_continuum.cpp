#include "bvm/continuum.hpp"
#include "bvm/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace bvm {
namespace {

std::vector<double> brownian_path(Rng& rng, double x0, double dt, std::size_t steps) {
    std::vector<double> path{x0};
    const double sd = std::sqrt(dt);
    for (std::size_t s = 0; s < steps; ++s) path.push_back(path.back() + sd * rng.normal());
    return path;
}

TEST(Bbm, SingleParticleVariance) {
    const BbmParams p{1.5, 0.0, 0.0, 1e-2};
    std::vector<double> x(20000);
    const double start[] = {0.0};
    for (std::size_t i = 0; i < x.size(); ++i) {
        Rng rng = Rng::stream(1, {i});
        x[i] = simulate_bbm(start, p, 2.0, rng).final.positions()[0];
    }
    std::vector<double> sq(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) sq[i] = x[i] * x[i];
    const Estimate e = estimate(sq);
    EXPECT_LE(std::abs(e.mean - 2.0 * 1.5 * 2.0), 3.0 * e.se);
}

TEST(Bbm, NoCoalescenceWithoutNoise) {
    const BbmParams p{1.0, 0.0, 0.0, 1e-3};
    const double start[] = {0.0, 0.01};
    Rng rng(2);
    const BbmRun run = simulate_bbm(start, p, 2.0, rng);
    EXPECT_EQ(run.final.size(), 2u);
    EXPECT_EQ(run.final.coalescences(), 0u);
}

TEST(Bbm, YuleGrowth) {
    const BbmParams p{1.0, 1.0, 0.0, 1e-3};
    const double start[] = {0.0};
    std::vector<double> n(20000);
    for (std::size_t i = 0; i < n.size(); ++i) {
        Rng rng = Rng::stream(3, {i});
        n[i] = static_cast<double>(simulate_bbm(start, p, 1.0, rng).final.size());
    }
    const Estimate e = estimate(n);
    EXPECT_LE(std::abs(e.mean - std::numbers::e), 3.0 * e.se);
}

TEST(Bbm, LimitParamsDoubleTheSelectionRate) {
    const BbmParams p = bbm_params(LimitParams{2.0, 1.5, 0.5}, 0.4, 1e-3);
    EXPECT_DOUBLE_EQ(p.alpha, 2.0);
    EXPECT_DOUBLE_EQ(p.branch_rate, 2.0 * 0.4 * 1.5);
    EXPECT_DOUBLE_EQ(p.gamma, 0.5);
}

TEST(Bbm, ClocksAreMonotoneAndCoalescenceRemovesOne) {
    BbmParams p{1.0, 2.0, 2.0, 1e-3};
    p.local_time = LocalTimeMethod::bridge;
    const double start[] = {0.0, 0.05, 0.1};
    Rng rng(4);
    BbmState s(start, p, rng);
    for (int k = 0; k < 500; ++k) {
        const std::size_t before = s.size();
        const std::uint64_t coal = s.coalescences(), births = s.births();
        std::vector<double> lt;
        for (std::size_t i = 0; i < before; ++i)
            for (std::size_t j = i + 1; j < before; ++j) lt.push_back(s.clock(i, j).local_time);
        s.step(rng);
        EXPECT_EQ(s.size(), before + (s.births() - births) - (s.coalescences() - coal));
        if (s.size() == before && s.coalescences() == coal && s.births() == births) {
            std::size_t q = 0;
            for (std::size_t i = 0; i < before; ++i)
                for (std::size_t j = i + 1; j < before; ++j) EXPECT_GE(s.clock(i, j).local_time, lt[q++]);
        }
    }
}

TEST(LocalTime, FarPathHasNone) {
    const std::vector<double> path{5.0, 5.1, 4.9, 5.2};
    EXPECT_EQ(local_time_band(path, 0.1, 0.01), 0.0);
}

// E l_0(1) = E|B_1| = sqrt(2/pi) for Brownian motion from 0. From 0 the band
// estimate carries an O(eps) bias, so eps and 2 eps are extrapolated to 0.
TEST(LocalTime, BandEstimatorMean) {
    const double dt = 1e-4;
    std::vector<double> narrow(3000), extrapolated(3000);
    for (std::size_t i = 0; i < narrow.size(); ++i) {
        Rng rng = Rng::stream(5, {i});
        const auto path = brownian_path(rng, 0.0, dt, 10000);
        narrow[i] = local_time_band(path, 4.0 * std::sqrt(dt), dt);
        extrapolated[i] = 2.0 * narrow[i] - local_time_band(path, 8.0 * std::sqrt(dt), dt);
    }
    const Estimate a = estimate(narrow), e = estimate(extrapolated);
    EXPECT_LE(std::abs(e.mean - std::sqrt(2.0 / std::numbers::pi)), 3.0 * e.se);
    EXPECT_LT(std::abs(a.mean - std::sqrt(2.0 / std::numbers::pi)), 0.05);
}

// Bridge draws are exact in law, so a coarse grid still gives sqrt(2/pi).
TEST(LocalTime, BridgeDrawsAreUnbiasedOnCoarseGrid) {
    const double dt = 0.05;
    std::vector<double> lt(40000);
    for (std::size_t i = 0; i < lt.size(); ++i) {
        Rng rng = Rng::stream(6, {i});
        const auto path = brownian_path(rng, 0.0, dt, 20);
        double l = 0.0;
        for (std::size_t s = 1; s < path.size(); ++s)
            l += bridge_local_time(path[s - 1], path[s], dt, 1.0, rng.uniform_open());
        lt[i] = l;
    }
    const Estimate e = estimate(lt);
    EXPECT_LE(std::abs(e.mean - std::sqrt(2.0 / std::numbers::pi)), 3.0 * e.se);
    EXPECT_EQ(bridge_local_time(1.0, 2.0, 0.01, 1.0, 0.5), 0.0);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// alpha = 0: first passage from 1 to 0, P(T <= t) = 2 (1 - Phi(1 / sqrt t)), median 2.198.
TEST(LimitLaw, ZeroAlphaIsLevyHittingTime) {
    const CensoredSamples s = sample_limit_law(0.0, 20000, 1e-5, 7);
    const double ks = ks_statistic_cdf(s.values, [](double t) {
        return std::isinf(t) ? 1.0 : 2.0 * (1.0 - normal_cdf(1.0 / std::sqrt(t)));
    });
    EXPECT_LT(ks, 1.63 / std::sqrt(20000.0) + 0.005);
    std::vector<double> v = s.values;
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    EXPECT_NEAR(v[v.size() / 2], 2.198, 0.1);
}

// Hitting time of 0 plus the inverse local time at a = alpha tau, which is a
// hitting time of level a: 1/Z1^2 + a^2/Z2^2.
TEST(LimitLaw, MatchesExactConstruction) {
    const double alpha = 0.5, cap = 1e4;
    const std::size_t n = 20000;
    const CensoredSamples s = sample_limit_law(alpha, n, 1e-5, 8, cap);
    Rng rng(9);
    std::vector<double> exact(n);
    for (double& x : exact) {
        const double z1 = rng.normal(), z2 = rng.normal(), a = alpha * rng.exponential(1.0);
        x = 1.0 / (z1 * z1) + a * a / (z2 * z2);
        if (x > cap) x = INFINITY;
    }
    EXPECT_LT(ks_statistic(s.values, exact), 0.025);
}

TEST(LimitLaw, IndependentSeedsAgree) {
    const CensoredSamples a = sample_limit_law(1.0, 5000, 1e-4, 10);
    const CensoredSamples b = sample_limit_law(1.0, 5000, 1e-4, 11);
    EXPECT_LT(ks_statistic(a.values, b.values), 1.95 * std::sqrt(2.0 / 5000));
}

TEST(Coalescence, RescaledTimesArePositive) {
    const CensoredSamples s = coalescence_time_experiment(1, 1, 1.0, 1000, 12);
    for (double v : s.values) EXPECT_GT(v, 0.0);
}

TEST(Coalescence, RateScalingLeavesRescaledLawUnchanged) {
    const CensoredSamples a = coalescence_time_experiment(10, 4, 1.0, 5000, 13, 100.0);
    const CensoredSamples b = coalescence_time_experiment(10, 4, 4.0, 5000, 14, 100.0);
    EXPECT_LT(ks_statistic(a.values, b.values), 1.95 * std::sqrt(2.0 / 5000));
}

}  // namespace
}  // namespace bvm
