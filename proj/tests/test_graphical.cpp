#include "bvm/experiments.hpp"
#include "bvm/forward.hpp"
#include "bvm/graphical.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <stdexcept>

namespace bvm {
namespace {

Configuration all_ones(const Torus& t) {
    return Configuration(t, Field(t.size(), 1), Field(t.size(), 1));
}

TEST(EventLog, NoSelectionArrowsWithoutSelection) {
    const EventLog log = generate_event_log(Torus(8, 3), ScalingFamily{1, 3, 1, 1, 0.0}, 5.0, 3);
    EXPECT_EQ(log.count(ArrowKind::selection), 0u);
    EXPECT_GT(log.count(ArrowKind::voter), 0u);
}

TEST(EventLog, SortedAndDeterministic) {
    const Torus t(6, 2);
    const ScalingFamily f{1, 2, 2, 1, 0.7};
    const EventLog a = generate_event_log(t, f, 3.0, 42);
    const EventLog b = generate_event_log(t, f, 3.0, 42);
    ASSERT_EQ(a.arrows.size(), b.arrows.size());
    for (std::size_t i = 0; i < a.arrows.size(); ++i) {
        EXPECT_EQ(a.arrows[i].time, b.arrows[i].time);
        EXPECT_EQ(a.arrows[i].source, b.arrows[i].source);
        EXPECT_EQ(a.arrows[i].target, b.arrows[i].target);
        if (i > 0) {
            EXPECT_FALSE(arrow_before(a.arrows[i], a.arrows[i - 1]));
        }
        EXPECT_TRUE(t.adjacent(a.arrows[i].source, a.arrows[i].target));
    }
    EXPECT_THROW(generate_event_log(t, f, 0.0, 1), std::invalid_argument);
}

// Each directed pair carries a Poisson(r T) number of voter arrows.
TEST(EventLog, VoterArrowCountsArePoisson) {
    const Torus t(2, 1);
    const double T = 1000.0;
    double sum = 0.0;
    int pairs = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const EventLog log = generate_event_log(t, ScalingFamily{1, 1, 1, 1, 0.0}, T, seed);
        std::map<std::pair<int, int>, int> per_pair;
        for (const Arrow& a : log.arrows) ++per_pair[{a.source.deme, a.target.deme}];
        EXPECT_EQ(per_pair.size(), 2u);
        for (const auto& [pair, n] : per_pair) {
            EXPECT_LE(std::abs(n - T), 5.0 * std::sqrt(T));
            sum += n;
            ++pairs;
        }
    }
    const double mean = sum / pairs;
    EXPECT_LE(std::abs(mean - T), 3.0 * std::sqrt(T / pairs));
}

TEST(Replay, EmptyLogIsIdentity) {
    const Torus t(4, 2);
    Rng rng(5);
    const Configuration c = random_configuration(t, 0.5, 0.5, rng);
    EventLog log{t, 1.0, 0, {}};
    const Configuration out = replay_forward(log, c);
    EXPECT_EQ(out.xi, c.xi);
    EXPECT_EQ(out.eta, c.eta);
    const Site roots[] = {{1, 0}, {2, 1}, {1, 0}};
    const DualReplay d = replay_dual(log, 1.0, roots);
    ASSERT_EQ(d.roots.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(d.roots[k].particles, std::vector<Site>{roots[k]});
}

TEST(Replay, AllOnesIsAbsorbing) {
    const Torus t(5, 3);
    const EventLog log = generate_event_log(t, ScalingFamily{1, 3, 1, 1, 0.5}, 4.0, 9);
    const Configuration out = replay_forward(log, all_ones(t));
    EXPECT_EQ(out.xi, Field(t.size(), 1));
    EXPECT_EQ(out.eta, Field(t.size(), 1));
}

TEST(Replay, SingleVoterArrowCopiesSource) {
    const Torus t(4, 1);
    Configuration c(t);
    const Site y{1, 0}, x{2, 0};
    c.xi[t.index(y)] = 1;
    EventLog log{t, 1.0, 0, {Arrow{0.5, y, x, ArrowKind::voter}}};
    EXPECT_EQ(replay_forward(log, c).type_at(x), 1);
}

TEST(Replay, SelectionArrowPutsParentFirst) {
    const Torus t(4, 1);
    const Site y{1, 0}, x{2, 0};
    EventLog log{t, 1.0, 0, {Arrow{0.5, y, x, ArrowKind::selection}}};
    const Site root[] = {x};
    const DualReplay d = replay_dual(log, 1.0, root);
    EXPECT_EQ(d.roots[0].particles, (std::vector<Site>{y, x}));
    EXPECT_THROW(replay_dual(log, 2.0, root), std::invalid_argument);
}

TEST(Replay, PathwiseDualityOnRandomLogs) {
    const PathwiseSummary s =
        pathwise_duality_experiment(Torus(6, 2), ScalingFamily{1, 2, 2, 1, 0.8}, 2.0, 50, 5, 77, 1);
    EXPECT_EQ(s.trials, 250u);
    EXPECT_EQ(s.totals.violations(), 0u);
}

// With fewer selection arrows the type-1 set is pointwise smaller.
TEST(Replay, ThinningSelectionIsMonotone) {
    const Torus t(8, 2);
    const EventLog full = generate_event_log(t, ScalingFamily{1, 2, 1, 1, 1.0}, 3.0, 11);
    const EventLog thin = thin_selection(full, 0.5, 12);
    EXPECT_LE(thin.count(ArrowKind::selection), full.count(ArrowKind::selection));
    EXPECT_EQ(thin.count(ArrowKind::voter), full.count(ArrowKind::voter));
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const Configuration c = random_configuration(t, 0.3, 0.5, rng);
        const Configuration a = replay_forward(full, c, 3.0);
        const Configuration b = replay_forward(thin, c, 3.0);
        for (std::size_t i = 0; i < t.size(); ++i) EXPECT_LE(b.xi[i], a.xi[i]);
    }
}

// The event-driven simulator and replay of an independent log have the same
// law at time T (W M = 4 sites, categories over (xi, eta)).
TEST(Replay, ForwardSimulationMatchesReplayInLaw) {
    const Torus t(2, 2);
    const ScalingFamily f{1, 2, 2, 1, 0.6};
    Configuration start(t);
    start.xi = {1, 1, 0, 0};
    start.eta = {1, 0, 0, 0};
    const double T = 0.6;
    const std::size_t reps = 6000;
    std::vector<std::uint64_t> sim(256, 0), rep(256, 0);
    auto code = [](const Configuration& c) {
        unsigned k = 0;
        for (std::size_t i = 0; i < 4; ++i) k = k * 4 + c.xi[i] + 2 * c.eta[i];
        return k;
    };
    for (std::size_t i = 0; i < reps; ++i) {
        ++sim[code(simulate_forward(start, f, T, stream_key(1, {i})).final)];
        ++rep[code(replay_forward(generate_event_log(t, f, T, stream_key(2, {i})), start))];
    }
    const ChiSquareResult chi = chi_square_two_sample(sim, rep);
    EXPECT_GT(chi.dof, 3);
    EXPECT_GT(chi.p_value, 1e-3) << "chi2 " << chi.statistic << " dof " << chi.dof;
}

}  // namespace
}  // namespace bvm
