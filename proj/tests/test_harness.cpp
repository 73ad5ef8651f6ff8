#include "bvm/harness.hpp"
#include "bvm/stats.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace bvm {
namespace {

ExperimentSpec parse(const std::string& text) {
    std::istringstream in(text);
    return parse_spec(in);
}

const char* small_dual = R"([experiment]
kind = dual-mc
reps = 400
seed = 5

[params]
demes = 6
M = 2
t = 0.5
sets = 1; 1 2
)";

TEST(Spec, ParsesSectionsAndParams) {
    const ExperimentSpec s = parse(small_dual);
    EXPECT_EQ(s.kind, ExperimentKind::dual_mc);
    EXPECT_EQ(s.reps, 400u);
    EXPECT_EQ(s.master_seed, 5u);
    EXPECT_EQ(s.params.integer("demes", 0), 6);
    EXPECT_EQ(s.params.integer_groups("sets", {}), (std::vector<std::vector<long>>{{1}, {1, 2}}));
    EXPECT_EQ(s.params.real("missing", 2.5), 2.5);
}

TEST(Spec, RejectsInvalidInput) {
    EXPECT_THROW(parse("[experiment]\nkind = nope\n"), std::invalid_argument);
    EXPECT_THROW(parse("[experiment]\nkind = spde\nreps = 0\n"), std::invalid_argument);
    EXPECT_THROW(parse("[experiment]\nkind = spde\n[params]\nbogus = 1\n"), std::invalid_argument);
    EXPECT_THROW(parse("[params]\nalpha = 1\n"), std::invalid_argument);
    EXPECT_THROW(parse("[experiment]\nkind = spde\n[extra]\nx = 1\n"), std::invalid_argument);
    const ExperimentSpec s = parse("[experiment]\nkind = spde\n[params]\nalpha = one\n");
    EXPECT_THROW(run(s), std::invalid_argument);
}

TEST(Spec, EveryKindRoundTripsItsName) {
    for (ExperimentKind k : all_kinds()) EXPECT_EQ(parse_kind(to_string(k)), k);
    EXPECT_EQ(all_kinds().size(), 11u);
}

TEST(Spec, HashIgnoresWorkersAndOutput) {
    ExperimentSpec a = parse(small_dual);
    ExperimentSpec b = a;
    b.workers = 8;
    b.out = "/tmp/elsewhere";
    EXPECT_EQ(spec_hash(a), spec_hash(b));
    b.master_seed = 6;
    EXPECT_NE(spec_hash(a), spec_hash(b));
    EXPECT_EQ(spec_hash(a).size(), 16u);
}

TEST(Run, SingleReplicaHasNoStandardError) {
    ExperimentSpec s = parse("[experiment]\nkind = simulate-forward\nreps = 1\n[params]\ndemes = 4\nM = 2\nT = 0.5\n");
    const ResultRecord r = run(s);
    EXPECT_FALSE(r.metric("type_density").se.has_value());
    EXPECT_FALSE(r.pass.has_value());
}

TEST(Run, IndependentOfWorkerCount) {
    ExperimentSpec s = parse(small_dual);
    s.workers = 1;
    const ResultRecord a = run(s);
    s.workers = 8;
    const ResultRecord b = run(s);
    ASSERT_EQ(a.metrics.size(), b.metrics.size());
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
        EXPECT_EQ(a.metrics[i].value, b.metrics[i].value) << a.metrics[i].name;
        EXPECT_EQ(a.metrics[i].se, b.metrics[i].se);
    }
    EXPECT_EQ(a.pass, b.pass);

    ExperimentSpec spde = parse("[experiment]\nkind = coupled-spde\nreps = 20\n[params]\ngamma = 1\ndx = 0.2\ndt = 0.005\nT = 0.2\nell_frac = 0.5\n");
    spde.workers = 1;
    const ResultRecord c = run(spde);
    spde.workers = 8;
    const ResultRecord d = run(spde);
    for (std::size_t i = 0; i < c.metrics.size(); ++i) EXPECT_EQ(c.metrics[i].value, d.metrics[i].value);
}

TEST(Run, PathwiseKindPassesWithZeroViolations) {
    const ResultRecord r = run(parse("[experiment]\nkind = replay-duality\nreps = 100\nseed = 3\n[params]\ndemes = 8\nM = 2\nT = 1\n"));
    ASSERT_TRUE(r.pass.has_value());
    EXPECT_TRUE(*r.pass);
    EXPECT_EQ(r.metric("trials").value, 500.0);
}

TEST(Run, WritesFilesWithProvenance) {
    const auto dir = std::filesystem::temp_directory_path() / "bvm_harness_test";
    std::filesystem::remove_all(dir);
    ExperimentSpec s = parse("[experiment]\nkind = spde\nreps = 3\n[params]\ngamma = 0.5\ndx = 0.2\ndt = 0.005\nT = 0.1\n");
    s.out = dir;
    const ResultRecord r = run(s);
    for (const char* f : {"field.csv", "metrics.csv", "result.json"})
        EXPECT_NE(std::find(r.files.begin(), r.files.end(), f), r.files.end()) << f;
    std::ifstream csv(dir / "field.csv");
    std::string header;
    std::getline(csv, header);
    EXPECT_EQ(header.rfind("# spec_hash=" + r.spec_hash + " seed=1", 0), 0u) << header;
    std::ifstream js(dir / "result.json");
    const ResultRecord back = read_json(js);
    EXPECT_EQ(back.spec_hash, r.spec_hash);
    EXPECT_EQ(back.metrics.size(), r.metrics.size());
    EXPECT_EQ(back.metric("mass").value, r.metric("mass").value);
    std::filesystem::remove_all(dir);
}

ResultRecord record(double value, double se, std::size_t n) {
    ResultRecord r;
    r.kind = ExperimentKind::spde;
    r.metrics.push_back(Metric{"x", value, se, n});
    return r;
}

TEST(Aggregate, SingleRecordIsIdentity) {
    const Summary s = aggregate({record(2.0, 0.1, 50)});
    ASSERT_EQ(s.rows.size(), 1u);
    EXPECT_DOUBLE_EQ(s.rows[0].mean, 2.0);
    EXPECT_NEAR(*s.rows[0].se, 0.1, 1e-12);
    EXPECT_EQ(s.rows[0].n, 50u);
}

// Oracle: pool the raw samples directly.
TEST(Aggregate, EqualBatchesPoolLikeTheCombinedSample) {
    const std::vector<double> a{1, 2, 3, 4}, b{3, 5, 7, 9};
    const Estimate ea = estimate(a), eb = estimate(b);
    std::vector<double> all = a;
    all.insert(all.end(), b.begin(), b.end());
    const Estimate eall = estimate(all);
    const Summary s = aggregate({record(ea.mean, ea.se, 4), record(eb.mean, eb.se, 4)});
    EXPECT_DOUBLE_EQ(s.rows[0].mean, (ea.mean + eb.mean) / 2);
    EXPECT_NEAR(*s.rows[0].se, eall.se, 1e-12);
}

TEST(Aggregate, RejectsEmptyOrMixedInput) {
    EXPECT_THROW(aggregate({}), std::invalid_argument);
    ResultRecord other = record(1.0, 0.1, 10);
    other.kind = ExperimentKind::bbm;
    EXPECT_THROW(aggregate({record(1.0, 0.1, 10), other}), std::invalid_argument);
    ResultRecord renamed = record(1.0, 0.1, 10);
    renamed.metrics[0].name = "y";
    EXPECT_THROW(aggregate({record(1.0, 0.1, 10), renamed}), std::invalid_argument);
}

}  // namespace
}  // namespace bvm
