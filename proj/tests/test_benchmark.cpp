#include <gtest/gtest.h>

#include <random>

#include "recourse/benchmark.hpp"
#include "test_util.hpp"

using namespace recourse;

namespace {

ObjectiveVector ov(double v, double p, double s, double q) { return {v, p, s, q}; }

json small_spec() {
    return json{{"seed", 3},
                {"n_query_points", 2},
                {"datasets", json::array({json{{"name", "syn"}, {"synthetic", {{"n", 60}, {"numeric", 3}, {"seed", 4}}}}})},
                {"predictors", json::array({json{{"name", "knn"}, {"spec", "builtin:knn:k=5"}}})},
                {"configs", {{"moc", {{"max_generations", 25}, {"mu", 12}}}}}};
}

// Ranks by brute-force counting: rank = 1 + #smaller + (#equal - 1) / 2.
std::vector<double> oracle_ranks(const std::vector<double>& v) {
    std::vector<double> out;
    for (double a : v) {
        double smaller = 0, equal = 0;
        for (double b : v) {
            smaller += b < a;
            equal += b == a;
        }
        double r = 1 + smaller + (equal - 1) / 2;
        out.push_back(v.size() > 1 ? (r - 1) / static_cast<double>(v.size() - 1) : 0.0);
    }
    return out;
}

} // namespace

TEST(FlipTarget, OppositeHalf) {
    auto low = flip_target(0.2);
    EXPECT_GT(low.lower, 0.5);
    EXPECT_EQ(low.upper, 1.0);
    EXPECT_FALSE(low.contains(0.5));
    auto tie = flip_target(0.5);
    EXPECT_GT(tie.lower, 0.5);
    auto high = flip_target(0.9);
    EXPECT_EQ(high.lower, 0.0);
    EXPECT_EQ(high.upper, 0.5);
    EXPECT_TRUE(high.contains(0.5));
}

TEST(Filter, NondominatedValidSetIsUnchanged) {
    MethodCandidates m{"moc", {Instance{1}, Instance{2}, Instance{3}},
                       {ov(0, 0.1, 3, 0.5), ov(0, 0.2, 2, 0.4), ov(0, 0.3, 1, 0.3)}};
    auto f = filter_for_comparison({m}).front();
    EXPECT_EQ(f.n_overall, 3u);
    EXPECT_EQ(f.n_valid, 3u);
    EXPECT_EQ(f.n_nondom, 3u);
    EXPECT_EQ(f.members, m.members);
}

TEST(Filter, InvalidAndDominatedMembersDropped) {
    MethodCandidates m{"whatif", {Instance{1}, Instance{2}, Instance{3}, Instance{4}},
                       {ov(0, 0.1, 1, 0.1), ov(0.2, 0.0, 0, 0.0), ov(0, 0.2, 2, 0.2), ov(0, 0.05, 2, 0.3)}};
    auto f = filter_for_comparison({m}).front();
    EXPECT_EQ(f.n_overall, 4u);
    EXPECT_EQ(f.n_valid, 3u);
    EXPECT_EQ(f.members, (std::vector<Instance>{Instance{1}, Instance{4}}));
}

TEST(Filter, RandomizedAgainstOracle) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 30; ++trial) {
        MethodCandidates m{"x", {}, {}};
        for (int i = 0; i < 15; ++i) {
            m.members.push_back(Instance{double(i)});
            m.objectives.push_back(ov(u(rng) < 0.3 ? 0.1 : 0.0, std::round(u(rng) * 4) / 4, std::floor(u(rng) * 3),
                                      std::round(u(rng) * 4) / 4));
        }
        auto f = filter_for_comparison({m}).front();
        std::vector<Instance> expected;
        for (int i = 0; i < 15; ++i) {
            if (m.objectives[i].valid != 0.0) continue;
            bool dom = false;
            for (int k = 0; k < 15; ++k)
                dom = dom || (m.objectives[k].valid == 0.0 &&
                              testutil::oracle_dominates(m.objectives[k].to_vector(), m.objectives[i].to_vector()));
            if (!dom) expected.push_back(m.members[i]);
        }
        EXPECT_EQ(f.members, expected);
    }
}

TEST(Ranks, TwoDistinctValues) {
    std::vector<double> v{5, 1};
    EXPECT_EQ(normalized_ranks(v), (std::vector<double>{1.0, 0.0}));
}

TEST(Ranks, TiesShareMeanRank) {
    std::vector<double> v{2, 2, 2};
    for (double r : normalized_ranks(v)) EXPECT_DOUBLE_EQ(r, 0.5);
    std::vector<double> one{7};
    EXPECT_EQ(normalized_ranks(one), (std::vector<double>{0.0}));
}

TEST(Ranks, SevenMemberOracle) {
    std::vector<double> v{0.3, 0.1, 0.3, 0.9, 0.0, 0.1, 0.3};
    auto got = normalized_ranks(v);
    auto want = oracle_ranks(v);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_DOUBLE_EQ(got[i], want[i]);
}

TEST(Ranks, InvariantUnderMonotoneTransform) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> v, w;
        for (int i = 0; i < 12; ++i) {
            v.push_back(std::round(u(rng) * 5));
            w.push_back(std::exp(3 * v.back()) + 1);
        }
        EXPECT_EQ(normalized_ranks(v), normalized_ranks(w));
        for (double r : normalized_ranks(v)) {
            EXPECT_GE(r, 0.0);
            EXPECT_LE(r, 1.0);
        }
    }
}

TEST(BenchmarkHv, EdgeCases) {
    EXPECT_EQ(benchmark_hv(std::vector<ObjectiveVector>{}, 4), 0.0);
    EXPECT_DOUBLE_EQ(benchmark_hv(std::vector<ObjectiveVector>{ov(0, 0, 0, 0)}, 4), 4.0);
    std::vector<ObjectiveVector> a{ov(0, 0.2, 1, 0.3), ov(0, 0.4, 0, 0.5)};
    double base = benchmark_hv(a, 3);
    a.push_back(ov(0, 0.5, 2, 0.6));
    EXPECT_DOUBLE_EQ(benchmark_hv(a, 3), base);
}

TEST(RankNormalize, GroupsAndOverallNondomination) {
    std::vector<BenchmarkRecord> recs(4);
    for (std::size_t i = 0; i < 4; ++i) {
        recs[i].dataset = "d";
        recs[i].model = "m";
        recs[i].x_interest_id = i < 3 ? 0 : 1;
        recs[i].method = i % 2 ? "moc" : "whatif";
    }
    recs[0].objectives = ov(0, 0.1, 1, 0.1);
    recs[1].objectives = ov(0, 0.2, 2, 0.2);
    recs[2].objectives = ov(0, 0.3, 1, 0.0);
    recs[3].objectives = ov(0, 0.9, 3, 0.9);
    rank_normalize(recs);
    EXPECT_TRUE(recs[0].nondominated_overall);
    EXPECT_FALSE(recs[1].nondominated_overall);
    EXPECT_TRUE(recs[2].nondominated_overall);
    EXPECT_TRUE(recs[3].nondominated_overall);
    EXPECT_DOUBLE_EQ(recs[0].rank[1], 0.0);
    EXPECT_DOUBLE_EQ(recs[2].rank[1], 1.0);
    EXPECT_DOUBLE_EQ(recs[0].rank[2], 0.25);
    EXPECT_DOUBLE_EQ(recs[3].rank[1], 0.0);
}

TEST(BenchmarkSpec, MalformedSpecsRejected) {
    EXPECT_THROW(benchmark_spec_from_json(json::array()), Error);
    auto s = small_spec();
    s["predictors"] = json::array();
    EXPECT_THROW(benchmark_spec_from_json(s), Error);
    s = small_spec();
    s["methods"] = {"moc", "dice"};
    EXPECT_THROW(benchmark_spec_from_json(s), Error);
    s = small_spec();
    s["unknown"] = 1;
    EXPECT_THROW(benchmark_spec_from_json(s), Error);
    s = small_spec();
    s["predictors"][0]["spec"] = "builtin:forest";
    EXPECT_THROW(benchmark_spec_from_json(s), Error);
    s = small_spec();
    s["n_query_points"] = 60;
    EXPECT_THROW(benchmark_spec_from_json(s), Error);
}

TEST(BenchmarkSpec, DefaultsFollowHarnessSettings) {
    auto spec = benchmark_spec_from_json(small_spec());
    EXPECT_EQ(spec.configs.moc.termination, Termination::genstag);
    EXPECT_EQ(spec.configs.moc.n_generations, 10u);
    EXPECT_EQ(spec.configs.moc.max_generations, 25u);
    EXPECT_EQ(spec.configs.whatif.n_counterfactuals, 10u);
    EXPECT_FALSE(spec.configs.nice.finish_early);
}

TEST(RunBenchmark, CellCountAndDeterminismAcrossWorkers) {
    auto spec = benchmark_spec_from_json(small_spec());
    auto a = run_benchmark(spec, 1);
    auto b = run_benchmark(spec, 3);
    EXPECT_EQ(a.cells.size(), 1u * 1u * 2u * 3u);
    EXPECT_EQ(a.cells_csv(), b.cells_csv());
    EXPECT_EQ(a.records_csv(), b.records_csv());
    for (const auto& c : a.cells) {
        EXPECT_LE(c.n_nondom, c.n_valid);
        EXPECT_LE(c.n_valid, c.n_overall);
        EXPECT_GE(c.hv, 0.0);
        EXPECT_LE(c.hv, 3.0);
    }
    for (const auto& r : a.records) EXPECT_EQ(r.objectives.valid, 0.0);
    auto summary = a.summary_json();
    EXPECT_EQ(summary["n_cells"], 6);
    EXPECT_EQ(a.svgs().count("hv.svg"), 1u);
}

TEST(RunBenchmark, RuntimeRowsPerFractionAndMethod) {
    auto j = small_spec();
    j["methods"] = {"whatif"};
    j["runtime"] = {{"row_fractions", {0.5, 1.0}}, {"column_fractions", {0.34}}, {"methods", {"whatif", "nice"}}};
    auto report = run_benchmark(benchmark_spec_from_json(j));
    ASSERT_EQ(report.runtime.size(), 3u * 2u);
    EXPECT_EQ(report.runtime[0].subset, "rows");
    EXPECT_EQ(report.runtime[0].n, 29u);
    EXPECT_EQ(report.runtime[2].n, 58u);
    EXPECT_EQ(report.runtime[4].subset, "columns");
    EXPECT_EQ(report.runtime[4].p, 2u);
    for (const auto& r : report.runtime) EXPECT_GE(r.runtime_ms, 0.0);
    EXPECT_NE(report.runtime_csv().find("columns"), std::string::npos);
}
