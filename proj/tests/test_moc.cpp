#include <gtest/gtest.h>

#include <random>

#include "recourse/moc.hpp"
#include "test_util.hpp"

using namespace recourse;

namespace {

// Two numeric features on [0, 1], x1 drives the score.
Dataset unit_square(std::size_t n, std::uint64_t seed) {
    FeatureSchema s({FeatureDescriptor::numeric("x1", 0, 1), FeatureDescriptor::numeric("x2", 0, 1)});
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Instance> rows;
    for (std::size_t i = 0; i < n; ++i) rows.push_back(Instance{u(rng), u(rng)});
    return Dataset(s, rows);
}

PredictorPtr first_feature() {
    return FunctionModel::binary([](const Instance& x) { return std::clamp(x[0], 0.0, 1.0); });
}

MocConfig quick(std::size_t gens, std::uint64_t seed = 1) {
    MocConfig c;
    c.n_generations = gens;
    c.seed = seed;
    return c;
}

const DesiredTarget kHigh{0.6, 1.0, std::nullopt};

} // namespace

TEST(MocConfig, DefaultsAndJson) {
    MocConfig c;
    EXPECT_EQ(c.mu, 20u);
    EXPECT_EQ(c.n_generations, 175u);
    EXPECT_EQ(c.p_rec, 0.71);
    EXPECT_EQ(c.p_rec_gen, 0.62);
    EXPECT_EQ(c.p_mut, 0.73);
    EXPECT_EQ(c.p_mut_gen, 0.5);
    EXPECT_EQ(c.p_mut_use_orig, 0.4);
    EXPECT_EQ(c.k, 1u);
    EXPECT_EQ(c.init_strategy, InitStrategy::icecurve);
    auto back = moc_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    auto mod = moc_config_from_json(json{{"mu", 8}, {"init_strategy", "sd"}, {"epsilon", 0.0}});
    EXPECT_EQ(mod.mu, 8u);
    EXPECT_EQ(mod.init_strategy, InitStrategy::sd);
    EXPECT_EQ(mod.epsilon, 0.0);
    EXPECT_THROW(moc_config_from_json(json{{"mu_typo", 8}}), Error);
    EXPECT_THROW(moc_config_from_json(json{{"p_mut", 1.5}}), Error);
    EXPECT_THROW(moc_config_from_json(json{{"init_strategy", "magic"}}), Error);
}

TEST(SearchSpace, BoundsAndFixedFeatures) {
    auto data = unit_square(50, 1);
    MocConfig c;
    c.fixed_features = {"x2"};
    c.lower = {{"x1", 0.2}};
    Instance x_star{0.1, 0.5};
    auto s = resolve_search_space(data, x_star, c);
    EXPECT_TRUE(s.mutable_mask[0]);
    EXPECT_FALSE(s.mutable_mask[1]);
    // x⋆ lies below the configured lower bound, so the bound widens to it.
    EXPECT_EQ(s.lower[0], 0.1);
    EXPECT_EQ(s.upper[0], data.observed_max(0));
    c.upper = {{"x1", 0.1}};
    c.lower = {{"x1", 0.3}};
    EXPECT_THROW(resolve_search_space(data, x_star, c), Error);
}

TEST(Initialization, AllFixedGivesCopiesOfXStar) {
    auto data = unit_square(30, 2);
    MocConfig c = quick(5);
    c.fixed_features = {"x1", "x2"};
    Instance x_star{0.3, 0.4};
    MocSearch search(first_feature(), x_star, kHigh, data, c);
    auto pop = search.initial_instances();
    ASSERT_EQ(pop.size(), c.mu);
    for (const auto& x : pop) EXPECT_EQ(x, x_star);
}

TEST(Initialization, SdStrategyStaysWithinOneSd) {
    auto data = testutil::random_mixed_dataset(80, 4, 1, 3);
    MocConfig c = quick(5);
    c.init_strategy = InitStrategy::sd;
    c.mu = 60;
    Instance x_star = data.row(0);
    MocSearch search(fit_knn(data, 5), x_star, kHigh, data, c);
    for (const auto& x : search.initial_instances()) {
        for (std::size_t j = 0; j < 4; ++j) {
            EXPECT_GE(x[j], x_star[j] - data.sd(j) - 1.0) << j; // integer rounding slack
            EXPECT_LE(x[j], x_star[j] + data.sd(j) + 1.0) << j;
            if (j % 3 != 2) {
                EXPECT_GE(x[j], x_star[j] - data.sd(j));
                EXPECT_LE(x[j], x_star[j] + data.sd(j));
            } else {
                EXPECT_EQ(x[j], std::round(x[j]));
            }
        }
    }
}

TEST(Initialization, TraindataFillsToMu) {
    auto data = testutil::random_mixed_dataset(6, 2, 1, 4);
    MocConfig c = quick(5);
    c.init_strategy = InitStrategy::traindata;
    c.mu = 12;
    MocSearch search(fit_knn(data, 1), data.row(0), kHigh, data, c);
    auto pop = search.initial_instances();
    EXPECT_EQ(pop.size(), 12u);
    const auto& sp = search.space();
    for (const auto& x : pop)
        for (std::size_t j = 0; j < 2; ++j) {
            EXPECT_GE(x[j], sp.lower[j]);
            EXPECT_LE(x[j], sp.upper[j]);
        }
}

TEST(Initialization, EveryStrategyYieldsMuIndividuals) {
    auto data = unit_square(40, 5);
    for (auto s : {InitStrategy::random, InitStrategy::sd, InitStrategy::traindata, InitStrategy::icecurve}) {
        auto pop = initialize_population(s, Instance{0.3, 0.3}, data, first_feature(), kHigh, quick(3));
        EXPECT_EQ(pop.size(), 20u) << to_string(s);
        for (const auto& ind : pop) EXPECT_EQ(ind.generation_born, 0u);
    }
}

TEST(IceImportance, ConstantPredictorIsZero) {
    auto data = unit_square(20, 6);
    auto f = FunctionModel::binary([](const Instance&) { return 0.4; });
    EXPECT_NEAR(ice_importance(Instance{0.5, 0.5}, *f, data, 0, kHigh), 0.0, 1e-12);
}

TEST(IceImportance, LinearPredictorMatchesGridSd) {
    FeatureSchema s({FeatureDescriptor::numeric("x1"), FeatureDescriptor::numeric("x2")});
    Dataset data(s, {Instance{0.0, 0.0}, Instance{1.0, 1.0}});
    auto f = first_feature();
    double mean = 0.5, ss = 0.0;
    for (int t = 0; t < 20; ++t) ss += (t / 19.0 - mean) * (t / 19.0 - mean);
    EXPECT_NEAR(ice_importance(Instance{0.2, 0.2}, *f, data, 0, kHigh), std::sqrt(ss / 19.0), 1e-12);
    EXPECT_NEAR(ice_importance(Instance{0.2, 0.2}, *f, data, 1, kHigh), 0.0, 1e-12);
}

TEST(Recombine, NoRecombinationIsIdentity) {
    std::mt19937_64 rng(1);
    MocConfig c;
    c.p_rec = 0.0;
    Instance a{1, 2, 3}, b{4, 5, 6};
    auto [c1, c2] = recombine(a, b, {true, true, true}, c, rng);
    EXPECT_EQ(c1, a);
    EXPECT_EQ(c2, b);
}

TEST(Recombine, FullRecombinationSwapsMutableGenes) {
    std::mt19937_64 rng(1);
    MocConfig c;
    c.p_rec = 1.0;
    c.p_rec_gen = 1.0;
    auto [c1, c2] = recombine(Instance{1, 2, 3}, Instance{4, 5, 6}, {true, false, true}, c, rng);
    EXPECT_EQ(c1, (Instance{4, 2, 6}));
    EXPECT_EQ(c2, (Instance{1, 5, 3}));
}

TEST(Recombine, GeneSwapFrequency) {
    std::mt19937_64 rng(2);
    MocConfig c;
    c.p_rec = 1.0;
    c.p_rec_gen = 0.5;
    const int trials = 4000;
    int swaps = 0;
    for (int t = 0; t < trials; ++t) swaps += recombine(Instance{0}, Instance{1}, {true}, c, rng).first[0] == 1;
    double se = std::sqrt(0.25 / trials);
    EXPECT_NEAR(swaps / double(trials), 0.5, 4 * se);
}

TEST(Mutate, ZeroProbabilityIsIdentity) {
    auto data = testutil::random_mixed_dataset(30, 3, 2, 7);
    MocConfig c;
    c.p_mut = 0.0;
    std::mt19937_64 rng(3);
    auto space = resolve_search_space(data, data.row(0), c);
    EXPECT_EQ(mutate(data.row(1), data.row(0), space, data, c, rng), data.row(1));
}

TEST(Mutate, TwoLevelCategoricalAlwaysFlips) {
    FeatureSchema s({FeatureDescriptor::categorical("c", {"u", "v"})});
    Dataset data(s, {Instance{0.0}, Instance{1.0}});
    MocConfig c;
    c.p_mut = 1.0;
    c.p_mut_gen = 1.0;
    c.p_mut_use_orig = 0.0;
    std::mt19937_64 rng(4);
    auto space = resolve_search_space(data, Instance{0.0}, c);
    for (int t = 0; t < 20; ++t) EXPECT_EQ(mutate(Instance{0.0}, Instance{0.0}, space, data, c, rng), Instance{1.0});
}

TEST(Mutate, ResultsStayInBoundsAndIntegral) {
    auto data = testutil::random_mixed_dataset(50, 3, 2, 8);
    MocConfig c;
    c.p_mut = 1.0;
    c.p_mut_gen = 1.0;
    c.p_mut_use_orig = 0.0;
    c.lower = {{"num0", 2.0}};
    c.upper = {{"num0", 4.0}};
    Instance x_star = data.row(0);
    x_star[0] = 3.0;
    auto space = resolve_search_space(data, x_star, c);
    std::mt19937_64 rng(5);
    Instance x = x_star;
    for (int t = 0; t < 300; ++t) {
        x = mutate(x, x_star, space, data, c, rng);
        for (std::size_t j = 0; j < 3; ++j) {
            EXPECT_GE(x[j], space.lower[j]);
            EXPECT_LE(x[j], space.upper[j]);
        }
        EXPECT_EQ(x[2], std::round(x[2]));
        EXPECT_LE(x[0], 4.0);
        EXPECT_GE(x[0], 2.0);
    }
}

TEST(MaxChanged, CapIsEnforced) {
    std::mt19937_64 rng(6);
    Instance x_star{0, 0, 0, 0, 0};
    for (int t = 0; t < 50; ++t) {
        Instance x{1, 2, 3, 4, 5};
        enforce_max_changed(x, x_star, 2, rng);
        EXPECT_EQ(testutil::oracle_l0(x, x_star), 2);
    }
}

TEST(MocRun, FindsValidCounterfactualOnLinearScore) {
    auto data = unit_square(200, 9);
    auto res = find_counterfactuals_moc(first_feature(), Instance{0.3, 0.5}, kHigh, data, quick(40));
    ASSERT_FALSE(res.set.empty());
    bool any_valid = false;
    for (const auto& ind : res.individuals) any_valid = any_valid || ind.objectives.valid == 0.0;
    EXPECT_TRUE(any_valid);
}

TEST(MocRun, ReturnedSetIsMutuallyNondominatedAndExact) {
    auto data = testutil::random_mixed_dataset(120, 3, 2, 10);
    auto f = fit_knn(data, 5);
    Instance x_star = data.row(3);
    auto res = find_counterfactuals_moc(f, x_star, kHigh, data, quick(25, 4));
    ASSERT_EQ(res.individuals.size(), res.set.size());
    for (std::size_t i = 0; i < res.individuals.size(); ++i) {
        const auto& a = res.individuals[i];
        EXPECT_EQ(a.instance, res.set[i]);
        EXPECT_NE(a.instance, x_star);
        double s = predict_score(*f, a.instance, kHigh);
        EXPECT_NEAR(a.objectives.valid, testutil::oracle_valid(s, 0.6, 1.0), 1e-12);
        EXPECT_NEAR(a.objectives.prox, testutil::oracle_gower(a.instance, x_star, data), 1e-12);
        EXPECT_EQ(a.objectives.sparse, testutil::oracle_l0(a.instance, x_star));
        EXPECT_NEAR(a.objectives.plaus, testutil::oracle_plaus(a.instance, data, 1), 1e-12);
        for (const auto& b : res.individuals)
            EXPECT_FALSE(testutil::oracle_dominates(b.objectives.to_vector(), a.objectives.to_vector()));
    }
}

TEST(MocRun, ConstraintsAreRespected) {
    auto data = testutil::random_mixed_dataset(100, 4, 2, 11);
    Instance x_star = data.row(0);
    MocConfig c = quick(20, 5);
    c.fixed_features = {"num1", "cat0"};
    c.max_changed = 2;
    c.lower = {{"num0", 1.0}};
    c.upper = {{"num0", 6.0}};
    auto res = find_counterfactuals_moc(fit_knn(data, 3), x_star, kHigh, data, c);
    double lo = std::min(1.0, x_star[0]), hi = std::max(6.0, x_star[0]);
    for (const auto& x : res.set.counterfactuals()) {
        EXPECT_EQ(x[1], x_star[1]);
        EXPECT_EQ(x[4], x_star[4]);
        EXPECT_LE(testutil::oracle_l0(x, x_star), 2);
        EXPECT_GE(x[0], lo);
        EXPECT_LE(x[0], hi);
        EXPECT_EQ(x[2], std::round(x[2]));
    }
}

TEST(MocRun, SameSeedIsDeterministic) {
    auto data = testutil::random_mixed_dataset(80, 3, 1, 12);
    auto f = fit_knn(data, 3);
    auto a = find_counterfactuals_moc(f, data.row(1), kHigh, data, quick(15, 42));
    auto b = find_counterfactuals_moc(f, data.row(1), kHigh, data, quick(15, 42));
    EXPECT_EQ(a.set.counterfactuals(), b.set.counterfactuals());
    EXPECT_EQ(generation_log_csv(a.log), generation_log_csv(b.log));
}

TEST(MocRun, AllFixedWithValidXStarIsEmpty) {
    auto data = unit_square(30, 13);
    MocConfig c = quick(5);
    c.fixed_features = {"x1", "x2"};
    auto res = find_counterfactuals_moc(first_feature(), Instance{0.8, 0.5}, kHigh, data, c);
    EXPECT_TRUE(res.set.empty());
    try {
        find_counterfactuals_moc(first_feature(), Instance{0.2, 0.5}, kHigh, data, c);
        FAIL() << "expected a search-space error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::search_space);
    }
}

TEST(MocRun, GenstagStopsAfterWindowWithoutGain) {
    auto data = unit_square(60, 14);
    MocConfig c = quick(4, 3);
    c.termination = Termination::genstag;
    c.max_generations = 60;
    auto res = find_counterfactuals_moc(first_feature(), Instance{0.3, 0.5}, kHigh, data, c);
    const auto& g = res.log.generations;
    ASSERT_FALSE(g.empty());
    ASSERT_LE(g.size(), 60u);
    if (g.size() < 60) {
        double best = res.log.initial->hv;
        for (std::size_t i = 0; i + 4 < g.size(); ++i) best = std::max(best, g[i].hv);
        for (std::size_t i = g.size() - 4; i < g.size(); ++i) EXPECT_LE(g[i].hv, best + 1e-12);
    }
}

TEST(MocRun, HypervolumeReferenceUsesXStarScore) {
    auto data = unit_square(30, 15);
    MocSearch search(first_feature(), Instance{0.25, 0.5}, kHigh, data, quick(1));
    EXPECT_EQ(search.reference(), (Point{0.35, 1.0, 2.0, 1.0}));
}

TEST(Statistics, SingleGenerationGivesOneRow) {
    auto data = unit_square(50, 16);
    auto res = find_counterfactuals_moc(first_feature(), Instance{0.3, 0.5}, kHigh, data, quick(1));
    auto t = moc_statistics(res.log);
    ASSERT_EQ(t.rows.size(), 1u);
    ASSERT_EQ(t.columns.size(), 11u);
    EXPECT_EQ(t.rows[0][0], 1.0);
    EXPECT_FALSE(t.svg.empty());
}

TEST(Statistics, ArchiveHvIsMonotoneAndScaledValuesInUnitInterval) {
    auto data = unit_square(80, 17);
    auto res = find_counterfactuals_moc(first_feature(), Instance{0.3, 0.5}, kHigh, data, quick(25, 9));
    auto t = moc_statistics(res.log);
    ASSERT_EQ(t.rows.size(), 25u);
    for (std::size_t r = 1; r < t.rows.size(); ++r) EXPECT_GE(t.rows[r][10], t.rows[r - 1][10] - 1e-12);
    for (const auto& row : t.rows) EXPECT_GE(row[10], row[9] - 1e-12);
    auto s = moc_statistics(res.log, true);
    for (const auto& row : s.rows)
        for (std::size_t c = 1; c < row.size(); ++c) {
            EXPECT_GE(row[c], 0.0);
            EXPECT_LE(row[c], 1.0);
        }
}

TEST(Trace, CountsEveryEvaluatedMember) {
    auto data = unit_square(40, 18);
    auto res = find_counterfactuals_moc(first_feature(), Instance{0.3, 0.5}, kHigh, data, quick(6, 2));
    auto t = moc_search_trace(res.log, "dist_target", "dist_x_interest");
    EXPECT_EQ(t.rows.size(), 20u * 7u);
    EXPECT_EQ(t.objective_a, "dist_target");
    const auto& last = res.log.generations.back().snapshot;
    for (std::size_t i = 0; i < last.size(); ++i) {
        const auto& row = t.rows[t.rows.size() - last.size() + i];
        EXPECT_EQ(row[0], last[i].valid);
        EXPECT_EQ(row[1], last[i].prox);
        EXPECT_EQ(row[2], 6.0);
    }
    EXPECT_THROW(moc_search_trace(res.log, "dist_target", "nope"), Error);
}

TEST(Trace, EmptyLogGivesEmptyTables) {
    GenerationLog log;
    EXPECT_TRUE(moc_search_trace(log, "dist_target", "no_changed").rows.empty());
    EXPECT_TRUE(moc_statistics(log).rows.empty());
}
