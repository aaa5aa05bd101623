#include <gtest/gtest.h>

#include <cmath>

#include "pcwi/simulation.hpp"
#include "test_support.hpp"

using namespace pcwi;
using pcwi::test_support::small_world;

namespace {

const KnowledgeScores& scores() {
    static const KnowledgeScores s = build_knowledge_scores(*small_world().resources);
    return s;
}

OracleSpec threshold_oracle(double quantile, double noise = 0.0, std::uint64_t seed = 1) {
    OracleSpec o;
    o.id = "o";
    o.cutoff = scores().pool_quantile(quantile);
    o.noise_rate = noise;
    o.noise_seed = seed;
    return o;
}

}  // namespace

TEST(Oracle, BoundaryIsInclusive) {
    const auto& res = *small_world().resources;
    const std::string w = res.pool.entries[3].word;
    OracleSpec o;
    o.cutoff = scores().of(w);
    EXPECT_TRUE(oracle_knows(o, w, scores()));
    EXPECT_TRUE(oracle_answer(o, w, scores()));
    o.cutoff = std::nextafter(o.cutoff, 1e9);
    EXPECT_FALSE(oracle_knows(o, w, scores()));
}

TEST(Oracle, NoiseFlipRateAndDeterminism) {
    const auto& res = *small_world().resources;
    for (double noise : {0.1, 0.5 - 1e-9}) {
        const OracleSpec o = threshold_oracle(0.3, noise, 77);
        std::size_t flips = 0;
        for (const auto& e : res.pool.entries) {
            const bool a = oracle_answer(o, e.word, scores());
            EXPECT_EQ(a, oracle_answer(o, e.word, scores()));
            flips += a != oracle_knows(o, e.word, scores());
        }
        const double rate = static_cast<double>(flips) / static_cast<double>(res.pool.size());
        EXPECT_NEAR(rate, noise, 0.04);
    }
}

TEST(Oracle, ReplayAnswersRecordedLabels) {
    LabelledTestSet set;
    set.items = {{"alpha", 1}, {"beta", 0}};
    const OracleSpec o = replay_oracle(set);
    EXPECT_FALSE(oracle_answer(o, "alpha", scores()));
    EXPECT_TRUE(oracle_answer(o, "beta", scores()));
    EXPECT_THROW(oracle_answer(o, "gamma", scores()), Error);
    const OracleSpec d = replay_oracle(set, true);
    EXPECT_TRUE(oracle_answer(d, "gamma", scores()));
}

TEST(Oracle, QuantileCutoffsSplitPool) {
    const auto& res = *small_world().resources;
    const OracleSpec o = threshold_oracle(0.25);
    std::size_t unknown = 0;
    for (const auto& e : res.pool.entries) unknown += !oracle_knows(o, e.word, scores());
    EXPECT_NEAR(static_cast<double>(unknown) / static_cast<double>(res.pool.size()), 0.25, 0.01);
}

TEST(Strategies, ConfigDerivation) {
    const SessionConfig base;
    EXPECT_TRUE(strategy_config(Strategy::active_learning, base).propagate);
    EXPECT_EQ(strategy_config(Strategy::cluster_random, base).strategy, QueryStrategy::random);
    EXPECT_TRUE(strategy_config(Strategy::cluster_random, base).propagate);
    const SessionConfig r = strategy_config(Strategy::random, base);
    EXPECT_FALSE(r.propagate);
    EXPECT_FALSE(r.keep_seed);
    EXPECT_EQ(strategy_from_string(to_string(Strategy::cluster_random)), Strategy::cluster_random);
}

TEST(Strategies, RunIsDeterministic) {
    const auto res = small_world().resources;
    const OracleSpec o = threshold_oracle(0.2, 0.1, 4);
    for (Strategy s : {Strategy::active_learning, Strategy::cluster_random, Strategy::random}) {
        const StrategyRun a = run_strategy(res, scores(), o, s, 10, 99);
        const StrategyRun b = run_strategy(res, scores(), o, s, 10, 99);
        EXPECT_EQ(a.queried, b.queried);
        EXPECT_EQ(export_model(a.model), export_model(b.model));
        EXPECT_EQ(a.f.macro, b.f.macro);
        EXPECT_EQ(a.queried.size(), 10u);
    }
}

TEST(Strategies, RandomTrainsOnDirectLabelsOnly) {
    const StrategyRun r =
        run_strategy(small_world().resources, scores(), threshold_oracle(0.3), Strategy::random, 12, 5);
    EXPECT_EQ(r.model.trained_on.seed, 0u);
    EXPECT_EQ(r.model.trained_on.propagated, 0u);
    EXPECT_EQ(r.model.trained_on.direct, 12u);
}

TEST(Strategies, BudgetBeyondPoolRejected) {
    EXPECT_THROW(run_strategy(small_world().resources, scores(), threshold_oracle(0.3), Strategy::active_learning,
                              1000000, 1),
                 Error);
}

TEST(Strategies, EvaluationUsesNoiseFreeGold) {
    const auto res = small_world().resources;
    const OracleSpec o = threshold_oracle(0.3, 0.2, 8);
    const StrategyRun r = run_strategy(res, scores(), o, Strategy::active_learning, 8, 3);
    std::vector<int> pred, gold;
    for (const auto& item : res->test_items) {
        pred.push_back(predict_label(r.model, item.features));
        gold.push_back(oracle_knows(o, item.word, scores()) ? 0 : 1);
    }
    const Confusion c = confusion(pred, gold);
    EXPECT_EQ(c.tp, r.test_counts.tp);
    EXPECT_EQ(c.fp, r.test_counts.fp);
    EXPECT_EQ(c.fn, r.test_counts.fn);
    EXPECT_EQ(c.tn, r.test_counts.tn);
}

TEST(Oracles, FamilyIsReproducible) {
    const auto a = make_oracles(scores(), 5, {0.1, 0.35}, 0.1, 3, "x");
    const auto b = make_oracles(scores(), 5, {0.1, 0.35}, 0.1, 3, "x");
    ASSERT_EQ(a.size(), 5u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].cutoff, b[i].cutoff);
        EXPECT_EQ(a[i].noise_seed, b[i].noise_seed);
        EXPECT_GE(a[i].cutoff, scores().pool_quantile(0.1));
        EXPECT_LE(a[i].cutoff, scores().pool_quantile(0.35));
    }
    EXPECT_EQ(a[2].id, "x-002");
}

TEST(StudyConfig, ResolvesRelativePaths) {
    const StudyConfig c = parse_study_config(
        R"({"data": {"pool": "world/pool.tsv", "graded": "/abs/graded.tsv"}, "seed": 3,
            "strategy_study": {"oracles": 4, "strategies": ["random"]},
            "band_study": {"enabled": false}})",
        "/base");
    EXPECT_EQ(c.paths.pool, "/base/world/pool.tsv");
    EXPECT_EQ(c.graded, "/abs/graded.tsv");
    EXPECT_EQ(c.seed, 3u);
    EXPECT_EQ(c.oracles, 4);
    EXPECT_EQ(c.strategies, std::vector<Strategy>{Strategy::random});
    EXPECT_FALSE(c.run_bands);
    EXPECT_THROW(parse_study_config(R"({"strategy_study": {"noise_rate": 0.5}})"), Error);
}

TEST(Study, RerunReproducesEveryNumber) {
    const auto& w = small_world();
    StudyConfig c;
    c.paths = w.paths;
    c.graded = w.dir + "/graded.tsv";
    c.oracles = 6;
    c.models_per_band = 6;
    c.folds = 3;
    c.strategy_budget = 6;
    c.band_budget = 6;
    c.threads = 3;
    const std::string a = pcwi::test_support::make_temp_dir("study-a");
    const std::string b = pcwi::test_support::make_temp_dir("study-b");
    c.threads = 1;
    run_study(c, a);
    c.threads = 4;
    run_study(c, b);
    for (const char* f : {"strategy_summary.csv", "strategy_runs.csv", "band_counts.csv", "band_models.csv",
                          "proficiency.csv"})
        EXPECT_EQ(read_file(a + "/" + f), read_file(b + "/" + f)) << f;
}
