#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "pcwi/metrics.hpp"

using namespace pcwi;

namespace {

// Builds pred/gold sequences with the given confusion counts.
void expand(const Confusion& c, std::vector<int>& pred, std::vector<int>& gold) {
    auto push = [&](std::size_t n, int p, int g) {
        for (std::size_t i = 0; i < n; ++i) {
            pred.push_back(p);
            gold.push_back(g);
        }
    };
    push(c.tp, 1, 1);
    push(c.fp, 1, 0);
    push(c.fn, 0, 1);
    push(c.tn, 0, 0);
}

LabelledTestSet make_set(const std::string& id, std::vector<std::pair<std::string, int>> items) {
    LabelledTestSet s;
    s.annotator_id = id;
    s.items = std::move(items);
    return s;
}

}  // namespace

TEST(Kappa, HandDerivedTable) {
    // Rows are pred, columns gold: [[20,5],[10,15]]; p_o = 0.7, p_e = 0.5.
    Confusion c{20, 5, 10, 15};
    const Kappa k = cohen_kappa(c);
    EXPECT_NEAR(k.value, 0.4, 1e-12);
    EXPECT_FALSE(k.degenerate);
}

TEST(Kappa, IdenticalNonConstantSequencesGiveOne) {
    const std::vector<int> a = {0, 1, 1, 0, 1, 0, 0};
    EXPECT_DOUBLE_EQ(cohen_kappa(a, a).value, 1.0);
}

TEST(Kappa, SymmetricAndInvariantUnderRelabeling) {
    const std::vector<int> a = {0, 1, 1, 0, 1, 0, 0, 1, 1, 1};
    const std::vector<int> b = {0, 1, 0, 0, 1, 1, 0, 1, 0, 1};
    std::vector<int> na, nb;
    for (int v : a) na.push_back(1 - v);
    for (int v : b) nb.push_back(1 - v);
    EXPECT_NEAR(cohen_kappa(a, b).value, cohen_kappa(b, a).value, 1e-15);
    EXPECT_NEAR(cohen_kappa(a, b).value, cohen_kappa(na, nb).value, 1e-15);
}

TEST(Kappa, IndependentRandomRatersNearZero) {
    Rng rng(12345);
    std::vector<int> a(10000), b(10000);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.uniform() < 0.5;
        b[i] = rng.uniform() < 0.5;
    }
    EXPECT_LT(std::abs(cohen_kappa(a, b).value), 0.05);
}

TEST(Kappa, ConstantRatersAreFlagged) {
    const std::vector<int> zeros(5, 0);
    const Kappa same = cohen_kappa(zeros, zeros);
    EXPECT_TRUE(same.degenerate);
    EXPECT_DOUBLE_EQ(same.value, 1.0);
    const std::vector<int> gold = {0, 1, 0, 0, 1};
    EXPECT_TRUE(cohen_kappa(zeros, gold).degenerate);
    EXPECT_DOUBLE_EQ(cohen_kappa(zeros, gold).value, 0.0);
}

TEST(Kappa, RangeOnRandomTables) {
    Rng rng(7);
    for (int t = 0; t < 500; ++t) {
        Confusion c{rng.below(20), rng.below(20), rng.below(20), rng.below(20) + 1};
        const double k = cohen_kappa(c).value;
        EXPECT_GE(k, -1.0 - 1e-12);
        EXPECT_LE(k, 1.0 + 1e-12);
    }
}

TEST(FScore, DirectFormula) {
    // tp=3, fp=1, fn=2 -> P=0.75, R=0.6.
    Confusion c{3, 1, 2, 10};
    EXPECT_NEAR(f_score(c), 2 * 0.75 * 0.6 / (0.75 + 0.6), 1e-15);
    std::vector<int> pred, gold;
    expand(c, pred, gold);
    EXPECT_NEAR(f_score(pred, gold), 2.0 / 3.0, 1e-12);
}

TEST(FScore, PerfectPredictionIsOne) {
    const std::vector<int> g = {1, 0, 0, 1, 0};
    const FScores f = f_scores(confusion(g, g));
    EXPECT_DOUBLE_EQ(f.positive, 1.0);
    EXPECT_DOUBLE_EQ(f.macro, 1.0);
    EXPECT_DOUBLE_EQ(f.micro, 1.0);
}

TEST(FScore, ZeroDenominatorIsZero) {
    EXPECT_DOUBLE_EQ(f_score(Confusion{0, 0, 0, 5}), 0.0);
}

TEST(FScore, MacroIsMeanOfClassScores) {
    Confusion c{4, 2, 1, 9};
    const FScores f = f_scores(c);
    const double neg = 2.0 * 9 / (2.0 * 9 + 1 + 2);
    EXPECT_NEAR(f.negative, neg, 1e-15);
    EXPECT_NEAR(f.macro, (f.positive + f.negative) / 2, 1e-15);
    EXPECT_NEAR(f.micro, 13.0 / 16.0, 1e-15);
}

TEST(FScore, MacroSkipsClassAbsentEverywhere) {
    // No complex word in gold or predictions: only the simple class counts.
    const FScores f = f_scores(Confusion{0, 0, 0, 6});
    EXPECT_DOUBLE_EQ(f.macro, 1.0);
}

TEST(FScore, LengthMismatchThrows) {
    const std::vector<int> a = {0, 1}, b = {0};
    EXPECT_THROW(confusion(a, b), Error);
    const std::vector<int> c = {0, 2};
    EXPECT_THROW(confusion(c, a), Error);
}

TEST(GroupAverage, StrictThresholdAndLeaveOneOut) {
    // Ten annotators; word "two" marked complex by 2, "one" by 1, "none" by 0.
    std::vector<LabelledTestSet> group;
    for (int i = 0; i < 10; ++i)
        group.push_back(make_set("a" + std::to_string(i), {{"two", i < 2}, {"one", i < 1}, {"none", 0}}));
    const LabelledTestSet target = make_set("outsider", {{"two", 0}, {"one", 0}, {"none", 0}, {"unseen", 1}});
    const auto p = baseline_group_average(group, target);
    EXPECT_EQ(p.labels, (std::vector<int>{1, 0, 0, 0}));
    EXPECT_EQ(p.flagged, (std::vector<std::string>{"unseen"}));

    // The target's own vote is left out: a0 marks "one" complex, leaving 0 of 9.
    const auto self = baseline_group_average(group, group[0]);
    EXPECT_EQ(self.labels[1], 0);
}

TEST(GroupAverage, SingletonGroupReproducesAnnotator) {
    const LabelledTestSet s = make_set("a", {{"x", 1}, {"y", 0}, {"z", 1}});
    const std::vector<LabelledTestSet> group = {s};
    EXPECT_EQ(baseline_group_average(group, s, 0.10, false).labels, s.labels());
}

TEST(FrequencyBaseline, Extremes) {
    const std::unordered_map<std::string, double> freq = {{"a", 5.0}, {"b", 0.5}};
    const std::vector<std::string> words = {"a", "b", "missing"};
    EXPECT_EQ(baseline_frequency(freq, 0.0, words), (std::vector<int>{0, 0, 0}));
    EXPECT_EQ(baseline_frequency(freq, std::numeric_limits<double>::infinity(), words), (std::vector<int>{1, 1, 1}));
    EXPECT_EQ(baseline_frequency(freq, 1.0, words), (std::vector<int>{0, 1, 1}));
}

TEST(FrequencyBaseline, SweepRecoversFrequencyCut) {
    Rng rng(3);
    std::unordered_map<std::string, double> freq;
    std::vector<std::pair<std::string, int>> gold;
    const double cut = 12.5;
    for (int i = 0; i < 60; ++i) {
        const std::string w = "w" + std::to_string(i);
        freq[w] = std::exp(rng.uniform(-1.0, 6.0));
        gold.emplace_back(w, freq[w] < cut ? 1 : 0);
    }
    const double t = sweep_frequency_threshold(freq, gold);
    std::vector<std::string> words;
    std::vector<int> labels;
    for (const auto& [w, l] : gold) {
        words.push_back(w);
        labels.push_back(l);
    }
    EXPECT_DOUBLE_EQ(f_scores(confusion(baseline_frequency(freq, t, words), labels)).macro, 1.0);
}

TEST(AllSimple, ConstantRaterFlagged) {
    const auto pred = baseline_all_simple(4);
    EXPECT_EQ(pred, (std::vector<int>{0, 0, 0, 0}));
    const std::vector<int> gold = {0, 0, 0, 1};
    EXPECT_TRUE(cohen_kappa(pred, gold).degenerate);
    EXPECT_DOUBLE_EQ(f_scores(confusion(pred, gold)).negative, 2.0 * 3 / (2.0 * 3 + 1));
}

TEST(External, RoundTripAndMissingWord) {
    const std::map<std::string, int> labels = {{"alpha", 1}, {"beta", 0}};
    const auto parsed = parse_external_predictions(external_predictions_tsv(labels));
    const std::vector<std::string> words = {"beta", "alpha"};
    EXPECT_EQ(baseline_external(parsed, words), (std::vector<int>{0, 1}));
    const std::vector<std::string> missing = {"gamma"};
    EXPECT_THROW(baseline_external(parsed, missing), Error);
}

TEST(TestSet, TsvRoundTrip) {
    const LabelledTestSet s = make_set("p1", {{"cat", 0}, {"ubiquitous", 1}});
    const LabelledTestSet back = parse_test_set(test_set_tsv(s), "p1");
    EXPECT_EQ(back.items, s.items);
}

TEST(Report, CellsPoolIntoAllColumn) {
    EvaluationReport r;
    const std::vector<int> g1 = {1, 0, 1}, p1 = {1, 0, 0};
    const std::vector<int> g2 = {0, 0}, p2 = {1, 0};
    r.add("model", "advanced", p1, g1);
    r.add("model", "native", p2, g2);
    const ReportCell& all = r.cell("model", "all");
    EXPECT_EQ(all.counts.total(), 5u);
    EXPECT_EQ(all.counts.tp, 1u);
    EXPECT_EQ(all.counts.fp, 1u);
    EXPECT_EQ(all.counts.fn, 1u);
    EXPECT_EQ(all.counts.tn, 2u);
    EXPECT_EQ(r.groups(), (std::vector<std::string>{"advanced", "native", "all"}));
    const std::string csv = r.table_csv();
    EXPECT_NE(csv.find("test_size"), std::string::npos);
    EXPECT_NE(csv.find("kappa"), std::string::npos);
}
