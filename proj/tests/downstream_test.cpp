#include <gtest/gtest.h>

#include "pcwi/downstream.hpp"
#include "test_support.hpp"

using namespace pcwi;

namespace {

PersonalModel constant_model(double bias, std::size_t d) {
    PersonalModel m;
    m.weights.assign(d, 0.0);
    m.bias = bias;
    return m;
}

}  // namespace

TEST(Ordinal, SeparableBandsFitExactly) {
    std::vector<BandSample> samples;
    for (int i = 0; i < 10; ++i) {
        samples.push_back({300.0 + i, "intermediate"});
        samples.push_back({200.0 + i, "advanced"});
        samples.push_back({100.0 + i, "near_native"});
    }
    const std::vector<std::string> order = {"intermediate", "advanced", "near_native"};
    const OrdinalThresholds t = fit_ordinal_thresholds(samples, order);
    EXPECT_TRUE(t.larger_is_less_proficient);
    EXPECT_EQ(t.predict(305), 0u);
    EXPECT_EQ(t.predict(205), 1u);
    EXPECT_EQ(t.predict(105), 2u);

    const ProficiencyResult r = predict_proficiency(samples, order, 5, 1);
    EXPECT_DOUBLE_EQ(r.weighted_precision, 1.0);
    EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
    EXPECT_EQ(r.confusion[1][1], 10u);
}

TEST(Ordinal, ReversedOrientationDetected) {
    std::vector<BandSample> samples;
    for (int i = 0; i < 6; ++i) {
        samples.push_back({10.0 + i, "intermediate"});
        samples.push_back({50.0 + i, "advanced"});
        samples.push_back({90.0 + i, "near_native"});
    }
    const std::vector<std::string> order = {"intermediate", "advanced", "near_native"};
    EXPECT_FALSE(fit_ordinal_thresholds(samples, order).larger_is_less_proficient);
}

TEST(Ordinal, TooFewSamplesPerBandRejected) {
    std::vector<BandSample> samples = {{1, "a"}, {2, "b"}, {3, "c"}};
    const std::vector<std::string> order = {"a", "b", "c"};
    EXPECT_THROW(predict_proficiency(samples, order, 5, 0), Error);
}

TEST(Counts, ExclusionsAndLevels) {
    ScoredVocabulary v;
    v.words = {"a", "b", "c", "d"};
    v.features = {{0.0}, {0.0}, {0.0}, {0.0}};
    v.level = {CefrLevel::A1, CefrLevel::C1, CefrLevel::C1, CefrLevel::B2};
    v.occurs_at_c1 = {false, true, true, true};
    const PersonalModel all = constant_model(5.0, 1);
    const auto counts = complex_counts_by_level(all, v, {"c"});
    EXPECT_EQ(counts[0], 1u);
    EXPECT_EQ(counts[3], 1u);
    EXPECT_EQ(counts[4], 1u);
    EXPECT_EQ(c1_complex_count(all, v, {}), 2u);
    EXPECT_EQ(c1_complex_count(all, v, {}, C1Membership::any_frequency), 3u);
    EXPECT_EQ(c1_complex_count(constant_model(-5.0, 1), v, {}), 0u);
}

TEST(Group, SingleModelGivesItsProbability) {
    PersonalModel m;
    m.weights = {0.7, -0.2};
    m.bias = 0.1;
    const std::vector<PersonalModel> one = {m};
    const std::vector<double> x = {0.5, 1.5};
    EXPECT_DOUBLE_EQ(group_complexity_probability(one, x), predict_proba(m, x));
    PersonalModel n = m;
    n.bias = -3.0;
    const std::vector<PersonalModel> two = {m, n};
    EXPECT_NEAR(group_complexity_probability(two, x), (predict_proba(m, x) + predict_proba(n, x)) / 2, 1e-15);
    EXPECT_FALSE(group_decision(0.5));
    EXPECT_TRUE(group_decision(0.5000001));
}

TEST(Graded, FeaturizedVocabularyCoversGradedWords) {
    const auto& w = pcwi::test_support::small_world();
    const GradedLexicon g = load_graded_lexicon(w.dir + "/graded.tsv");
    const ScoredVocabulary v = featurize_graded(g, w.resources->pool, w.resources->features);
    EXPECT_EQ(v.words.size() + v.missing_features, g.entries.size());
    EXPECT_TRUE(std::is_sorted(v.words.begin(), v.words.end()));
    for (const auto& f : v.features) EXPECT_EQ(f.size(), w.resources->pool.dim());
    // Pool words reuse their pool vectors.
    const auto& e = w.resources->pool.entries.front();
    const auto it = std::lower_bound(v.words.begin(), v.words.end(), e.word);
    if (it != v.words.end() && *it == e.word)
        EXPECT_EQ(v.features[static_cast<std::size_t>(it - v.words.begin())], e.features);
}
