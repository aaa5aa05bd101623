#include <gtest/gtest.h>

#include <cmath>

#include "pcwi/model.hpp"

using namespace pcwi;

namespace {

std::vector<LabeledInstance> random_instances(Rng& rng, std::size_t n, std::size_t d) {
    std::vector<LabeledInstance> data;
    for (std::size_t i = 0; i < n; ++i) {
        LabeledInstance x;
        x.word = "w" + std::to_string(i);
        for (std::size_t j = 0; j < d; ++j) x.features.push_back(rng.normal());
        x.label = rng.uniform() < sigmoid(x.features[0] - 0.5 * x.features[1]) ? 1 : 0;
        x.weight = 0.5 + rng.uniform();
        data.push_back(std::move(x));
    }
    return data;
}

PersonalModel with_weights(std::vector<double> w, double b) {
    PersonalModel m;
    m.weights = std::move(w);
    m.bias = b;
    return m;
}

}  // namespace

TEST(Gradient, MatchesCentralFiniteDifferences) {
    Rng rng(2024);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto data = random_instances(rng, 20, 5);
        std::vector<double> w(5);
        for (double& v : w) v = rng.normal();
        const double b = rng.normal();
        const double lambda = rng.uniform(0.0, 2.0);
        const auto g = gradient(data, w, b, lambda);
        const double h = 1e-6;
        for (std::size_t j = 0; j <= w.size(); ++j) {
            auto wp = w, wm = w;
            double bp = b, bm = b;
            if (j < w.size()) {
                wp[j] += h;
                wm[j] -= h;
            } else {
                bp += h;
                bm -= h;
            }
            const double fd = (objective(data, wp, bp, lambda) - objective(data, wm, bm, lambda)) / (2 * h);
            const double rel = std::abs(fd - g[j]) / std::max(1.0, std::abs(g[j]));
            EXPECT_LT(rel, 1e-5) << "trial " << trial << " coordinate " << j;
            ++checked;
        }
    }
    EXPECT_EQ(checked, 600);
}

TEST(Gradient, BiasVanishesOnBalancedSymmetricData) {
    std::vector<LabeledInstance> data = {{"a", {1.0, 2.0}, 1}, {"b", {-1.0, -2.0}, 0}};
    const std::vector<double> w = {0.0, 0.0};
    EXPECT_DOUBLE_EQ(gradient(data, w, 0.0, 0.0)[2], 0.0);
}

TEST(Fit, ReachesStationaryPoint) {
    Rng rng(5);
    const auto data = random_instances(rng, 300, 5);
    const PersonalModel m = fit(data, FitConfig{});
    EXPECT_FALSE(m.degenerate);
    EXPECT_LE(m.gradient_norm, 1e-8);
    const auto g = gradient(data, m);
    double norm = 0;
    for (double v : g) norm += v * v;
    EXPECT_LE(std::sqrt(norm), 1e-8);
}

TEST(Fit, TwoInitializationsAgree) {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const auto data = random_instances(rng, 200, 5);
        const PersonalModel a = fit(data, FitConfig{});
        std::vector<double> start(6);
        for (double& v : start) v = 3.0 * rng.normal();
        const PersonalModel b = fit(data, FitConfig{}, start);
        for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(a.weights[j], b.weights[j], 1e-6);
        EXPECT_NEAR(a.bias, b.bias, 1e-6);
    }
}

TEST(Fit, LossNeverIncreases) {
    Rng rng(11);
    const auto data = random_instances(rng, 150, 5);
    FitTrace trace;
    fit(data, FitConfig{}, {}, &trace);
    ASSERT_GE(trace.losses.size(), 2u);
    // Steps near the optimum may be accepted within the resolution of the loss.
    for (std::size_t i = 1; i < trace.losses.size(); ++i)
        EXPECT_LE(trace.losses[i], trace.losses[i - 1] * (1.0 + 1e-12));
}

TEST(Fit, SeparablePairGetsFiniteWeightsWithMargin) {
    std::vector<LabeledInstance> data = {{"hard", {2.0, 0.0}, 1}, {"easy", {-2.0, 0.0}, 0}};
    const PersonalModel m = fit(data, FitConfig{});
    EXPECT_TRUE(std::isfinite(m.weights[0]));
    EXPECT_GT(predict_proba(m, data[0].features), 0.6);
    EXPECT_LT(predict_proba(m, data[1].features), 0.4);
}

TEST(Fit, SingleClassIsDegeneratePrior) {
    std::vector<LabeledInstance> data = {{"a", {1.0}, 1}, {"b", {2.0}, 1}, {"c", {3.0}, 1}};
    const PersonalModel m = fit(data, FitConfig{});
    EXPECT_TRUE(m.degenerate);
    EXPECT_DOUBLE_EQ(m.weights[0], 0.0);
    EXPECT_NEAR(m.bias, std::log(4.0 / 5.0 / (1.0 / 5.0)), 1e-12);
}

TEST(Fit, DimensionMismatchThrows) {
    std::vector<LabeledInstance> data = {{"a", {1.0, 2.0}, 1}, {"b", {2.0}, 0}};
    EXPECT_THROW(fit(data, FitConfig{}), DimensionError);
}

TEST(Predict, ClosedFormValues) {
    EXPECT_DOUBLE_EQ(predict_proba(with_weights({0, 0, 0}, 0), std::vector<double>{4, -2, 7}), 0.5);
    const std::vector<double> x = {std::log(3.0), 0.0, 0.0};
    EXPECT_NEAR(predict_proba(with_weights({1, 0, 0}, 0), x), 0.75, 1e-15);
    EXPECT_EQ(predict_label(with_weights({1, 0, 0}, 0), x), 1);
    EXPECT_EQ(predict_label(with_weights({0, 0, 0}, 0), x), 0);
    EXPECT_THROW(predict_proba(with_weights({1, 0}, 0), x), DimensionError);
}

TEST(Predict, MonotoneInBias) {
    const std::vector<double> x = {0.3};
    double last = 0.0;
    for (double b = -30; b <= 30; b += 1.0) {
        const double p = predict_proba(with_weights({1.0}, b), x);
        EXPECT_GT(p, last);
        last = p;
    }
}

TEST(Export, RoundTripScoresIdentically) {
    Rng rng(17);
    PersonalModel m = fit(random_instances(rng, 100, 5), FitConfig{});
    m.normalization.feature_names = {"log_frequency", "length", "familiarity", "concreteness", "imageability"};
    m.normalization.kept_columns = {0, 1, 2, 3, 4};
    m.normalization.mean = {1.0, 6.0, 500.0, 400.0, 420.0};
    m.normalization.stddev = {1.5, 2.0, 60.0, 100.0, 90.0};
    m.session_id = "abc";
    m.version = 7;
    const PersonalModel back = import_model(export_model(m), 5);
    EXPECT_EQ(export_model(back), export_model(m));
    for (int i = 0; i < 100; ++i) {
        std::vector<double> x(5);
        for (double& v : x) v = rng.normal();
        EXPECT_EQ(predict_proba(back, x), predict_proba(m, x));
    }
    EXPECT_THROW(import_model(export_model(m), 4), DimensionError);
    EXPECT_THROW(import_model("{\"format_version\": 99}"), Error);
}

TEST(Export, RawScoringMatchesNormalizedScoring) {
    PersonalModel m = with_weights({-1.2, 0.4}, 0.3);
    m.normalization.feature_names = {"log_frequency", "length"};
    m.normalization.kept_columns = {0, 1};
    m.normalization.mean = {2.0, 6.0};
    m.normalization.stddev = {1.5, 2.5};
    RawLexiconRecord r;
    r.word = "lexeme";
    r.length = 6;
    r.frequency = 12.0;
    const std::vector<double> z = {(std::log(13.0) - 2.0) / 1.5, 0.0};
    EXPECT_NEAR(predict_proba_raw(m, r), predict_proba(m, z), 1e-15);
}
