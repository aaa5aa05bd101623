#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "pcwi/lexicon.hpp"
#include "pcwi/model.hpp"

namespace pcwi {

// Which graded words count as C1 vocabulary.
enum class C1Membership {
    argmax,          // C1 is the level with the largest frequency
    any_frequency,   // the word occurs at C1 at all
};

// Graded vocabulary with feature vectors, ready for scoring.
struct ScoredVocabulary {
    std::vector<std::string> words;
    std::vector<std::vector<double>> features;
    std::vector<CefrLevel> level;          // argmax level
    std::vector<bool> occurs_at_c1;
    std::size_t missing_features = 0;      // graded words without a feature record
};

// Pool words use their pool vectors; others are featurized from `features`
// with the pool's normalization. Words are in lexicographic order.
ScoredVocabulary featurize_graded(const GradedLexicon& graded, const Pool& pool, const FeatureSource& features);

// Words predicted complex (p > 0.5) per argmax level, skipping `exclude`.
std::array<std::size_t, 5> complex_counts_by_level(const PersonalModel& model, const ScoredVocabulary& vocab,
                                                   const std::unordered_set<std::string>& exclude);

std::size_t c1_complex_count(const PersonalModel& model, const ScoredVocabulary& vocab,
                             const std::unordered_set<std::string>& exclude,
                             C1Membership membership = C1Membership::argmax);

struct BandSample {
    double count = 0.0;
    std::string band;
};

// One-feature ordinal classifier: classes occupy consecutive intervals of the
// feature in band order (or reverse order), boundaries at training values.
struct OrdinalThresholds {
    bool larger_is_less_proficient = true;
    std::vector<double> thresholds;   // one per class boundary, in oriented units

    std::size_t predict(double count) const;
};

// Maximises training accuracy. Ties between orientations favour "larger
// count, less proficient".
OrdinalThresholds fit_ordinal_thresholds(std::span<const BandSample> samples, std::span<const std::string> band_order);

struct ProficiencyResult {
    double weighted_precision = 0.0;   // support-weighted, 0 for never-predicted classes
    double macro_precision = 0.0;
    double accuracy = 0.0;
    std::vector<std::string> bands;
    std::vector<std::vector<std::size_t>> confusion;   // [true][predicted]
    std::vector<std::size_t> predictions;              // out-of-fold, per sample
};

// Stratified k-fold cross-validation of the ordinal classifier, predictions
// pooled over folds. `band_order` runs from least to most proficient.
ProficiencyResult predict_proficiency(std::span<const BandSample> samples, std::span<const std::string> band_order,
                                      int folds = 5, std::uint64_t seed = 0);

// Mean probability across the group's models; complex iff > 0.5.
double group_complexity_probability(std::span<const PersonalModel> models, std::span<const double> features);
double group_complexity_probability(std::span<const PersonalModel> models, const RawLexiconRecord& record);
inline bool group_decision(double probability) { return probability > 0.5; }

// CSV `word,probability,label`; words without features are an error.
std::string score_words_csv(std::span<const PersonalModel> models, std::span<const std::string> words,
                            const FeatureSource& features);

}  // namespace pcwi
