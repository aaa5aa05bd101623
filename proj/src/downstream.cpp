#include "pcwi/downstream.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <sstream>

namespace pcwi {

ScoredVocabulary featurize_graded(const GradedLexicon& graded, const Pool& pool, const FeatureSource& features) {
    ScoredVocabulary v;
    for (const auto& [word, freqs] : graded.entries) {
        std::vector<double> x;
        if (auto i = pool.find(word))
            x = pool.entries[*i].features;
        else if (const auto* rec = features.find(word))
            x = featurize(*rec, pool.stats);
        else {
            ++v.missing_features;
            continue;
        }
        v.words.push_back(word);
        v.features.push_back(std::move(x));
        v.level.push_back(GradedLexicon::argmax_level(freqs));
        v.occurs_at_c1.push_back(freqs[static_cast<std::size_t>(CefrLevel::C1)] > 0.0);
    }
    return v;
}

std::array<std::size_t, 5> complex_counts_by_level(const PersonalModel& model, const ScoredVocabulary& vocab,
                                                   const std::unordered_set<std::string>& exclude) {
    std::array<std::size_t, 5> counts{};
    for (std::size_t i = 0; i < vocab.words.size(); ++i) {
        if (exclude.count(vocab.words[i])) continue;
        if (predict_label(model, vocab.features[i]) == 1) ++counts[static_cast<std::size_t>(vocab.level[i])];
    }
    return counts;
}

std::size_t c1_complex_count(const PersonalModel& model, const ScoredVocabulary& vocab,
                             const std::unordered_set<std::string>& exclude, C1Membership membership) {
    std::size_t vocabulary = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < vocab.words.size(); ++i) {
        const bool c1 = membership == C1Membership::argmax ? vocab.level[i] == CefrLevel::C1 : vocab.occurs_at_c1[i];
        if (!c1) continue;
        ++vocabulary;
        if (exclude.count(vocab.words[i])) continue;
        if (predict_label(model, vocab.features[i]) == 1) ++count;
    }
    if (vocabulary == 0) throw Error("empty C1 vocabulary");
    return count;
}

std::size_t OrdinalThresholds::predict(double count) const {
    const double x = larger_is_less_proficient ? -count : count;
    std::size_t c = 0;
    for (double t : thresholds)
        if (x >= t) ++c;
    return c;
}

namespace {

std::size_t band_index(std::span<const std::string> band_order, const std::string& band) {
    const auto it = std::find(band_order.begin(), band_order.end(), band);
    if (it == band_order.end()) throw Error("unknown band '" + band + "'");
    return static_cast<std::size_t>(it - band_order.begin());
}

// Best contiguous class layout over sorted oriented values; returns the
// number of correctly placed samples.
std::size_t fit_oriented(std::span<const std::pair<double, std::size_t>> samples, std::size_t classes,
                         std::vector<double>& thresholds) {
    std::vector<double> values;
    std::vector<std::vector<std::size_t>> counts;
    for (const auto& [x, c] : samples) {
        if (values.empty() || values.back() != x) {
            values.push_back(x);
            counts.emplace_back(classes, 0);
        }
        ++counts.back()[c];
    }
    const std::size_t u = values.size();
    // prefix[c][j] = samples of class c among the first j distinct values.
    std::vector<std::vector<long>> prefix(classes, std::vector<long>(u + 1, 0));
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t j = 0; j < u; ++j) prefix[c][j + 1] = prefix[c][j] + static_cast<long>(counts[j][c]);

    // best[c][j]: classes 0..c laid out over the first j values.
    std::vector<std::vector<long>> best(classes, std::vector<long>(u + 1, 0));
    std::vector<std::vector<std::size_t>> from(classes, std::vector<std::size_t>(u + 1, 0));
    best[0] = prefix[0];
    for (std::size_t c = 1; c < classes; ++c) {
        long running = std::numeric_limits<long>::min();
        std::size_t arg = 0;
        for (std::size_t j = 0; j <= u; ++j) {
            const long candidate = best[c - 1][j] - prefix[c][j];
            if (candidate > running) {
                running = candidate;
                arg = j;
            }
            best[c][j] = running + prefix[c][j];
            from[c][j] = arg;
        }
    }
    thresholds.assign(classes - 1, 0.0);
    std::size_t end = u;
    for (std::size_t c = classes - 1; c >= 1; --c) {
        const std::size_t start = from[c][end];
        // Cut halfway between the last value of class c-1 and the first of class c.
        if (start == 0) thresholds[c - 1] = -std::numeric_limits<double>::infinity();
        else if (start == u) thresholds[c - 1] = std::numeric_limits<double>::infinity();
        else thresholds[c - 1] = 0.5 * (values[start - 1] + values[start]);
        end = start;
    }
    return static_cast<std::size_t>(best[classes - 1][u]);
}

}  // namespace

OrdinalThresholds fit_ordinal_thresholds(std::span<const BandSample> samples, std::span<const std::string> band_order) {
    if (samples.empty()) throw Error("no proficiency samples");
    if (band_order.size() < 2) throw Error("need at least two bands");
    std::vector<std::pair<double, std::size_t>> down, up;
    for (const auto& s : samples) {
        const std::size_t c = band_index(band_order, s.band);
        down.emplace_back(-s.count, c);
        up.emplace_back(s.count, c);
    }
    std::sort(down.begin(), down.end());
    std::sort(up.begin(), up.end());
    OrdinalThresholds a, b;
    a.larger_is_less_proficient = true;
    b.larger_is_less_proficient = false;
    const std::size_t hits_a = fit_oriented(down, band_order.size(), a.thresholds);
    const std::size_t hits_b = fit_oriented(up, band_order.size(), b.thresholds);
    return hits_b > hits_a ? b : a;
}

ProficiencyResult predict_proficiency(std::span<const BandSample> samples, std::span<const std::string> band_order,
                                      int folds, std::uint64_t seed) {
    if (folds < 2) throw Error("need at least two folds");
    const std::size_t k = band_order.size();
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < samples.size(); ++i) members[band_index(band_order, samples[i].band)].push_back(i);
    std::size_t present = 0;
    for (std::size_t c = 0; c < k; ++c) {
        if (members[c].empty()) continue;
        ++present;
        if (members[c].size() < static_cast<std::size_t>(folds))
            throw Error("band '" + band_order[c] + "' has " + std::to_string(members[c].size()) +
                        " members, fewer than " + std::to_string(folds) + " folds");
    }
    if (present < 3) throw Error("proficiency prediction needs at least three bands");

    std::vector<int> fold_of(samples.size(), 0);
    for (std::size_t c = 0; c < k; ++c) {
        Rng rng(mix_seed(seed, "folds/" + band_order[c]));
        auto order = members[c];
        rng.shuffle(order);
        for (std::size_t p = 0; p < order.size(); ++p) fold_of[order[p]] = static_cast<int>(p % static_cast<std::size_t>(folds));
    }

    ProficiencyResult r;
    r.bands.assign(band_order.begin(), band_order.end());
    r.predictions.assign(samples.size(), 0);
    r.confusion.assign(k, std::vector<std::size_t>(k, 0));
    for (int f = 0; f < folds; ++f) {
        std::vector<BandSample> train;
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (fold_of[i] != f) train.push_back(samples[i]);
        const OrdinalThresholds model = fit_ordinal_thresholds(train, band_order);
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (fold_of[i] == f) r.predictions[i] = model.predict(samples[i].count);
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const std::size_t truth = band_index(band_order, samples[i].band);
        ++r.confusion[truth][r.predictions[i]];
        if (truth == r.predictions[i]) ++correct;
    }
    const double n = static_cast<double>(samples.size());
    r.accuracy = static_cast<double>(correct) / n;
    std::size_t classes_present = 0;
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t predicted = 0, support = 0;
        for (std::size_t t = 0; t < k; ++t) {
            predicted += r.confusion[t][c];
            support += r.confusion[c][t];
        }
        if (support == 0) continue;
        ++classes_present;
        const double precision =
            predicted == 0 ? 0.0 : static_cast<double>(r.confusion[c][c]) / static_cast<double>(predicted);
        r.weighted_precision += precision * static_cast<double>(support) / n;
        r.macro_precision += precision;
    }
    r.macro_precision /= static_cast<double>(classes_present);
    return r;
}

double group_complexity_probability(std::span<const PersonalModel> models, std::span<const double> features) {
    if (models.empty()) throw Error("group has no models");
    double sum = 0.0;
    for (const auto& m : models) sum += predict_proba(m, features);
    return sum / static_cast<double>(models.size());
}

double group_complexity_probability(std::span<const PersonalModel> models, const RawLexiconRecord& record) {
    if (models.empty()) throw Error("group has no models");
    double sum = 0.0;
    for (const auto& m : models) sum += predict_proba_raw(m, record);
    return sum / static_cast<double>(models.size());
}

std::string score_words_csv(std::span<const PersonalModel> models, std::span<const std::string> words,
                            const FeatureSource& features) {
    std::ostringstream out;
    out << "word,probability,label\n";
    for (const auto& w : words) {
        const auto* rec = features.find(w);
        if (!rec) throw Error("no feature record for '" + w + "'");
        const double p = group_complexity_probability(models, *rec);
        out << w << ',' << format_double(p) << ',' << (group_decision(p) ? 1 : 0) << '\n';
    }
    return out.str();
}

}  // namespace pcwi
