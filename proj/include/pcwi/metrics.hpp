#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pcwi/common.hpp"

namespace pcwi {

// Binary confusion counts; the positive class is complex (1).
struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
    Confusion& operator+=(const Confusion& o);
};

Confusion confusion(std::span<const int> pred, std::span<const int> gold);

// F of the positive class; 0 when precision + recall is 0.
double f_score(const Confusion& c);
double f_score(std::span<const int> pred, std::span<const int> gold);

struct FScores {
    double positive = 0.0;   // complex
    double negative = 0.0;   // simple
    // Mean of the per-class scores over the classes that occur in gold or
    // predictions; a class absent from both has no defined F.
    double macro = 0.0;
    double micro = 0.0;      // equals accuracy for single-label binary data
};

FScores f_scores(const Confusion& c);

struct Kappa {
    double value = 0.0;
    // At least one rater is constant. When both are constant and equal the
    // chance agreement is 1 and the value is defined as 1.
    bool degenerate = false;
};

Kappa cohen_kappa(const Confusion& c);
Kappa cohen_kappa(std::span<const int> pred, std::span<const int> gold);

// One annotator's gold test answers.
struct LabelledTestSet {
    std::string annotator_id;
    std::string group;                                 // proficiency band
    std::vector<std::pair<std::string, int>> items;    // (word, label)

    std::vector<std::string> words() const;
    std::vector<int> labels() const;
};

LabelledTestSet parse_test_set(std::string_view text, std::string annotator_id = {}, std::string group = {});
std::string test_set_tsv(const LabelledTestSet& set);

struct BaselinePrediction {
    std::vector<int> labels;
    std::vector<std::string> flagged;   // words with no group evidence
};

// Complex iff more than `threshold` of the group marked the word complex.
// Sets sharing the target's annotator id are left out of the vote.
BaselinePrediction baseline_group_average(std::span<const LabelledTestSet> group, const LabelledTestSet& target,
                                          double threshold = 0.10, bool leave_one_out = true);

// Complex iff frequency < threshold; a word without a frequency counts as 0.
std::vector<int> baseline_frequency(const std::unordered_map<std::string, double>& frequency, double threshold,
                                    std::span<const std::string> words);

// Threshold maximising macro F over the calibration items. Candidates are the
// observed frequencies and +infinity; the smallest best candidate wins.
double sweep_frequency_threshold(const std::unordered_map<std::string, double>& frequency,
                                 std::span<const std::pair<std::string, int>> calibration);

std::vector<int> baseline_all_simple(std::size_t n);

// Stored predictions of an external system: TSV `word<TAB>label`.
std::unordered_map<std::string, int> parse_external_predictions(std::string_view text);
std::string external_predictions_tsv(const std::map<std::string, int>& labels);
std::vector<int> baseline_external(const std::unordered_map<std::string, int>& predictions,
                                   std::span<const std::string> words);

struct ReportCell {
    Confusion counts;
    FScores f;
    Kappa kappa;
};

// Scores per (system, group), computed over the pooled annotations of each
// cell. Every added block also lands in the "all" column.
class EvaluationReport {
public:
    static constexpr std::string_view kAllGroups = "all";

    void add(const std::string& system, const std::string& group, std::span<const int> pred,
             std::span<const int> gold);

    const ReportCell& cell(const std::string& system, const std::string& group) const;
    bool has(const std::string& system, const std::string& group) const;
    const std::vector<std::string>& systems() const { return systems_; }
    // Groups in insertion order, "all" last.
    std::vector<std::string> groups() const;

    // Rows are systems, columns groups; panels F (macro) and kappa, then a
    // test_size row.
    std::string table_csv() const;
    // One row per cell with every count and score.
    std::string long_csv() const;

private:
    void finalize(ReportCell& c);

    std::vector<std::string> systems_;
    std::vector<std::string> groups_;
    std::map<std::pair<std::string, std::string>, ReportCell> cells_;
};

}  // namespace pcwi
