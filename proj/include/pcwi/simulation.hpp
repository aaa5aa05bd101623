#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcwi/downstream.hpp"
#include "pcwi/metrics.hpp"
#include "pcwi/session.hpp"

namespace pcwi {

// Per-word knowledge score of simulated annotators: a weighted sum of the
// z-scored log-frequency and a graded-level term (2 - level index, scaled).
struct KnowledgeScores {
    double frequency_weight = 1.0;
    double graded_weight = 0.0;
    std::unordered_map<std::string, double> score;
    std::vector<double> sorted_pool_scores;

    double of(const std::string& word) const;
    // Score below which the given fraction of pool words falls.
    double pool_quantile(double q) const;
};

KnowledgeScores build_knowledge_scores(const Resources& resources, const GradedLexicon* graded = nullptr,
                                       double frequency_weight = 1.0, double graded_weight = 0.0);

enum class OracleKind { threshold, replay };

struct OracleSpec {
    OracleKind kind = OracleKind::threshold;
    std::string id;
    std::string proficiency;
    // threshold: knows iff score >= cutoff, then flipped with noise_rate
    double cutoff = 0.0;
    double noise_rate = 0.0;
    std::uint64_t noise_seed = 0;
    // replay: recorded answers, word -> knows
    std::map<std::string, bool> recorded;
    std::optional<bool> default_answer;
};

// Noisy answer; the flip is a pure function of (noise_seed, word).
bool oracle_answer(const OracleSpec& oracle, const std::string& word, const KnowledgeScores& scores);
// Noise-free answer used as evaluation gold.
bool oracle_knows(const OracleSpec& oracle, const std::string& word, const KnowledgeScores& scores);

// Replay oracle from a recorded test set (label 1 = complex = not known).
OracleSpec replay_oracle(const LabelledTestSet& set, std::optional<bool> default_answer = std::nullopt);

enum class Strategy { active_learning, cluster_random, random };

std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view s);

// Session configuration a strategy runs under, derived from `base`.
SessionConfig strategy_config(Strategy s, const SessionConfig& base);

struct StrategyRun {
    Strategy strategy = Strategy::active_learning;
    std::string oracle_id;
    int budget = 0;
    std::uint64_t seed = 0;
    PersonalModel model;
    Confusion test_counts;
    FScores f;
    Kappa kappa;
    std::vector<std::string> queried;
    std::vector<SessionEvent> events;
    std::vector<double> step_seconds;   // wall time of each training annotation step
};

inline constexpr const char* kSimulationClock = "1970-01-01T00:00:00.000Z";

StrategyRun run_strategy(std::shared_ptr<const Resources> resources, const KnowledgeScores& scores,
                         const OracleSpec& oracle, Strategy strategy, int budget, std::uint64_t seed,
                         const SessionConfig& base = {});

struct CutoffRange {
    double low = 0.1;    // pool quantiles of the knowledge score
    double high = 0.35;
};

struct BandSpec {
    std::string name;
    CutoffRange cutoff;
};

struct StudyConfig {
    ResourcePaths paths;
    std::string graded;
    std::uint64_t seed = 7;
    int threads = 0;   // 0: hardware concurrency
    bool keep_event_logs = true;
    SessionConfig session;
    double frequency_weight = 1.0;
    double graded_weight = 0.0;

    bool run_strategies = true;
    int oracles = 100;
    double strategy_noise = 0.1;
    int strategy_budget = 23;
    std::vector<Strategy> strategies = {Strategy::active_learning, Strategy::cluster_random, Strategy::random};
    CutoffRange strategy_cutoff;

    bool run_bands = true;
    int models_per_band = 100;
    double band_noise = 0.05;
    int band_budget = 23;
    std::vector<BandSpec> bands = {{"intermediate", {0.40, 0.50}},
                                   {"advanced", {0.22, 0.32}},
                                   {"near_native", {0.05, 0.15}}};
    int folds = 5;
    C1Membership c1_membership = C1Membership::argmax;
};

// Relative paths in the file resolve against `base_dir`.
StudyConfig parse_study_config(std::string_view text, const std::string& base_dir = ".");

// `count` threshold oracles whose cutoffs are drawn uniformly from the
// quantile range; everything derives from (seed, label, index).
std::vector<OracleSpec> make_oracles(const KnowledgeScores& scores, int count, CutoffRange range, double noise,
                                     std::uint64_t seed, const std::string& label);

struct StrategySummary {
    Strategy strategy = Strategy::active_learning;
    std::size_t runs = 0;
    double mean_f = 0.0;
    double mean_kappa = 0.0;
    double sd_f = 0.0;
    double sd_kappa = 0.0;
    double mean_f_complex = 0.0;
};

struct StrategyStudy {
    std::vector<StrategyRun> runs;          // strategy-major, oracle order within
    std::vector<StrategySummary> summary;   // in config order
};

StrategyStudy run_strategy_study(std::shared_ptr<const Resources> resources, const KnowledgeScores& scores,
                                 const StudyConfig& config);

struct BandModel {
    std::string oracle_id;
    std::string band;
    PersonalModel model;
    std::array<std::size_t, 5> counts{};   // predicted complex per level
    std::size_t c1_count = 0;
    std::size_t vocabulary = 0;            // words scored after exclusions
    std::vector<std::string> seen;         // excluded train-time words
};

struct BandStudy {
    std::vector<BandModel> models;   // band-major
    std::vector<std::string> bands;
    std::vector<std::array<double, 5>> mean_counts;   // per band
    ProficiencyResult proficiency;
};

BandStudy run_band_study(std::shared_ptr<const Resources> resources, const KnowledgeScores& scores,
                         const ScoredVocabulary& vocab, const StudyConfig& config);

std::string strategy_summary_csv(const StrategyStudy& s);
std::string strategy_runs_csv(const StrategyStudy& s);
std::string band_counts_csv(const BandStudy& b);
std::string band_models_csv(const BandStudy& b);
std::string proficiency_csv(const ProficiencyResult& p);

// Runs every enabled study and writes tables, models and event logs to `out_dir`.
struct StudyOutputs {
    std::optional<StrategyStudy> strategies;
    std::optional<BandStudy> bands;
};
StudyOutputs run_study(const StudyConfig& config, const std::string& out_dir);

}  // namespace pcwi
