#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pcwi/common.hpp"

namespace pcwi {

// Canonical feature order. Models record which of these survived ingestion.
inline constexpr std::array<std::string_view, 5> kFeatureNames = {
    "log_frequency", "length", "familiarity", "concreteness", "imageability"};
inline constexpr std::size_t kCanonicalDim = kFeatureNames.size();

enum class Provenance { pool, seed, test };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

struct RawLexiconRecord {
    std::string word;
    int length = 0;
    double frequency = 0.0;
    std::optional<double> familiarity;
    std::optional<double> concreteness;
    std::optional<double> imageability;
    std::optional<int> votes;
};

struct PoolStatistics {
    std::vector<std::string> feature_names;
    // Indices into kFeatureNames, one per retained feature.
    std::vector<std::size_t> kept_columns;
    std::vector<double> mean;
    std::vector<double> stddev;
    std::size_t pool_size = 0;
    std::string content_hash;

    std::size_t dim() const { return mean.size(); }
};

struct WordEntry {
    std::string word;
    std::vector<double> features;
    int cluster_id = -1;
    Provenance provenance = Provenance::pool;
};

// One anomaly found while ingesting.
struct IngestDiagnostic {
    std::size_t line = 0;
    std::string kind;    // imputed | column_dropped | column_ignored
    std::string column;
    std::string word;
    std::string message;
};

struct ColumnMapping {
    std::string word = "word";
    std::string frequency = "frequency";
    std::string familiarity = "familiarity";
    std::string concreteness = "concreteness";
    std::string imageability = "imageability";
    std::string votes = "votes";
};

struct Pool {
    std::vector<WordEntry> entries;
    std::vector<RawLexiconRecord> raw;
    PoolStatistics stats;
    std::vector<IngestDiagnostic> diagnostics;

    std::optional<std::size_t> find(std::string_view word) const;
    std::size_t size() const { return entries.size(); }
    std::size_t dim() const { return stats.dim(); }

    void rebuild_index();

private:
    std::unordered_map<std::string, std::size_t> index_;
};

// Reads raw records from TSV text; validation of rows happens here.
std::vector<RawLexiconRecord> parse_lexicon_records(std::string_view text,
                                                    const ColumnMapping& mapping,
                                                    std::vector<IngestDiagnostic>* diagnostics = nullptr);

Pool ingest_pool_text(std::string_view text, const ColumnMapping& mapping = {});
Pool ingest_pool(const std::string& path, const ColumnMapping& mapping = {});

// Canonical raw vector: [ln(freq + 1), length, familiarity, concreteness,
// imageability]; missing psycholinguistic cells are NaN.
std::array<double, kCanonicalDim> canonical_features(const RawLexiconRecord& r);

// Mean-impute, select retained columns and z-score.
std::vector<double> featurize(const RawLexiconRecord& r, const PoolStatistics& stats);

std::vector<double> zscore(std::span<const double> raw, const PoolStatistics& stats);

int binarize_seed_label(int votes, int threshold = 1);

// Normalized pool on disk: entries.tsv + stats.json + diagnostics.jsonl.
void save_ingested(const Pool& pool, const std::string& dir);
Pool load_ingested(const std::string& dir);
// Accepts either a raw pool TSV or a directory written by save_ingested.
Pool load_pool(const std::string& path);

std::string diagnostics_jsonl(std::span<const IngestDiagnostic> diagnostics);
std::string stats_to_json(const PoolStatistics& stats);
PoolStatistics stats_from_json(std::string_view text);

enum class CefrLevel { A1 = 0, A2, B1, B2, C1 };
inline constexpr std::array<std::string_view, 5> kCefrNames = {"A1", "A2", "B1", "B2", "C1"};

struct GradedLexicon {
    std::map<std::string, std::array<double, 5>> entries;

    // Level with the largest frequency; earliest level wins ties.
    static CefrLevel argmax_level(const std::array<double, 5>& freqs);
};

GradedLexicon parse_graded_lexicon(std::string_view text);
GradedLexicon load_graded_lexicon(const std::string& path);

// Raw records for words that may lie outside the pool (test words, graded
// vocabulary). Pool records take precedence over later additions.
class FeatureSource {
public:
    FeatureSource() = default;
    explicit FeatureSource(const Pool& pool);

    void add(const RawLexiconRecord& r);
    void add_file(const std::string& path, const ColumnMapping& mapping = {});
    const RawLexiconRecord* find(std::string_view word) const;
    std::size_t size() const { return records_.size(); }

private:
    std::unordered_map<std::string, RawLexiconRecord> records_;
};

}  // namespace pcwi
