#include "pcwi/lexicon.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace pcwi {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::pool: return "pool";
        case Provenance::seed: return "seed";
        case Provenance::test: return "test";
    }
    return "pool";
}

Provenance provenance_from_string(std::string_view s) {
    if (s == "pool") return Provenance::pool;
    if (s == "seed") return Provenance::seed;
    if (s == "test") return Provenance::test;
    throw Error("unknown provenance: " + std::string(s));
}

std::optional<std::size_t> Pool::find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void Pool::rebuild_index() {
    index_.clear();
    index_.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) index_.emplace(entries[i].word, i);
}

namespace {

bool is_missing(std::string_view cell) {
    return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "-";
}

std::optional<double> parse_real(std::string_view cell) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<long> parse_int(std::string_view cell) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
    return v;
}

// Number of UTF-8 code points.
int utf8_length(std::string_view s) {
    int n = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80) ++n;
    return n;
}

}  // namespace

std::vector<RawLexiconRecord> parse_lexicon_records(std::string_view text,
                                                    const ColumnMapping& mapping,
                                                    std::vector<IngestDiagnostic>* diagnostics) {
    const TsvTable t = parse_tsv(text);
    const int c_word = t.column(mapping.word);
    const int c_freq = t.column(mapping.frequency);
    if (c_word < 0) throw IngestError(1, "missing column '" + mapping.word + "'");
    if (c_freq < 0) throw IngestError(1, "missing column '" + mapping.frequency + "'");
    const int c_fam = t.column(mapping.familiarity);
    const int c_conc = t.column(mapping.concreteness);
    const int c_img = t.column(mapping.imageability);
    const int c_votes = t.column(mapping.votes);

    if (diagnostics) {
        const std::set<int> mapped = {c_word, c_freq, c_fam, c_conc, c_img, c_votes};
        for (std::size_t i = 0; i < t.header.size(); ++i)
            if (!mapped.count(static_cast<int>(i)))
                diagnostics->push_back({1, "column_ignored", t.header[i], "", "unmapped column ignored"});
    }

    std::vector<RawLexiconRecord> out;
    out.reserve(t.rows.size());
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::size_t line = t.line_numbers[r];
        if (row.size() != t.header.size())
            throw IngestError(line, "expected " + std::to_string(t.header.size()) + " fields, found " +
                                        std::to_string(row.size()));
        RawLexiconRecord rec;
        rec.word = to_lower(row[static_cast<std::size_t>(c_word)]);
        if (rec.word.empty()) throw IngestError(line, "empty word");
        if (!seen.insert(rec.word).second) throw IngestError(line, "duplicate word '" + rec.word + "'");
        rec.length = utf8_length(rec.word);

        const auto freq = parse_real(row[static_cast<std::size_t>(c_freq)]);
        if (!freq) throw IngestError(line, "unparseable frequency '" + row[static_cast<std::size_t>(c_freq)] + "'");
        if (*freq <= 0.0) throw IngestError(line, "non-positive frequency for '" + rec.word + "'");
        rec.frequency = *freq;

        auto optional_real = [&](int col, std::string_view name) -> std::optional<double> {
            if (col < 0) return std::nullopt;
            const std::string& cell = row[static_cast<std::size_t>(col)];
            if (is_missing(cell)) return std::nullopt;
            auto v = parse_real(cell);
            if (!v) throw IngestError(line, "unparseable " + std::string(name) + " '" + cell + "'");
            return v;
        };
        rec.familiarity = optional_real(c_fam, "familiarity");
        rec.concreteness = optional_real(c_conc, "concreteness");
        rec.imageability = optional_real(c_img, "imageability");

        if (c_votes >= 0) {
            const std::string& cell = row[static_cast<std::size_t>(c_votes)];
            if (!is_missing(cell)) {
                auto v = parse_int(cell);
                if (!v || *v < 0 || *v > 20) throw IngestError(line, "votes must be an integer in 0..20");
                rec.votes = static_cast<int>(*v);
            }
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::array<double, kCanonicalDim> canonical_features(const RawLexiconRecord& r) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    return {std::log(r.frequency + 1.0), static_cast<double>(r.length), r.familiarity.value_or(nan),
            r.concreteness.value_or(nan), r.imageability.value_or(nan)};
}

Pool ingest_pool_text(std::string_view text, const ColumnMapping& mapping) {
    Pool pool;
    pool.raw = parse_lexicon_records(text, mapping, &pool.diagnostics);
    if (pool.raw.size() < 2) throw IngestError(0, "pool needs at least 2 rows");

    const std::size_t n = pool.raw.size();
    std::vector<std::array<double, kCanonicalDim>> canon(n);
    for (std::size_t i = 0; i < n; ++i) canon[i] = canonical_features(pool.raw[i]);

    // Line numbers of data rows, for diagnostics.
    const std::vector<std::size_t> lines = parse_tsv(text).line_numbers;

    PoolStatistics& st = pool.stats;
    st.pool_size = n;
    st.content_hash = content_digest(text);
    for (std::size_t c = 0; c < kCanonicalDim; ++c) {
        const std::string name(kFeatureNames[c]);
        double sum = 0.0;
        std::size_t present = 0;
        std::set<double> distinct;
        for (std::size_t i = 0; i < n; ++i) {
            if (std::isnan(canon[i][c])) continue;
            sum += canon[i][c];
            ++present;
            if (distinct.size() < 2) distinct.insert(canon[i][c]);
        }
        if (distinct.size() < 2) {
            pool.diagnostics.push_back({0, "column_dropped", name, "",
                                        present ? "fewer than 2 distinct values" : "no values present"});
            continue;
        }
        const double mean = sum / static_cast<double>(present);
        // Mean imputation leaves the mean unchanged; imputed cells add zero variance.
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = std::isnan(canon[i][c]) ? mean : canon[i][c];
            ss += (v - mean) * (v - mean);
        }
        const double sd = std::sqrt(ss / static_cast<double>(n));
        if (!(sd > 0.0)) {
            pool.diagnostics.push_back({0, "column_dropped", name, "", "zero variance"});
            continue;
        }
        st.feature_names.push_back(name);
        st.kept_columns.push_back(c);
        st.mean.push_back(mean);
        st.stddev.push_back(sd);
        for (std::size_t i = 0; i < n; ++i)
            if (std::isnan(canon[i][c]))
                pool.diagnostics.push_back({lines[i], "imputed", name, pool.raw[i].word, "missing value set to column mean"});
    }
    if (st.kept_columns.empty()) throw IngestError(0, "zero variance in every column");

    pool.entries.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        pool.entries[i].word = pool.raw[i].word;
        pool.entries[i].features = featurize(pool.raw[i], st);
    }
    pool.rebuild_index();
    return pool;
}

Pool ingest_pool(const std::string& path, const ColumnMapping& mapping) {
    if (!fs::exists(path)) throw IngestError(0, "pool file not found: " + path);
    return ingest_pool_text(read_file(path), mapping);
}

std::vector<double> featurize(const RawLexiconRecord& r, const PoolStatistics& stats) {
    const auto canon = canonical_features(r);
    std::vector<double> out(stats.dim());
    for (std::size_t j = 0; j < stats.dim(); ++j) {
        const double v = canon[stats.kept_columns[j]];
        out[j] = std::isnan(v) ? 0.0 : (v - stats.mean[j]) / stats.stddev[j];
    }
    return out;
}

std::vector<double> zscore(std::span<const double> raw, const PoolStatistics& stats) {
    if (raw.size() != stats.dim())
        throw DimensionError("zscore: expected dimension " + std::to_string(stats.dim()) + ", got " +
                             std::to_string(raw.size()));
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - stats.mean[i]) / stats.stddev[i];
    return out;
}

int binarize_seed_label(int votes, int threshold) {
    if (votes < 0) throw Error("negative vote count");
    if (votes > 20) throw Error("vote count above 20");
    if (threshold < 1) throw Error("vote threshold must be >= 1");
    return votes >= threshold ? 1 : 0;
}

std::string diagnostics_jsonl(std::span<const IngestDiagnostic> diagnostics) {
    std::string out;
    for (const auto& d : diagnostics) {
        json j = {{"line", d.line}, {"kind", d.kind}, {"column", d.column}, {"message", d.message}};
        if (!d.word.empty()) j["word"] = d.word;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string stats_to_json(const PoolStatistics& s) {
    json j = {{"feature_names", s.feature_names}, {"kept_columns", s.kept_columns},
              {"mean", s.mean},                   {"stddev", s.stddev},
              {"pool_size", s.pool_size},         {"content_hash", s.content_hash}};
    return j.dump(2);
}

PoolStatistics stats_from_json(std::string_view text) {
    const json j = json::parse(text);
    PoolStatistics s;
    s.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    s.kept_columns = j.at("kept_columns").get<std::vector<std::size_t>>();
    s.mean = j.at("mean").get<std::vector<double>>();
    s.stddev = j.at("stddev").get<std::vector<double>>();
    s.pool_size = j.at("pool_size").get<std::size_t>();
    s.content_hash = j.at("content_hash").get<std::string>();
    if (s.mean.size() != s.stddev.size() || s.mean.size() != s.kept_columns.size() ||
        s.mean.size() != s.feature_names.size())
        throw Error("statistics record: inconsistent dimensions");
    return s;
}

namespace {
std::string opt_cell(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }
}  // namespace

void save_ingested(const Pool& pool, const std::string& dir) {
    fs::create_directories(dir);
    std::string out = "word\tfrequency\tfamiliarity\tconcreteness\timageability\tvotes\tprovenance";
    for (const auto& name : pool.stats.feature_names) out += "\tz_" + name;
    out += '\n';
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto& r = pool.raw[i];
        const auto& e = pool.entries[i];
        out += r.word + '\t' + format_double(r.frequency) + '\t' + opt_cell(r.familiarity) + '\t' +
               opt_cell(r.concreteness) + '\t' + opt_cell(r.imageability) + '\t' +
               (r.votes ? std::to_string(*r.votes) : "NA") + '\t' + std::string(to_string(e.provenance));
        for (double f : e.features) out += '\t' + format_double(f);
        out += '\n';
    }
    write_file((fs::path(dir) / "entries.tsv").string(), out);
    write_file((fs::path(dir) / "stats.json").string(), stats_to_json(pool.stats));
    write_file((fs::path(dir) / "diagnostics.jsonl").string(), diagnostics_jsonl(pool.diagnostics));
}

Pool load_ingested(const std::string& dir) {
    Pool pool;
    pool.stats = stats_from_json(read_file((fs::path(dir) / "stats.json").string()));
    const std::string text = read_file((fs::path(dir) / "entries.tsv").string());
    pool.raw = parse_lexicon_records(text, ColumnMapping{});
    const TsvTable t = parse_tsv(text);
    const int c_prov = t.column("provenance");
    const std::size_t d = pool.stats.dim();
    pool.entries.resize(pool.raw.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        auto& e = pool.entries[i];
        e.word = pool.raw[i].word;
        if (c_prov >= 0) e.provenance = provenance_from_string(t.rows[i][static_cast<std::size_t>(c_prov)]);
        e.features.resize(d);
        for (std::size_t j = 0; j < d; ++j) {
            const int col = t.column("z_" + pool.stats.feature_names[j]);
            if (col < 0) throw IngestError(1, "missing column z_" + pool.stats.feature_names[j]);
            auto v = parse_real(t.rows[i][static_cast<std::size_t>(col)]);
            if (!v) throw IngestError(t.line_numbers[i], "unparseable feature value");
            e.features[j] = *v;
        }
    }
    if (pool.raw.size() != pool.stats.pool_size) throw Error("entries.tsv does not match stats.json pool_size");
    pool.rebuild_index();
    return pool;
}

Pool load_pool(const std::string& path) {
    if (fs::is_directory(path)) return load_ingested(path);
    return ingest_pool(path);
}

CefrLevel GradedLexicon::argmax_level(const std::array<double, 5>& f) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < f.size(); ++i)
        if (f[i] > f[best]) best = i;
    return static_cast<CefrLevel>(best);
}

GradedLexicon parse_graded_lexicon(std::string_view text) {
    const TsvTable t = parse_tsv(text);
    const int c_word = t.column("word");
    if (c_word < 0) throw IngestError(1, "missing column 'word'");
    std::array<int, 5> cols{};
    for (std::size_t l = 0; l < 5; ++l) {
        cols[l] = t.column(kCefrNames[l]);
        if (cols[l] < 0) throw IngestError(1, "missing column '" + std::string(kCefrNames[l]) + "'");
    }
    GradedLexicon g;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::size_t line = t.line_numbers[r];
        if (row.size() != t.header.size()) throw IngestError(line, "wrong number of fields");
        std::array<double, 5> f{};
        bool any = false;
        for (std::size_t l = 0; l < 5; ++l) {
            auto v = parse_real(row[static_cast<std::size_t>(cols[l])]);
            if (!v || *v < 0) throw IngestError(line, "level frequency must be a non-negative number");
            f[l] = *v;
            any = any || *v > 0;
        }
        if (!any) throw IngestError(line, "all level frequencies are zero");
        const std::string word = to_lower(row[static_cast<std::size_t>(c_word)]);
        if (!g.entries.emplace(word, f).second) throw IngestError(line, "duplicate word '" + word + "'");
    }
    return g;
}

GradedLexicon load_graded_lexicon(const std::string& path) { return parse_graded_lexicon(read_file(path)); }

FeatureSource::FeatureSource(const Pool& pool) {
    for (const auto& r : pool.raw) add(r);
}

void FeatureSource::add(const RawLexiconRecord& r) { records_.emplace(r.word, r); }

void FeatureSource::add_file(const std::string& path, const ColumnMapping& mapping) {
    for (const auto& r : parse_lexicon_records(read_file(path), mapping)) add(r);
}

const RawLexiconRecord* FeatureSource::find(std::string_view word) const {
    auto it = records_.find(std::string(word));
    return it == records_.end() ? nullptr : &it->second;
}

}  // namespace pcwi
