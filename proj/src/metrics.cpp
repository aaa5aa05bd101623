#include "pcwi/metrics.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace pcwi {

Confusion& Confusion::operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
}

Confusion confusion(std::span<const int> pred, std::span<const int> gold) {
    if (pred.size() != gold.size())
        throw Error("length mismatch: " + std::to_string(pred.size()) + " predictions, " +
                    std::to_string(gold.size()) + " gold labels");
    Confusion c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if ((pred[i] != 0 && pred[i] != 1) || (gold[i] != 0 && gold[i] != 1)) throw Error("labels must be 0 or 1");
        if (pred[i] == 1)
            ++(gold[i] == 1 ? c.tp : c.fp);
        else
            ++(gold[i] == 1 ? c.fn : c.tn);
    }
    return c;
}

namespace {

double harmonic(std::size_t tp, std::size_t fp, std::size_t fn) {
    const double denom = 2.0 * tp + fp + fn;
    return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
}

}  // namespace

double f_score(const Confusion& c) { return harmonic(c.tp, c.fp, c.fn); }

double f_score(std::span<const int> pred, std::span<const int> gold) {
    if (pred.empty()) throw Error("f_score: empty input");
    return f_score(confusion(pred, gold));
}

FScores f_scores(const Confusion& c) {
    FScores f;
    f.positive = harmonic(c.tp, c.fp, c.fn);
    f.negative = harmonic(c.tn, c.fn, c.fp);
    const bool positive_present = c.tp + c.fp + c.fn > 0;
    const bool negative_present = c.tn + c.fn + c.fp > 0;
    if (positive_present && negative_present)
        f.macro = 0.5 * (f.positive + f.negative);
    else if (positive_present)
        f.macro = f.positive;
    else if (negative_present)
        f.macro = f.negative;
    const std::size_t n = c.total();
    f.micro = n == 0 ? 0.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(n);
    return f;
}

Kappa cohen_kappa(const Confusion& c) {
    const double n = static_cast<double>(c.total());
    if (n == 0) throw Error("cohen_kappa: empty input");
    const double pred_pos = static_cast<double>(c.tp + c.fp) / n;
    const double gold_pos = static_cast<double>(c.tp + c.fn) / n;
    const double observed = static_cast<double>(c.tp + c.tn) / n;
    const double expected = pred_pos * gold_pos + (1.0 - pred_pos) * (1.0 - gold_pos);
    Kappa k;
    k.degenerate = c.tp + c.fp == 0 || c.fn + c.tn == 0 || c.tp + c.fn == 0 || c.fp + c.tn == 0;
    if (expected >= 1.0) {
        k.value = observed == 1.0 ? 1.0 : 0.0;
        return k;
    }
    k.value = (observed - expected) / (1.0 - expected);
    return k;
}

Kappa cohen_kappa(std::span<const int> pred, std::span<const int> gold) { return cohen_kappa(confusion(pred, gold)); }

std::vector<std::string> LabelledTestSet::words() const {
    std::vector<std::string> out;
    out.reserve(items.size());
    for (const auto& [w, _] : items) out.push_back(w);
    return out;
}

std::vector<int> LabelledTestSet::labels() const {
    std::vector<int> out;
    out.reserve(items.size());
    for (const auto& [_, l] : items) out.push_back(l);
    return out;
}

LabelledTestSet parse_test_set(std::string_view text, std::string annotator_id, std::string group) {
    const TsvTable t = parse_tsv(text);
    const int c_word = t.column("word");
    const int c_label = t.column("label");
    if (c_word < 0 || c_label < 0) throw IngestError(1, "test set needs columns word and label");
    LabelledTestSet set{std::move(annotator_id), std::move(group), {}};
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::size_t line = t.line_numbers[r];
        if (row.size() != t.header.size()) throw IngestError(line, "wrong number of fields");
        const std::string word = to_lower(row[static_cast<std::size_t>(c_word)]);
        const std::string& label = row[static_cast<std::size_t>(c_label)];
        if (label != "0" && label != "1") throw IngestError(line, "label must be 0 or 1");
        if (!seen.insert(word).second) throw IngestError(line, "duplicate word '" + word + "'");
        set.items.emplace_back(word, label == "1" ? 1 : 0);
    }
    return set;
}

std::string test_set_tsv(const LabelledTestSet& set) {
    std::string out = "word\tlabel\n";
    for (const auto& [w, l] : set.items) out += w + "\t" + std::to_string(l) + "\n";
    return out;
}

BaselinePrediction baseline_group_average(std::span<const LabelledTestSet> group, const LabelledTestSet& target,
                                          double threshold, bool leave_one_out) {
    std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> votes;   // complex, total
    for (const auto& set : group) {
        if (leave_one_out && !target.annotator_id.empty() && set.annotator_id == target.annotator_id) continue;
        for (const auto& [w, l] : set.items) {
            auto& v = votes[w];
            v.first += static_cast<std::size_t>(l);
            ++v.second;
        }
    }
    BaselinePrediction out;
    for (const auto& [w, _] : target.items) {
        const auto it = votes.find(w);
        if (it == votes.end() || it->second.second == 0) {
            out.labels.push_back(0);
            out.flagged.push_back(w);
            continue;
        }
        const double fraction = static_cast<double>(it->second.first) / static_cast<double>(it->second.second);
        out.labels.push_back(fraction > threshold ? 1 : 0);
    }
    return out;
}

std::vector<int> baseline_frequency(const std::unordered_map<std::string, double>& frequency, double threshold,
                                    std::span<const std::string> words) {
    std::vector<int> out;
    out.reserve(words.size());
    for (const auto& w : words) {
        const auto it = frequency.find(w);
        const double f = it == frequency.end() ? 0.0 : it->second;
        out.push_back(f < threshold ? 1 : 0);
    }
    return out;
}

double sweep_frequency_threshold(const std::unordered_map<std::string, double>& frequency,
                                 std::span<const std::pair<std::string, int>> calibration) {
    if (calibration.empty()) throw Error("sweep_frequency_threshold: empty calibration set");
    std::vector<std::pair<double, int>> items;
    items.reserve(calibration.size());
    for (const auto& [w, l] : calibration) {
        const auto it = frequency.find(w);
        items.emplace_back(it == frequency.end() ? 0.0 : it->second, l);
    }
    std::sort(items.begin(), items.end());

    // Threshold items[i].first marks exactly items[0..i) complex (ties share a value).
    std::size_t gold_pos = 0;
    for (const auto& [_, l] : items) gold_pos += static_cast<std::size_t>(l);
    double best_threshold = 0.0;
    double best_f = -1.0;
    Confusion c;
    c.fn = gold_pos;
    c.tn = items.size() - gold_pos;
    std::size_t i = 0;
    while (true) {
        const double candidate =
            i < items.size() ? items[i].first : std::numeric_limits<double>::infinity();
        const double f = f_scores(c).macro;
        if (f > best_f) {
            best_f = f;
            best_threshold = candidate;
        }
        if (i == items.size()) break;
        const double value = items[i].first;
        for (; i < items.size() && items[i].first == value; ++i) {
            if (items[i].second == 1) {
                --c.fn;
                ++c.tp;
            } else {
                --c.tn;
                ++c.fp;
            }
        }
    }
    return best_threshold;
}

std::vector<int> baseline_all_simple(std::size_t n) { return std::vector<int>(n, 0); }

std::unordered_map<std::string, int> parse_external_predictions(std::string_view text) {
    const TsvTable t = parse_tsv(text);
    const int c_word = t.column("word");
    const int c_label = t.column("label");
    if (c_word < 0 || c_label < 0) throw IngestError(1, "predictions file needs columns word and label");
    std::unordered_map<std::string, int> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::size_t line = t.line_numbers[r];
        if (row.size() != t.header.size()) throw IngestError(line, "wrong number of fields");
        const std::string& label = row[static_cast<std::size_t>(c_label)];
        if (label != "0" && label != "1") throw IngestError(line, "label must be 0 or 1");
        if (!out.emplace(to_lower(row[static_cast<std::size_t>(c_word)]), label == "1" ? 1 : 0).second)
            throw IngestError(line, "duplicate word");
    }
    return out;
}

std::string external_predictions_tsv(const std::map<std::string, int>& labels) {
    std::string out = "word\tlabel\n";
    for (const auto& [w, l] : labels) out += w + "\t" + std::to_string(l) + "\n";
    return out;
}

std::vector<int> baseline_external(const std::unordered_map<std::string, int>& predictions,
                                   std::span<const std::string> words) {
    std::vector<int> out;
    out.reserve(words.size());
    for (const auto& w : words) {
        const auto it = predictions.find(w);
        if (it == predictions.end()) throw Error("external predictions have no label for '" + w + "'");
        out.push_back(it->second);
    }
    return out;
}

void EvaluationReport::add(const std::string& system, const std::string& group, std::span<const int> pred,
                           std::span<const int> gold) {
    if (group == kAllGroups) throw Error("group name 'all' is reserved");
    const Confusion c = confusion(pred, gold);
    if (std::find(systems_.begin(), systems_.end(), system) == systems_.end()) systems_.push_back(system);
    if (std::find(groups_.begin(), groups_.end(), group) == groups_.end()) groups_.push_back(group);
    for (const std::string& g : {group, std::string(kAllGroups)}) {
        ReportCell& cell = cells_[{system, g}];
        cell.counts += c;
        finalize(cell);
    }
}

void EvaluationReport::finalize(ReportCell& c) {
    c.f = f_scores(c.counts);
    if (c.counts.total() > 0) c.kappa = cohen_kappa(c.counts);
}

bool EvaluationReport::has(const std::string& system, const std::string& group) const {
    return cells_.count({system, group}) > 0;
}

const ReportCell& EvaluationReport::cell(const std::string& system, const std::string& group) const {
    const auto it = cells_.find({system, group});
    if (it == cells_.end()) throw Error("no report cell for " + system + "/" + group);
    return it->second;
}

std::vector<std::string> EvaluationReport::groups() const {
    std::vector<std::string> out = groups_;
    out.emplace_back(kAllGroups);
    return out;
}

std::string EvaluationReport::table_csv() const {
    const auto gs = groups();
    std::ostringstream out;
    out << "panel,system";
    for (const auto& g : gs) out << ',' << g;
    out << '\n';
    auto panel = [&](const char* name, auto value) {
        for (const auto& s : systems_) {
            out << name << ',' << s;
            for (const auto& g : gs) {
                out << ',';
                if (has(s, g)) out << format_double(value(cell(s, g)));
            }
            out << '\n';
        }
    };
    panel("f_score", [](const ReportCell& c) { return c.f.macro; });
    panel("kappa", [](const ReportCell& c) { return c.kappa.value; });
    out << "test_size,";
    for (const auto& g : gs) {
        std::size_t n = 0;
        for (const auto& s : systems_)
            if (has(s, g)) n = std::max(n, cell(s, g).counts.total());
        out << ',' << n;
    }
    out << '\n';
    return out.str();
}

std::string EvaluationReport::long_csv() const {
    std::ostringstream out;
    out << "system,group,f_macro,f_complex,f_simple,f_micro,kappa,kappa_degenerate,test_size,tp,fp,fn,tn\n";
    for (const auto& s : systems_)
        for (const auto& g : groups()) {
            if (!has(s, g)) continue;
            const ReportCell& c = cell(s, g);
            out << s << ',' << g << ',' << format_double(c.f.macro) << ',' << format_double(c.f.positive) << ','
                << format_double(c.f.negative) << ',' << format_double(c.f.micro) << ','
                << format_double(c.kappa.value) << ',' << (c.kappa.degenerate ? 1 : 0) << ',' << c.counts.total()
                << ',' << c.counts.tp << ',' << c.counts.fp << ',' << c.counts.fn << ',' << c.counts.tn << '\n';
        }
    return out.str();
}

}  // namespace pcwi
