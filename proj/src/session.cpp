#include "pcwi/session.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <unordered_set>

namespace pcwi {

using nlohmann::json;

namespace {
constexpr std::array<std::string_view, 5> kProficiencyNames = {"beginner", "intermediate", "advanced", "near_native",
                                                               "native"};
}

std::string_view to_string(Proficiency p) { return kProficiencyNames[static_cast<std::size_t>(p)]; }

std::optional<Proficiency> proficiency_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kProficiencyNames.size(); ++i)
        if (kProficiencyNames[i] == s) return static_cast<Proficiency>(i);
    return std::nullopt;
}

json profile_to_json(const AnnotatorProfile& p) {
    return {{"proficiency", to_string(p.proficiency)},
            {"first_language", p.first_language},
            {"hours_reading_weekly", p.hours_reading_weekly},
            {"education", p.education},
            {"age", p.age}};
}

std::optional<AnnotatorProfile> profile_from_json(const json& j, std::map<std::string, std::string>& errors) {
    AnnotatorProfile p;
    if (!j.is_object()) {
        errors["body"] = "expected an object";
        return std::nullopt;
    }
    if (!j.contains("proficiency") || !j["proficiency"].is_string()) {
        errors["proficiency"] = "required";
    } else if (auto prof = proficiency_from_string(j["proficiency"].get<std::string>())) {
        p.proficiency = *prof;
    } else {
        errors["proficiency"] = "must be one of beginner, intermediate, advanced, near_native, native";
    }
    auto optional_string = [&](const char* key, std::string& out) {
        if (!j.contains(key) || j[key].is_null()) return;
        if (!j[key].is_string())
            errors[key] = "must be a string";
        else
            out = j[key].get<std::string>();
    };
    optional_string("first_language", p.first_language);
    optional_string("hours_reading_weekly", p.hours_reading_weekly);
    optional_string("education", p.education);
    optional_string("age", p.age);
    if (!errors.empty()) return std::nullopt;
    return p;
}

json config_to_json(const SessionConfig& c) {
    return {{"budget", c.budget},
            {"test_size", c.test_size},
            {"propagation_m", c.propagation_m},
            {"scope", to_string(c.scope)},
            {"propagate", c.propagate},
            {"propagation_weight", c.propagation_weight},
            {"lambda", c.lambda},
            {"tolerance", c.tolerance},
            {"max_iterations", c.max_iterations},
            {"keep_seed", c.keep_seed},
            {"strategy", c.strategy == QueryStrategy::entropy ? "entropy" : "random"},
            {"rng_seed", c.rng_seed},
            {"test_set_path", c.test_set_path}};
}

SessionConfig config_from_json(const json& j, SessionConfig c) {
    if (j.is_null()) return c;
    if (!j.is_object()) throw Error("session config must be an object");
    try {
        if (j.contains("budget")) c.budget = j["budget"].get<int>();
        if (j.contains("test_size")) c.test_size = j["test_size"].get<int>();
        if (j.contains("propagation_m")) c.propagation_m = j["propagation_m"].get<std::size_t>();
        if (j.contains("scope")) c.scope = scope_from_string(j["scope"].get<std::string>());
        if (j.contains("propagate")) c.propagate = j["propagate"].get<bool>();
        if (j.contains("propagation_weight")) c.propagation_weight = j["propagation_weight"].get<double>();
        if (j.contains("lambda")) c.lambda = j["lambda"].get<double>();
        if (j.contains("tolerance")) c.tolerance = j["tolerance"].get<double>();
        if (j.contains("max_iterations")) c.max_iterations = j["max_iterations"].get<int>();
        if (j.contains("keep_seed")) c.keep_seed = j["keep_seed"].get<bool>();
        if (j.contains("strategy")) {
            const auto s = j["strategy"].get<std::string>();
            if (s == "entropy")
                c.strategy = QueryStrategy::entropy;
            else if (s == "random")
                c.strategy = QueryStrategy::random;
            else
                throw Error("unknown query strategy: " + s);
        }
        if (j.contains("rng_seed")) c.rng_seed = j["rng_seed"].get<std::uint64_t>();
        if (j.contains("test_set_path")) c.test_set_path = j["test_set_path"].get<std::string>();
    } catch (const json::exception& e) {
        throw Error(std::string("session config: ") + e.what());
    }
    if (c.budget < 0) throw Error("session config: budget must be >= 0");
    if (c.propagation_m < 1) throw Error("session config: propagation_m must be >= 1");
    if (!(c.propagation_weight > 0)) throw Error("session config: propagation_weight must be > 0");
    if (c.lambda < 0) throw Error("session config: lambda must be >= 0");
    return c;
}

std::shared_ptr<const Resources> Resources::make(Pool pool, ClusterIndex clusters, std::vector<LabeledInstance> seed,
                                                 std::vector<TestItem> test_items, FeatureSource features) {
    auto r = std::make_shared<Resources>();
    assign_clusters(pool, clusters);
    if (seed.empty()) throw Error("no seed instances");
    for (const auto& s : seed)
        if (s.features.size() != pool.dim()) throw DimensionError("seed instance dimension mismatch");
    for (const auto& t : test_items)
        if (t.features.size() != pool.dim()) throw DimensionError("test item dimension mismatch");
    r->is_test.assign(pool.size(), false);
    for (const auto& t : test_items)
        if (auto i = pool.find(t.word)) {
            r->is_test[*i] = true;
            pool.entries[*i].provenance = Provenance::test;
        }
    for (const auto& s : seed)
        if (auto i = pool.find(s.word); i && pool.entries[*i].provenance == Provenance::pool)
            pool.entries[*i].provenance = Provenance::seed;
    r->pool = std::move(pool);
    r->clusters = std::move(clusters);
    r->seed = std::move(seed);
    r->test_items = std::move(test_items);
    r->features = std::move(features);
    return r;
}

namespace {

std::vector<double> features_for(const std::string& word, const Pool& pool, const FeatureSource& features,
                                 std::size_t line) {
    if (auto i = pool.find(word)) return pool.entries[*i].features;
    if (const auto* rec = features.find(word)) return featurize(*rec, pool.stats);
    throw IngestError(line, "no feature record for '" + word + "'");
}

}  // namespace

std::vector<LabeledInstance> load_seed_instances(std::string_view text, const Pool& pool, const FeatureSource& features,
                                                 int vote_threshold) {
    const TsvTable t = parse_tsv(text);
    const int c_word = t.column("word");
    const int c_votes = t.column("votes");
    const int c_label = t.column("label");
    if (c_word < 0 || (c_votes < 0 && c_label < 0))
        throw IngestError(1, "seed file needs columns word and votes or label");
    std::vector<LabeledInstance> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::size_t line = t.line_numbers[r];
        if (row.size() != t.header.size()) throw IngestError(line, "wrong number of fields");
        LabeledInstance x;
        x.word = to_lower(row[static_cast<std::size_t>(c_word)]);
        x.source = LabelSource::seed;
        try {
            if (c_label >= 0) {
                x.label = std::stoi(row[static_cast<std::size_t>(c_label)]);
                if (x.label != 0 && x.label != 1) throw IngestError(line, "label must be 0 or 1");
            } else {
                x.label = binarize_seed_label(std::stoi(row[static_cast<std::size_t>(c_votes)]), vote_threshold);
            }
        } catch (const std::logic_error&) {
            throw IngestError(line, "unparseable label");
        } catch (const IngestError&) {
            throw;
        } catch (const Error& e) {
            throw IngestError(line, e.what());
        }
        x.features = features_for(x.word, pool, features, line);
        out.push_back(std::move(x));
    }
    return out;
}

std::vector<TestItem> load_test_items(std::string_view text, const Pool& pool, const FeatureSource& features) {
    const TsvTable t = parse_tsv(text);
    const int c_word = t.column("word");
    const int c_level = t.column("level");
    if (c_word < 0) throw IngestError(1, "test list needs a word column");
    std::vector<TestItem> out;
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::size_t line = t.line_numbers[r];
        if (row.size() != t.header.size()) throw IngestError(line, "wrong number of fields");
        TestItem item;
        item.word = to_lower(row[static_cast<std::size_t>(c_word)]);
        if (!seen.insert(item.word).second) throw IngestError(line, "duplicate test word '" + item.word + "'");
        if (c_level >= 0) item.level = row[static_cast<std::size_t>(c_level)];
        item.features = features_for(item.word, pool, features, line);
        out.push_back(std::move(item));
    }
    return out;
}

std::shared_ptr<const Resources> load_resources(const ResourcePaths& paths, bool* cluster_cache_hit) {
    if (paths.pool.empty()) throw Error("no pool given");
    if (paths.seed_data.empty()) throw Error("no seed data given");
    if (paths.test_set.empty()) throw Error("no test set given");
    Pool pool = load_pool(paths.pool);
    ClusterIndex clusters;
    if (paths.clusters.empty()) {
        clusters = build_clusters(pool.entries, paths.k, pool.stats.content_hash);
        if (cluster_cache_hit) *cluster_cache_hit = false;
    } else {
        clusters = load_or_build_clusters(pool, paths.k, paths.clusters, cluster_cache_hit);
    }
    FeatureSource features(pool);
    if (!paths.features.empty()) features.add_file(paths.features);
    auto seed = load_seed_instances(read_file(paths.seed_data), pool, features);
    auto tests = load_test_items(read_file(paths.test_set), pool, features);
    return Resources::make(std::move(pool), std::move(clusters), std::move(seed), std::move(tests),
                           std::move(features));
}

std::string_view to_string(PhaseKind k) {
    switch (k) {
        case PhaseKind::created: return "created";
        case PhaseKind::training: return "training";
        case PhaseKind::testing: return "testing";
        case PhaseKind::completed: return "completed";
    }
    return "created";
}

namespace {
constexpr std::array<std::string_view, 8> kEventNames = {
    "session_created", "demographics_recorded", "query_issued",   "annotation_received",
    "labels_propagated", "model_refit",         "phase_advanced", "session_completed"};
}

std::string_view to_string(EventKind k) { return kEventNames[static_cast<std::size_t>(k)]; }

EventKind event_kind_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kEventNames.size(); ++i)
        if (kEventNames[i] == s) return static_cast<EventKind>(i);
    throw Error("unknown event kind: " + std::string(s));
}

std::string event_to_line(const SessionEvent& e) {
    json j = {{"seq", e.sequence_no}, {"ts", e.timestamp}, {"kind", to_string(e.kind)}, {"payload", e.payload}};
    return j.dump() + "\n";
}

SessionEvent event_from_line(std::string_view line) {
    try {
        const json j = json::parse(line);
        SessionEvent e;
        e.sequence_no = j.at("seq").get<std::uint64_t>();
        e.timestamp = j.at("ts").get<std::string>();
        e.kind = event_kind_from_string(j.at("kind").get<std::string>());
        e.payload = j.at("payload");
        return e;
    } catch (const json::exception& ex) {
        throw ReplayError(std::string("malformed event record: ") + ex.what());
    }
}

std::vector<SessionEvent> parse_event_log(std::string_view text) {
    std::vector<SessionEvent> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) break;  // torn final write
        const std::string_view line = text.substr(pos, end - pos);
        if (!line.empty()) out.push_back(event_from_line(line));
        pos = end + 1;
    }
    return out;
}

double binary_entropy(double p) {
    // Symmetric in p <-> 1-p by construction.
    const double q = 0.5 - std::abs(p - 0.5);
    if (q <= 0.0) return 0.0;
    return -q * std::log(q) - (1.0 - q) * std::log1p(-q);
}

std::size_t select_by_entropy(std::span<const std::string> words, std::span<const double> probabilities) {
    if (words.empty() || words.size() != probabilities.size()) throw Error("select_by_entropy: bad input");
    // Entropy is strictly decreasing in |p - 0.5|; ranking on that key keeps
    // distinct probabilities from colliding after rounding in the logs.
    std::size_t best = 0;
    double best_m = std::abs(probabilities[0] - 0.5);
    for (std::size_t i = 1; i < words.size(); ++i) {
        const double m = std::abs(probabilities[i] - 0.5);
        if (m < best_m || (m == best_m && words[i] < words[best])) {
            best = i;
            best_m = m;
        }
    }
    return best;
}

std::size_t select_by_margin(std::span<const std::string> words, std::span<const double> probabilities) {
    if (words.empty() || words.size() != probabilities.size()) throw Error("select_by_margin: bad input");
    std::size_t best = 0;
    double best_m = std::abs(probabilities[0] - 0.5);
    for (std::size_t i = 1; i < words.size(); ++i) {
        const double m = std::abs(probabilities[i] - 0.5);
        if (m < best_m || (m == best_m && words[i] < words[best])) {
            best = i;
            best_m = m;
        }
    }
    return best;
}

std::string iso_timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof(out), "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

// ---------------------------------------------------------------------------
// Session

Session Session::create(std::shared_ptr<const Resources> resources, std::string id, AnnotatorProfile profile,
                        SessionConfig config, Clock clock, Sink sink) {
    if (!resources) throw Error("session needs resources");
    Session s(std::move(resources));
    s.id_ = std::move(id);
    s.profile_ = std::move(profile);
    s.config_ = std::move(config);
    s.clock_ = std::move(clock);
    s.sink_ = std::move(sink);
    s.step(EventKind::session_created, nullptr);
    s.advance();
    return s;
}

Session Session::replay(std::span<const SessionEvent> log, std::shared_ptr<const Resources> resources, Clock clock,
                        Sink sink) {
    if (!resources) throw Error("session needs resources");
    Session s(std::move(resources));
    s.clock_ = std::move(clock);
    for (std::size_t i = 0; i < log.size(); ++i) {
        const SessionEvent& e = log[i];
        if (e.sequence_no != i)
            throw ReplayError("event sequence gap: expected " + std::to_string(i) + ", found " +
                              std::to_string(e.sequence_no));
        if (s.completed()) throw ReplayError("events after session completion");
        const bool annotation = e.kind == EventKind::annotation_received;
        if (annotation != s.awaiting_annotation() || (!annotation && e.kind != s.expected_next()))
            throw ReplayError("unexpected " + std::string(to_string(e.kind)) + " at sequence " + std::to_string(i));
        s.replay_timestamp_ = &e.timestamp;
        s.step(e.kind, &e.payload);
    }
    s.replay_timestamp_ = nullptr;
    s.sink_ = std::move(sink);
    return s;
}

void Session::submit_annotation(std::string_view word, bool knows_word) {
    if (phase_ == PhaseKind::completed) throw SessionClosed("session " + id_ + " is completed");
    if (!awaiting_annotation()) throw Error("session " + id_ + " has an unfinished step");
    const json in = {{"word", word}, {"knows_word", knows_word}};
    step(EventKind::annotation_received, &in);
    advance();
}

void Session::finish_pending_step() {
    if (!log_.empty()) advance();
}

Phase Session::phase() const {
    switch (phase_) {
        case PhaseKind::created: return {PhaseKind::created, 0, 0};
        case PhaseKind::training: return {PhaseKind::training, trained_ + 1, budget_};
        case PhaseKind::testing:
            return {PhaseKind::testing, tested_ + 1, static_cast<int>(test_order_.size())};
        case PhaseKind::completed: return {PhaseKind::completed, 0, 0};
    }
    return {};
}

int Session::item_number() const {
    switch (phase_) {
        case PhaseKind::created: return 0;
        case PhaseKind::training: return trained_ + 1;
        case PhaseKind::testing: return budget_ + tested_ + 1;
        case PhaseKind::completed: return total_items();
    }
    return 0;
}

std::vector<LabeledInstance> Session::labelled_set() const {
    std::vector<LabeledInstance> out;
    if (config_.keep_seed || model_.version == 0) out = res_->seed;
    const auto& entries = res_->pool.entries;
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (!labels_[i]) continue;
        LabeledInstance x;
        x.word = entries[i].word;
        x.features = entries[i].features;
        x.label = labels_[i]->label;
        x.source = labels_[i]->source;
        x.weight = x.source == LabelSource::propagated ? config_.propagation_weight : 1.0;
        out.push_back(std::move(x));
    }
    return out;
}

std::vector<std::size_t> Session::queryable() const {
    std::vector<std::size_t> out;
    const std::size_t n = res_->pool.size();
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (!res_->is_test[i] && !direct_[i]) out.push_back(i);
    return out;
}

std::optional<std::string> Session::rank_and_select() const {
    const auto q = queryable();
    if (q.empty()) return std::nullopt;
    const auto& entries = res_->pool.entries;
    // Single scan; same ordering as select_by_entropy over (words, probabilities).
    std::size_t best = q[0];
    double best_m = std::abs(predict_proba(model_, entries[best].features) - 0.5);
    for (std::size_t k = 1; k < q.size(); ++k) {
        const std::size_t i = q[k];
        const double m = std::abs(predict_proba(model_, entries[i].features) - 0.5);
        if (m < best_m || (m == best_m && entries[i].word < entries[best].word)) {
            best = i;
            best_m = m;
        }
    }
    return entries[best].word;
}

bool Session::awaiting_annotation() const {
    return last_kind_ == EventKind::query_issued && phase_ != PhaseKind::completed;
}

EventKind Session::expected_next() const {
    if (!last_kind_) return EventKind::session_created;
    switch (*last_kind_) {
        case EventKind::session_created: return EventKind::demographics_recorded;
        case EventKind::demographics_recorded: return EventKind::model_refit;
        case EventKind::model_refit:
            if (phase_ == PhaseKind::created) return EventKind::phase_advanced;
            if (trained_ < budget_ && !queryable().empty()) return EventKind::query_issued;
            return EventKind::phase_advanced;
        case EventKind::phase_advanced:
            if (phase_ == PhaseKind::training) return EventKind::query_issued;
            return test_order_.empty() ? EventKind::session_completed : EventKind::query_issued;
        case EventKind::query_issued: return EventKind::annotation_received;
        case EventKind::annotation_received:
            if (phase_ == PhaseKind::training)
                return config_.propagate ? EventKind::labels_propagated : EventKind::model_refit;
            return tested_ < static_cast<int>(test_order_.size()) ? EventKind::query_issued
                                                                   : EventKind::session_completed;
        case EventKind::labels_propagated: return EventKind::model_refit;
        case EventKind::session_completed: break;
    }
    throw Error("session is completed");
}

void Session::advance() {
    while (phase_ != PhaseKind::completed && !awaiting_annotation()) step(expected_next(), nullptr);
}

void Session::step(EventKind kind, const json* logged) {
    json payload;
    switch (kind) {
        case EventKind::session_created: payload = do_created(logged); break;
        case EventKind::demographics_recorded: payload = {{"profile", profile_to_json(profile_)}}; break;
        case EventKind::query_issued: payload = do_query(); break;
        case EventKind::annotation_received: payload = do_annotation(*logged); break;
        case EventKind::labels_propagated: payload = do_propagate(); break;
        case EventKind::model_refit: payload = do_refit(); break;
        case EventKind::phase_advanced: payload = do_phase(); break;
        case EventKind::session_completed: payload = do_complete(); break;
    }
    if (replay_timestamp_ && logged && payload != *logged)
        throw ReplayError(std::string(to_string(kind)) + " at sequence " + std::to_string(log_.size()) +
                          " does not reproduce: logged " + logged->dump() + ", recomputed " + payload.dump());
    append(kind, std::move(payload), replay_timestamp_ ? *replay_timestamp_ : (clock_ ? clock_() : std::string()));
}

void Session::append(EventKind kind, json payload, std::string timestamp) {
    SessionEvent e;
    e.sequence_no = log_.size();
    e.timestamp = std::move(timestamp);
    e.kind = kind;
    e.payload = std::move(payload);
    log_.push_back(std::move(e));
    last_kind_ = kind;
    if (sink_) sink_(log_.back());
}

json Session::do_created(const json* logged) {
    if (logged) {
        id_ = logged->at("session_id").get<std::string>();
        std::map<std::string, std::string> errors;
        auto p = profile_from_json(logged->at("profile"), errors);
        if (!p) throw ReplayError("session_created: invalid profile");
        profile_ = *p;
        config_ = config_from_json(logged->at("config"));
        if (logged->at("pool_hash").get<std::string>() != res_->pool.stats.content_hash)
            throw ReplayError("session was recorded against a different pool (hash mismatch)");
    }
    config_ = config_from_json(json::object(), config_);   // validates
    const auto& items = res_->test_items;
    if (config_.test_size > static_cast<int>(items.size()))
        throw Error("test_size exceeds the test list (" + std::to_string(items.size()) + " words)");
    const std::size_t t = config_.test_size < 0 ? items.size() : static_cast<std::size_t>(config_.test_size);
    test_order_.clear();
    for (std::size_t i = 0; i < t; ++i) test_order_.push_back(items[i].word);
    Rng order_rng(mix_seed(config_.rng_seed, "test_order"));
    order_rng.shuffle(test_order_);

    budget_ = config_.budget;
    labels_.assign(res_->pool.size(), std::nullopt);
    direct_.assign(res_->pool.size(), false);
    query_rng_ = Rng(mix_seed(config_.rng_seed, "query"));

    return {{"session_id", id_},
            {"pool_hash", res_->pool.stats.content_hash},
            {"config", config_to_json(config_)},
            {"profile", profile_to_json(profile_)},
            {"test_order", test_order_}};
}

const TestItem* Session::test_item(std::string_view word) const {
    for (const auto& t : res_->test_items)
        if (t.word == word) return &t;
    return nullptr;
}

json Session::do_annotation(const json& in) {
    const std::string word = in.at("word").get<std::string>();
    const bool knows = in.at("knows_word").get<bool>();
    if (!current_query_ || word != *current_query_)
        throw AnnotationRejected("annotation for '" + word + "' does not match the current query",
                                 current_query_.value_or(""));
    const int label = knows ? 0 : 1;
    const int item = item_number();
    const std::string phase_name(to_string(phase_));
    if (phase_ == PhaseKind::training) {
        const auto idx = res_->pool.find(word);
        if (!idx) throw Error("training query '" + word + "' is not in the pool");
        direct_[*idx] = true;
        labels_[*idx] = Label{label, LabelSource::direct};
        last_anchor_ = *idx;
        ++trained_;
    } else {
        test_answers_.emplace_back(word, label);
        ++tested_;
    }
    current_query_.reset();
    return {{"word", word}, {"knows_word", knows}, {"label", label}, {"item_number", item}, {"phase", phase_name}};
}

json Session::do_propagate() {
    if (!last_anchor_) throw Error("propagation without an anchor");
    const auto& entries = res_->pool.entries;
    const std::size_t anchor = *last_anchor_;
    const int label = labels_[anchor]->label;
    const auto targets = nearest_neighbours(entries[anchor], entries, config_.propagation_m, config_.scope,
                                            [this](std::size_t i) { return !res_->is_test[i]; });
    std::vector<std::string> written;
    for (std::size_t t : targets) {
        if (direct_[t]) continue;
        labels_[t] = Label{label, LabelSource::propagated};
        written.push_back(entries[t].word);
    }
    return {{"anchor", entries[anchor].word}, {"label", label}, {"count", written.size()}, {"targets", written}};
}

json Session::do_refit() {
    const auto data = labelled_set();
    FitConfig fc;
    fc.regularization_strength = config_.lambda;
    fc.tolerance = config_.tolerance;
    fc.max_iterations = config_.max_iterations;
    const int version = model_.version + 1;
    model_ = fit(data, fc);
    model_.normalization = res_->pool.stats;
    model_.version = version;
    model_.session_id = id_;
    return {{"version", model_.version},
            {"weights", model_.weights},
            {"bias", model_.bias},
            {"degenerate", model_.degenerate},
            {"trained_on",
             {{"seed", model_.trained_on.seed},
              {"direct", model_.trained_on.direct},
              {"propagated", model_.trained_on.propagated}}}};
}

json Session::do_query() {
    std::string word;
    if (phase_ == PhaseKind::training) {
        if (config_.strategy == QueryStrategy::entropy) {
            auto w = rank_and_select();
            if (!w) throw Error("no queryable words left");
            word = *w;
        } else {
            const auto q = queryable();
            if (q.empty()) throw Error("no queryable words left");
            word = res_->pool.entries[q[query_rng_.below(q.size())]].word;
        }
        queried_.push_back(word);
    } else if (phase_ == PhaseKind::testing) {
        word = test_order_.at(static_cast<std::size_t>(tested_));
    } else {
        throw Error("query outside training/testing");
    }
    current_query_ = word;
    return {{"word", word}, {"item_number", item_number()}};
}

json Session::do_phase() {
    if (phase_ == PhaseKind::created) {
        phase_ = budget_ > 0 ? PhaseKind::training : PhaseKind::testing;
    } else if (phase_ == PhaseKind::training) {
        budget_ = trained_;   // shrinks only if the pool ran out
        phase_ = PhaseKind::testing;
    } else {
        throw Error("invalid phase transition from " + std::string(to_string(phase_)));
    }
    const int total = phase_ == PhaseKind::training ? budget_ : static_cast<int>(test_order_.size());
    return {{"phase", to_string(phase_)}, {"total", total}};
}

json Session::do_complete() {
    phase_ = PhaseKind::completed;
    return {{"training_annotations", trained_}, {"test_annotations", tested_}};
}

}  // namespace pcwi
