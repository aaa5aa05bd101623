#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcwi/clustering.hpp"
#include "pcwi/lexicon.hpp"
#include "pcwi/model.hpp"

namespace pcwi {

enum class Proficiency { beginner, intermediate, advanced, near_native, native };

std::string_view to_string(Proficiency p);
std::optional<Proficiency> proficiency_from_string(std::string_view s);

struct AnnotatorProfile {
    Proficiency proficiency = Proficiency::intermediate;
    std::string first_language;
    std::string hours_reading_weekly;
    std::string education;
    std::string age;
};

nlohmann::json profile_to_json(const AnnotatorProfile& p);
// Collects per-field problems into `errors` (field -> message); nullopt if any.
std::optional<AnnotatorProfile> profile_from_json(const nlohmann::json& j, std::map<std::string, std::string>& errors);

enum class QueryStrategy { entropy, random };

struct SessionConfig {
    int budget = 23;
    int test_size = -1;                  // < 0: the whole test list
    std::size_t propagation_m = 150;
    PropagationScope scope = PropagationScope::same_cluster;
    bool propagate = true;
    double propagation_weight = 1.0;
    double lambda = 1.0;
    double tolerance = 1e-8;
    int max_iterations = 1000;
    bool keep_seed = true;
    QueryStrategy strategy = QueryStrategy::entropy;
    std::uint64_t rng_seed = 0;
    std::string test_set_path;
};

nlohmann::json config_to_json(const SessionConfig& c);
// Fields absent from `j` keep the values in `base`.
SessionConfig config_from_json(const nlohmann::json& j, SessionConfig base = {});

struct TestItem {
    std::string word;
    std::vector<double> features;
    std::string level;
};

// Shared, immutable inputs of every session over one pool.
struct Resources {
    Pool pool;   // cluster ids assigned
    ClusterIndex clusters;
    std::vector<LabeledInstance> seed;
    std::vector<TestItem> test_items;
    FeatureSource features;

    std::vector<bool> is_test;   // per pool index

    static std::shared_ptr<const Resources> make(Pool pool, ClusterIndex clusters, std::vector<LabeledInstance> seed,
                                                 std::vector<TestItem> test_items, FeatureSource features = {});
};

struct ResourcePaths {
    std::string pool;        // raw TSV or ingested directory
    std::string clusters;    // cache file, built and written when stale or absent; empty: no cache
    int k = 7;
    std::string seed_data;
    std::string test_set;
    std::string features;    // optional lexicon TSV for words outside the pool
};

std::shared_ptr<const Resources> load_resources(const ResourcePaths& paths, bool* cluster_cache_hit = nullptr);

// Seed file: header `word` plus `votes` (binarized at vote_threshold) or `label`.
std::vector<LabeledInstance> load_seed_instances(std::string_view text, const Pool& pool, const FeatureSource& features,
                                                 int vote_threshold = 1);
// Test list: header `word` and optional `level`.
std::vector<TestItem> load_test_items(std::string_view text, const Pool& pool, const FeatureSource& features);

enum class PhaseKind { created, training, testing, completed };

struct Phase {
    PhaseKind kind = PhaseKind::created;
    int index = 0;   // 1-based position within the phase
    int total = 0;
};

std::string_view to_string(PhaseKind k);

enum class EventKind {
    session_created,
    demographics_recorded,
    query_issued,
    annotation_received,
    labels_propagated,
    model_refit,
    phase_advanced,
    session_completed
};

std::string_view to_string(EventKind k);
EventKind event_kind_from_string(std::string_view s);

struct SessionEvent {
    std::uint64_t sequence_no = 0;
    std::string timestamp;
    EventKind kind = EventKind::session_created;
    nlohmann::json payload;
};

std::string event_to_line(const SessionEvent& e);
SessionEvent event_from_line(std::string_view line);
// Parses a log file body; a trailing partial line (no newline) is dropped.
std::vector<SessionEvent> parse_event_log(std::string_view text);

class AnnotationRejected : public Error {
public:
    AnnotationRejected(const std::string& msg, std::string expected)
        : Error(msg), expected_word_(std::move(expected)) {}
    const std::string& expected_word() const { return expected_word_; }

private:
    std::string expected_word_;
};

class SessionClosed : public Error {
public:
    using Error::Error;
};

class ReplayError : public Error {
public:
    using Error::Error;
};

double binary_entropy(double p);

// Index of the entropy maximiser; ties go to the lexicographically smaller word.
std::size_t select_by_entropy(std::span<const std::string> words, std::span<const double> probabilities);
// Index of the probability closest to 0.5, same tie rule.
std::size_t select_by_margin(std::span<const std::string> words, std::span<const double> probabilities);

std::string iso_timestamp_now();

// Annotate -> propagate -> refit -> rank engine with a hidden train/test
// switch. Every state change is one SessionEvent; replaying the log
// re-executes the same steps and checks each regenerated payload.
class Session {
public:
    using Clock = std::function<std::string()>;
    using Sink = std::function<void(const SessionEvent&)>;

    static Session create(std::shared_ptr<const Resources> resources, std::string id, AnnotatorProfile profile,
                          SessionConfig config, Clock clock = iso_timestamp_now, Sink sink = {});

    // Rebuilds state from a log (or any prefix of one). Events appended
    // afterwards go to `sink`.
    static Session replay(std::span<const SessionEvent> log, std::shared_ptr<const Resources> resources,
                          Clock clock = iso_timestamp_now, Sink sink = {});

    void submit_annotation(std::string_view word, bool knows_word);

    // Runs the remaining steps of an annotation whose follow-up events are
    // missing (log cut short after annotation_received).
    void finish_pending_step();

    const std::string& id() const { return id_; }
    const AnnotatorProfile& profile() const { return profile_; }
    const SessionConfig& config() const { return config_; }
    Phase phase() const;
    bool completed() const { return phase_ == PhaseKind::completed; }
    bool training_finished() const { return phase_ == PhaseKind::testing || phase_ == PhaseKind::completed; }
    const std::optional<std::string>& current_query() const { return current_query_; }
    int item_number() const;    // 1-based, over training + testing
    int total_items() const { return budget_ + static_cast<int>(test_order_.size()); }
    const PersonalModel& model() const { return model_; }
    const std::vector<SessionEvent>& event_log() const { return log_; }
    const std::vector<std::string>& test_order() const { return test_order_; }
    const std::vector<std::pair<std::string, int>>& test_answers() const { return test_answers_; }
    const std::vector<std::string>& queried_words() const { return queried_; }
    const Resources& resources() const { return *res_; }

    // Current labelled set: seed (if kept), then direct/propagated in pool order.
    std::vector<LabeledInstance> labelled_set() const;
    // Pool words still eligible for querying, in pool order.
    std::vector<std::size_t> queryable() const;

    // Entropy ranking over the queryable pool under the current model.
    std::optional<std::string> rank_and_select() const;

private:
    explicit Session(std::shared_ptr<const Resources> resources) : res_(std::move(resources)) {}

    struct Label {
        int label;
        LabelSource source;
    };

    EventKind expected_next() const;
    bool awaiting_annotation() const;
    void advance();   // run automatic steps until an annotation is needed

    // Each step appends exactly one event.
    void step(EventKind kind, const nlohmann::json* logged);
    nlohmann::json do_created(const nlohmann::json* logged);
    nlohmann::json do_annotation(const nlohmann::json& in);
    nlohmann::json do_propagate();
    nlohmann::json do_refit();
    nlohmann::json do_query();
    nlohmann::json do_phase();
    nlohmann::json do_complete();

    void append(EventKind kind, nlohmann::json payload, std::string timestamp);
    const TestItem* test_item(std::string_view word) const;

    std::shared_ptr<const Resources> res_;
    std::string id_;
    AnnotatorProfile profile_;
    SessionConfig config_;
    Clock clock_;
    Sink sink_;
    const std::string* replay_timestamp_ = nullptr;

    PhaseKind phase_ = PhaseKind::created;
    int budget_ = 0;
    int trained_ = 0;          // training annotations received
    int tested_ = 0;           // test annotations received
    std::vector<std::string> test_order_;
    std::vector<std::optional<Label>> labels_;   // per pool index
    std::vector<bool> direct_;
    std::vector<std::string> queried_;
    std::vector<std::pair<std::string, int>> test_answers_;
    std::optional<std::string> current_query_;
    std::optional<std::size_t> last_anchor_;
    PersonalModel model_;
    Rng query_rng_{0};
    std::vector<SessionEvent> log_;
    std::optional<EventKind> last_kind_;
};

}  // namespace pcwi
