#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "pcwi/session.hpp"
#include "test_support.hpp"

using namespace pcwi;
using pcwi::test_support::small_world;

namespace {

std::string fixed_clock() { return "2024-01-01T00:00:00.000Z"; }

bool knows(const Resources& res, const std::string& word) {
    const auto* r = res.features.find(word);
    return r && r->frequency > 10.0;
}

Session new_session(SessionConfig config = {}, std::uint64_t seed = 5) {
    config.rng_seed = seed;
    AnnotatorProfile profile;
    profile.proficiency = Proficiency::advanced;
    return Session::create(small_world().resources, "s-test", profile, config, fixed_clock);
}

void answer_all(Session& s) {
    while (!s.completed()) s.submit_annotation(*s.current_query(), knows(s.resources(), *s.current_query()));
}

}  // namespace

TEST(Entropy, ClosedFormAndSelection) {
    EXPECT_NEAR(binary_entropy(0.5), std::log(2.0), 1e-15);
    const std::vector<std::string> words = {"a", "b", "c"};
    const std::vector<double> p = {0.9, 0.55, 0.1};
    EXPECT_EQ(select_by_entropy(words, p), 1u);
}

TEST(Entropy, TiesBreakLexicographically) {
    const std::vector<std::string> words = {"zeta", "alpha", "mid"};
    const std::vector<double> p = {0.4, 0.6, 0.4};
    EXPECT_EQ(select_by_entropy(words, p), 1u);
    EXPECT_EQ(select_by_margin(words, p), 1u);
}

TEST(Entropy, AgreesWithMarginSelectorAndBruteForce) {
    Rng rng(31);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(300);
        std::vector<std::string> words(n);
        std::vector<double> p(n);
        for (std::size_t i = 0; i < n; ++i) {
            words[i] = "w" + std::to_string(rng.below(100000));
            // Dyadic grid so exact ties and exact mirrored values (p, 1 - p) occur.
            p[i] = trial % 2 ? rng.uniform() : static_cast<double>(1 + rng.below(15)) / 16.0;
        }
        const std::size_t e = select_by_entropy(words, p);
        EXPECT_EQ(e, select_by_margin(words, p));
        std::size_t brute = 0;
        for (std::size_t i = 1; i < n; ++i) {
            const double hi = -p[i] * std::log(p[i]) - (1 - p[i]) * std::log(1 - p[i]);
            const double hb = -p[brute] * std::log(p[brute]) - (1 - p[brute]) * std::log(1 - p[brute]);
            if (hi > hb + 1e-12 || (std::abs(hi - hb) <= 1e-12 && words[i] < words[brute])) brute = i;
        }
        EXPECT_EQ(words[e], words[brute]);
    }
}

TEST(Session, FreshSessionStartsTraining) {
    const Session s = new_session();
    EXPECT_EQ(s.phase().kind, PhaseKind::training);
    EXPECT_EQ(s.phase().index, 1);
    EXPECT_EQ(s.phase().total, 23);
    EXPECT_EQ(s.item_number(), 1);
    EXPECT_EQ(s.total_items(), 23 + static_cast<int>(small_world().resources->test_items.size()));
    ASSERT_TRUE(s.current_query());
    EXPECT_EQ(s.model().version, 1);
    EXPECT_EQ(s.model().trained_on.seed, small_world().resources->seed.size());
}

TEST(Session, MinimalBudgetCompletesAfterOneAnnotation) {
    SessionConfig c;
    c.budget = 1;
    c.test_size = 0;
    Session s = new_session(c);
    EXPECT_FALSE(s.completed());
    s.submit_annotation(*s.current_query(), true);
    EXPECT_TRUE(s.completed());
    EXPECT_THROW(s.submit_annotation("anything", true), SessionClosed);
}

TEST(Session, LabelSemanticsAndDirectPrecedence) {
    Session s = new_session();
    const std::string first = *s.current_query();
    s.submit_annotation(first, false);
    bool found = false;
    for (const auto& x : s.labelled_set())
        if (x.word == first) {
            EXPECT_EQ(x.label, 1);
            EXPECT_EQ(x.source, LabelSource::direct);
            EXPECT_FALSE(found);
            found = true;
        }
    EXPECT_TRUE(found);
}

TEST(Session, MismatchedWordRejectedWithExpectedQuery) {
    Session s = new_session();
    const std::string expected = *s.current_query();
    try {
        s.submit_annotation(expected + "x", true);
        FAIL() << "expected rejection";
    } catch (const AnnotationRejected& e) {
        EXPECT_EQ(e.expected_word(), expected);
    }
    EXPECT_EQ(s.event_log().back().kind, EventKind::query_issued);
}

TEST(Session, PhaseSwitchAndTestIsolation) {
    Session s = new_session();
    const auto& res = *small_world().resources;
    std::set<std::string> test_words;
    for (const auto& t : res.test_items) test_words.insert(t.word);
    for (int i = 0; i < 23; ++i) {
        ASSERT_EQ(s.phase().kind, PhaseKind::training);
        EXPECT_FALSE(test_words.count(*s.current_query()));
        s.submit_annotation(*s.current_query(), knows(res, *s.current_query()));
    }
    EXPECT_EQ(s.phase().kind, PhaseKind::testing);
    EXPECT_EQ(s.phase().index, 1);
    EXPECT_EQ(s.item_number(), 24);
    EXPECT_EQ(s.model().version, 1 + 23);
    const std::string before = export_model(s.model());
    answer_all(s);
    EXPECT_EQ(export_model(s.model()), before);
    EXPECT_EQ(s.test_answers().size(), res.test_items.size());

    std::set<std::string> queried(s.queried_words().begin(), s.queried_words().end());
    EXPECT_EQ(queried.size(), 23u);
}

TEST(Session, PropagationRespectsClusterAndBounds) {
    Session s = new_session();
    const auto& res = *small_world().resources;
    answer_all(s);
    std::size_t propagated_events = 0;
    for (const auto& e : s.event_log()) {
        if (e.kind != EventKind::labels_propagated) continue;
        ++propagated_events;
        const auto anchor = *res.pool.find(e.payload["anchor"].get<std::string>());
        const auto targets = e.payload["targets"].get<std::vector<std::string>>();
        EXPECT_LE(targets.size(), 150u);
        for (const auto& w : targets) {
            const auto i = *res.pool.find(w);
            EXPECT_EQ(res.pool.entries[i].cluster_id, res.pool.entries[anchor].cluster_id);
            EXPECT_FALSE(res.is_test[i]);
        }
    }
    EXPECT_EQ(propagated_events, 23u);
    const auto set = s.labelled_set();
    EXPECT_LE(set.size(), res.seed.size() + 23 + 23 * 150);
    std::size_t direct = 0;
    for (const auto& x : set) direct += x.source == LabelSource::direct;
    EXPECT_EQ(direct, 23u);
}

TEST(Session, SameSeedSameAnswersSameQueries) {
    Session a = new_session({}, 11), b = new_session({}, 11);
    answer_all(a);
    answer_all(b);
    EXPECT_EQ(a.queried_words(), b.queried_words());
    EXPECT_EQ(a.test_order(), b.test_order());
    EXPECT_EQ(export_model(a.model()), export_model(b.model()));
}

TEST(Replay, CompletedSessionReproducesModel) {
    Session live = new_session();
    answer_all(live);
    std::string text;
    for (const auto& e : live.event_log()) text += event_to_line(e);
    const auto log = parse_event_log(text);
    const Session back = Session::replay(log, small_world().resources, fixed_clock);
    EXPECT_TRUE(back.completed());
    EXPECT_EQ(export_model(back.model()), export_model(live.model()));
    for (std::size_t j = 0; j < live.model().weights.size(); ++j)
        EXPECT_LE(std::abs(back.model().weights[j] - live.model().weights[j]), 1e-12);
}

TEST(Replay, PrefixGivesIntermediateState) {
    Session live = new_session();
    for (int i = 0; i < 3; ++i) live.submit_annotation(*live.current_query(), false);
    const std::size_t cut = 10;
    const std::span<const SessionEvent> prefix(live.event_log().data(), cut);
    const Session back = Session::replay(prefix, small_world().resources, fixed_clock);
    EXPECT_EQ(back.event_log().size(), cut);
    const Session empty = Session::replay({}, small_world().resources, fixed_clock);
    EXPECT_EQ(empty.phase().kind, PhaseKind::created);
}

TEST(Replay, ContinuesAfterTruncationAtAnnotation) {
    Session live = new_session();
    for (int i = 0; i < 4; ++i) live.submit_annotation(*live.current_query(), i % 2 == 0);
    std::vector<SessionEvent> log = live.event_log();
    // Cut just after the most recent annotation_received.
    std::size_t last = 0;
    for (std::size_t i = 0; i < log.size(); ++i)
        if (log[i].kind == EventKind::annotation_received) last = i;
    log.resize(last + 1);
    Session back = Session::replay(log, small_world().resources, fixed_clock);
    back.finish_pending_step();
    EXPECT_EQ(export_model(back.model()), export_model(live.model()));
    EXPECT_EQ(back.current_query(), live.current_query());
}

TEST(Replay, TamperedOrGappedLogRejected) {
    Session live = new_session();
    live.submit_annotation(*live.current_query(), false);
    std::vector<SessionEvent> log = live.event_log();
    auto gapped = log;
    gapped.erase(gapped.begin() + 2);
    EXPECT_THROW(Session::replay(gapped, small_world().resources, fixed_clock), ReplayError);
    auto tampered = log;
    for (auto& e : tampered)
        if (e.kind == EventKind::model_refit) e.payload["bias"] = 123.0;
    EXPECT_THROW(Session::replay(tampered, small_world().resources, fixed_clock), ReplayError);
}

TEST(EventLog, TornTailDropped) {
    Session live = new_session();
    std::string text;
    for (const auto& e : live.event_log()) text += event_to_line(e);
    const std::size_t n = live.event_log().size();
    EXPECT_EQ(parse_event_log(text + "{\"seq\": 99, \"ki").size(), n);
    const SessionEvent e = event_from_line(event_to_line(live.event_log()[0]));
    EXPECT_EQ(e.kind, EventKind::session_created);
}

TEST(Profile, ValidationCollectsFieldErrors) {
    std::map<std::string, std::string> errors;
    EXPECT_FALSE(profile_from_json(nlohmann::json{{"first_language", "de"}}, errors));
    EXPECT_TRUE(errors.count("proficiency"));
    errors.clear();
    const auto p = profile_from_json(nlohmann::json{{"proficiency", "near_native"}}, errors);
    ASSERT_TRUE(p);
    EXPECT_EQ(p->proficiency, Proficiency::near_native);
}
