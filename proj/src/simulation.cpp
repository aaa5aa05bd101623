#include "pcwi/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_set>

namespace pcwi {

using nlohmann::json;

double KnowledgeScores::of(const std::string& word) const {
    const auto it = score.find(word);
    if (it == score.end()) throw Error("no knowledge score for '" + word + "'");
    return it->second;
}

double KnowledgeScores::pool_quantile(double q) const {
    if (sorted_pool_scores.empty()) throw Error("no pool scores");
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(sorted_pool_scores.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted_pool_scores.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted_pool_scores[lo] + frac * (sorted_pool_scores[hi] - sorted_pool_scores[lo]);
}

KnowledgeScores build_knowledge_scores(const Resources& resources, const GradedLexicon* graded,
                                       double frequency_weight, double graded_weight) {
    const auto& kept = resources.pool.stats.kept_columns;
    const auto it = std::find(kept.begin(), kept.end(), std::size_t{0});
    if (it == kept.end()) throw Error("pool has no log_frequency feature");
    const std::size_t column = static_cast<std::size_t>(it - kept.begin());

    KnowledgeScores ks;
    ks.frequency_weight = frequency_weight;
    ks.graded_weight = graded_weight;
    auto score_of = [&](const std::string& word, const std::vector<double>& x) {
        double s = frequency_weight * x[column];
        if (graded && graded_weight != 0.0) {
            const auto g = graded->entries.find(word);
            if (g != graded->entries.end())
                s += graded_weight * (2.0 - static_cast<double>(GradedLexicon::argmax_level(g->second))) /
                     std::sqrt(2.0);
        }
        return s;
    };
    for (const auto& e : resources.pool.entries) {
        const double s = score_of(e.word, e.features);
        ks.score[e.word] = s;
        ks.sorted_pool_scores.push_back(s);
    }
    for (const auto& t : resources.test_items) ks.score.emplace(t.word, score_of(t.word, t.features));
    std::sort(ks.sorted_pool_scores.begin(), ks.sorted_pool_scores.end());
    return ks;
}

bool oracle_knows(const OracleSpec& oracle, const std::string& word, const KnowledgeScores& scores) {
    if (oracle.kind == OracleKind::replay) {
        const auto it = oracle.recorded.find(word);
        if (it != oracle.recorded.end()) return it->second;
        if (oracle.default_answer) return *oracle.default_answer;
        throw Error("replay oracle " + oracle.id + " has no answer for '" + word + "'");
    }
    return scores.of(word) >= oracle.cutoff;
}

bool oracle_answer(const OracleSpec& oracle, const std::string& word, const KnowledgeScores& scores) {
    const bool knows = oracle_knows(oracle, word, scores);
    if (oracle.kind == OracleKind::replay || oracle.noise_rate <= 0.0) return knows;
    return hash_uniform(oracle.noise_seed, word) < oracle.noise_rate ? !knows : knows;
}

OracleSpec replay_oracle(const LabelledTestSet& set, std::optional<bool> default_answer) {
    OracleSpec o;
    o.kind = OracleKind::replay;
    o.id = set.annotator_id;
    o.proficiency = set.group;
    for (const auto& [w, l] : set.items) o.recorded[w] = l == 0;
    o.default_answer = default_answer;
    return o;
}

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::active_learning: return "active_learning";
        case Strategy::cluster_random: return "cluster_random";
        case Strategy::random: return "random";
    }
    return "active_learning";
}

Strategy strategy_from_string(std::string_view s) {
    if (s == "active_learning") return Strategy::active_learning;
    if (s == "cluster_random") return Strategy::cluster_random;
    if (s == "random") return Strategy::random;
    throw Error("unknown strategy: " + std::string(s));
}

SessionConfig strategy_config(Strategy s, const SessionConfig& base) {
    SessionConfig c = base;
    c.strategy = s == Strategy::active_learning ? QueryStrategy::entropy : QueryStrategy::random;
    c.propagate = s != Strategy::random;
    if (s == Strategy::random) c.keep_seed = false;   // refits on direct labels only
    return c;
}

StrategyRun run_strategy(std::shared_ptr<const Resources> resources, const KnowledgeScores& scores,
                         const OracleSpec& oracle, Strategy strategy, int budget, std::uint64_t seed,
                         const SessionConfig& base) {
    SessionConfig config = strategy_config(strategy, base);
    config.budget = budget;
    config.rng_seed = seed;
    std::size_t queryable = 0;
    for (bool t : resources->is_test) queryable += t ? 0 : 1;
    if (budget < 0 || static_cast<std::size_t>(budget) > queryable)
        throw Error("budget " + std::to_string(budget) + " exceeds the queryable pool (" + std::to_string(queryable) +
                    " words)");

    AnnotatorProfile profile;
    if (auto p = proficiency_from_string(oracle.proficiency)) profile.proficiency = *p;
    const std::string id = "sim-" + oracle.id + "-" + std::string(to_string(strategy));

    StrategyRun run;
    run.strategy = strategy;
    run.oracle_id = oracle.id;
    run.budget = budget;
    run.seed = seed;
    Session session = Session::create(resources, id, profile, config, [] { return std::string(kSimulationClock); });
    while (!session.completed()) {
        const std::string word = *session.current_query();
        const bool knows = oracle_answer(oracle, word, scores);
        const bool training = !session.training_finished();
        const auto t0 = std::chrono::steady_clock::now();
        session.submit_annotation(word, knows);
        if (training)
            run.step_seconds.push_back(
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }

    run.model = session.model();
    run.queried = session.queried_words();
    std::vector<int> pred, gold;
    for (const auto& word : session.test_order()) {
        const auto item = std::find_if(resources->test_items.begin(), resources->test_items.end(),
                                        [&](const TestItem& t) { return t.word == word; });
        pred.push_back(predict_label(run.model, item->features));
        gold.push_back(oracle_knows(oracle, word, scores) ? 0 : 1);
    }
    if (!pred.empty()) {
        run.test_counts = confusion(pred, gold);
        run.f = f_scores(run.test_counts);
        run.kappa = cohen_kappa(run.test_counts);
    }
    run.events = session.event_log();
    return run;
}

namespace {

std::string resolve(const std::string& base, const std::string& p) {
    if (p.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (std::filesystem::path(base) / p).lexically_normal().string();
}

CutoffRange cutoff_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2) throw Error("cutoff_quantiles must be [low, high]");
    CutoffRange r{j[0].get<double>(), j[1].get<double>()};
    if (!(0.0 <= r.low && r.low <= r.high && r.high <= 1.0)) throw Error("cutoff_quantiles must lie in [0, 1]");
    return r;
}

double check_noise(double noise) {
    if (!(noise >= 0.0 && noise < 0.5)) throw Error("noise_rate must lie in [0, 0.5)");
    return noise;
}

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

StudyConfig parse_study_config(std::string_view text, const std::string& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("study config: ") + e.what());
    }
    StudyConfig c;
    try {
        if (j.contains("data")) {
            const json& d = j["data"];
            c.paths.pool = resolve(base_dir, d.value("pool", ""));
            c.paths.clusters = resolve(base_dir, d.value("clusters", ""));
            c.paths.k = d.value("k", 7);
            c.paths.seed_data = resolve(base_dir, d.value("seed_data", ""));
            c.paths.test_set = resolve(base_dir, d.value("test_set", ""));
            c.paths.features = resolve(base_dir, d.value("features", ""));
            c.graded = resolve(base_dir, d.value("graded", ""));
        }
        c.seed = j.value("seed", c.seed);
        c.threads = j.value("threads", c.threads);
        c.keep_event_logs = j.value("keep_event_logs", c.keep_event_logs);
        if (j.contains("session")) c.session = config_from_json(j["session"], c.session);
        if (j.contains("knowledge")) {
            c.frequency_weight = j["knowledge"].value("frequency_weight", c.frequency_weight);
            c.graded_weight = j["knowledge"].value("graded_weight", c.graded_weight);
        }
        if (j.contains("strategy_study")) {
            const json& s = j["strategy_study"];
            c.run_strategies = s.value("enabled", true);
            c.oracles = s.value("oracles", c.oracles);
            c.strategy_noise = check_noise(s.value("noise_rate", c.strategy_noise));
            c.strategy_budget = s.value("budget", c.strategy_budget);
            if (s.contains("strategies")) {
                c.strategies.clear();
                for (const auto& name : s["strategies"]) c.strategies.push_back(strategy_from_string(name.get<std::string>()));
            }
            if (s.contains("cutoff_quantiles")) c.strategy_cutoff = cutoff_from_json(s["cutoff_quantiles"]);
        }
        if (j.contains("band_study")) {
            const json& b = j["band_study"];
            c.run_bands = b.value("enabled", true);
            c.models_per_band = b.value("models_per_band", c.models_per_band);
            c.band_noise = check_noise(b.value("noise_rate", c.band_noise));
            c.band_budget = b.value("budget", c.band_budget);
            c.folds = b.value("folds", c.folds);
            const std::string membership = b.value("c1_membership", "argmax");
            if (membership == "argmax")
                c.c1_membership = C1Membership::argmax;
            else if (membership == "any_frequency")
                c.c1_membership = C1Membership::any_frequency;
            else
                throw Error("unknown c1_membership: " + membership);
            if (b.contains("bands")) {
                c.bands.clear();
                for (const auto& band : b["bands"])
                    c.bands.push_back({band.at("name").get<std::string>(), cutoff_from_json(band.at("cutoff_quantiles"))});
            }
        }
    } catch (const json::exception& e) {
        throw Error(std::string("study config: ") + e.what());
    }
    if (c.oracles < 1 || c.models_per_band < 1) throw Error("study config: oracle counts must be positive");
    return c;
}

std::vector<OracleSpec> make_oracles(const KnowledgeScores& scores, int count, CutoffRange range, double noise,
                                     std::uint64_t seed, const std::string& label) {
    std::vector<OracleSpec> out;
    for (int i = 0; i < count; ++i) {
        char id[64];
        std::snprintf(id, sizeof(id), "%s-%03d", label.c_str(), i);
        Rng rng(mix_seed(seed, std::string("oracle/") + id));
        OracleSpec o;
        o.id = id;
        o.cutoff = scores.pool_quantile(rng.uniform(range.low, range.high));
        o.noise_rate = check_noise(noise);
        o.noise_seed = mix_seed(seed, std::string("noise/") + id);
        out.push_back(std::move(o));
    }
    return out;
}

StrategyStudy run_strategy_study(std::shared_ptr<const Resources> resources, const KnowledgeScores& scores,
                                 const StudyConfig& config) {
    const auto oracles =
        make_oracles(scores, config.oracles, config.strategy_cutoff, config.strategy_noise, config.seed, "oracle");
    StrategyStudy study;
    const std::size_t per = oracles.size();
    study.runs.resize(config.strategies.size() * per);
    parallel_for(study.runs.size(), config.threads, [&](std::size_t i) {
        const Strategy s = config.strategies[i / per];
        const OracleSpec& o = oracles[i % per];
        StrategyRun run = run_strategy(resources, scores, o, s, config.strategy_budget,
                                       mix_seed(config.seed, "session/" + o.id), config.session);
        if (!config.keep_event_logs) run.events.clear();
        study.runs[i] = std::move(run);
    });
    for (std::size_t s = 0; s < config.strategies.size(); ++s) {
        std::vector<double> f, k, fc;
        for (std::size_t i = 0; i < per; ++i) {
            const auto& r = study.runs[s * per + i];
            f.push_back(r.f.macro);
            k.push_back(r.kappa.value);
            fc.push_back(r.f.positive);
        }
        study.summary.push_back(
            {config.strategies[s], per, mean_of(f), mean_of(k), sd_of(f), sd_of(k), mean_of(fc)});
    }
    return study;
}

BandStudy run_band_study(std::shared_ptr<const Resources> resources, const KnowledgeScores& scores,
                         const ScoredVocabulary& vocab, const StudyConfig& config) {
    if (config.bands.empty()) throw Error("band study has no bands");
    BandStudy study;
    std::vector<OracleSpec> oracles;
    for (const auto& band : config.bands) {
        study.bands.push_back(band.name);
        auto os = make_oracles(scores, config.models_per_band, band.cutoff, config.band_noise, config.seed,
                               "band-" + band.name);
        for (auto& o : os) o.proficiency = band.name;
        oracles.insert(oracles.end(), os.begin(), os.end());
    }
    std::unordered_set<std::string> fixed_seen;
    for (const auto& s : resources->seed) fixed_seen.insert(s.word);
    for (const auto& t : resources->test_items) fixed_seen.insert(t.word);

    study.models.resize(oracles.size());
    parallel_for(oracles.size(), config.threads, [&](std::size_t i) {
        const OracleSpec& o = oracles[i];
        StrategyRun run = run_strategy(resources, scores, o, Strategy::active_learning, config.band_budget,
                                       mix_seed(config.seed, "session/" + o.id), config.session);
        BandModel m;
        m.oracle_id = o.id;
        m.band = o.proficiency;
        m.model = std::move(run.model);
        std::unordered_set<std::string> seen = fixed_seen;
        seen.insert(run.queried.begin(), run.queried.end());
        m.counts = complex_counts_by_level(m.model, vocab, seen);
        m.c1_count = c1_complex_count(m.model, vocab, seen, config.c1_membership);
        for (const auto& w : vocab.words) m.vocabulary += seen.count(w) ? 0 : 1;
        m.seen.assign(seen.begin(), seen.end());
        std::sort(m.seen.begin(), m.seen.end());
        study.models[i] = std::move(m);
    });

    std::vector<BandSample> samples;
    for (const auto& name : study.bands) {
        std::array<double, 5> sums{};
        std::size_t n = 0;
        for (const auto& m : study.models) {
            if (m.band != name) continue;
            for (std::size_t l = 0; l < 5; ++l) sums[l] += static_cast<double>(m.counts[l]);
            ++n;
        }
        if (n == 0) throw Error("band '" + name + "' has no models");
        for (double& s : sums) s /= static_cast<double>(n);
        study.mean_counts.push_back(sums);
    }
    for (const auto& m : study.models) samples.push_back({static_cast<double>(m.c1_count), m.band});
    study.proficiency =
        predict_proficiency(samples, study.bands, config.folds, mix_seed(config.seed, "proficiency"));
    return study;
}

std::string strategy_summary_csv(const StrategyStudy& s) {
    std::ostringstream out;
    out << "strategy,runs,mean_f,sd_f,mean_kappa,sd_kappa,mean_f_complex\n";
    for (const auto& r : s.summary)
        out << to_string(r.strategy) << ',' << r.runs << ',' << format_double(r.mean_f) << ','
            << format_double(r.sd_f) << ',' << format_double(r.mean_kappa) << ',' << format_double(r.sd_kappa) << ','
            << format_double(r.mean_f_complex) << '\n';
    return out.str();
}

std::string strategy_runs_csv(const StrategyStudy& s) {
    std::ostringstream out;
    out << "strategy,oracle,seed,f_macro,f_complex,kappa,tp,fp,fn,tn,model_version\n";
    for (const auto& r : s.runs)
        out << to_string(r.strategy) << ',' << r.oracle_id << ',' << r.seed << ',' << format_double(r.f.macro) << ','
            << format_double(r.f.positive) << ',' << format_double(r.kappa.value) << ',' << r.test_counts.tp << ','
            << r.test_counts.fp << ',' << r.test_counts.fn << ',' << r.test_counts.tn << ',' << r.model.version
            << '\n';
    return out.str();
}

std::string band_counts_csv(const BandStudy& b) {
    std::ostringstream out;
    out << "band,models";
    for (auto name : kCefrNames) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < b.bands.size(); ++i) {
        std::size_t n = 0;
        for (const auto& m : b.models) n += m.band == b.bands[i] ? 1 : 0;
        out << b.bands[i] << ',' << n;
        for (double c : b.mean_counts[i]) out << ',' << format_double(c);
        out << '\n';
    }
    return out.str();
}

std::string band_models_csv(const BandStudy& b) {
    std::ostringstream out;
    out << "band,oracle";
    for (auto name : kCefrNames) out << ',' << name;
    out << ",c1_count,vocabulary\n";
    for (const auto& m : b.models) {
        out << m.band << ',' << m.oracle_id;
        for (std::size_t c : m.counts) out << ',' << c;
        out << ',' << m.c1_count << ',' << m.vocabulary << '\n';
    }
    return out.str();
}

std::string proficiency_csv(const ProficiencyResult& p) {
    std::ostringstream out;
    out << "metric,value\n";
    out << "weighted_precision," << format_double(p.weighted_precision) << '\n';
    out << "macro_precision," << format_double(p.macro_precision) << '\n';
    out << "accuracy," << format_double(p.accuracy) << '\n';
    for (std::size_t t = 0; t < p.bands.size(); ++t)
        for (std::size_t q = 0; q < p.bands.size(); ++q)
            out << "confusion:" << p.bands[t] << ">" << p.bands[q] << ',' << p.confusion[t][q] << '\n';
    return out.str();
}

namespace {

void write_event_log(const std::string& path, const std::vector<SessionEvent>& events) {
    std::string text;
    for (const auto& e : events) text += event_to_line(e);
    write_file(path, text);
}

}  // namespace

StudyOutputs run_study(const StudyConfig& config, const std::string& out_dir) {
    namespace fs = std::filesystem;
    auto resources = load_resources(config.paths);
    std::optional<GradedLexicon> graded;
    if (!config.graded.empty()) graded = load_graded_lexicon(config.graded);
    const KnowledgeScores scores = build_knowledge_scores(*resources, graded ? &*graded : nullptr,
                                                          config.frequency_weight, config.graded_weight);
    fs::create_directories(out_dir);
    StudyOutputs outputs;

    if (config.run_strategies) {
        StrategyStudy study = run_strategy_study(resources, scores, config);
        write_file(out_dir + "/strategy_summary.csv", strategy_summary_csv(study));
        write_file(out_dir + "/strategy_runs.csv", strategy_runs_csv(study));
        if (config.keep_event_logs)
            for (const auto& r : study.runs) {
                const std::string dir = out_dir + "/runs/" + std::string(to_string(r.strategy));
                fs::create_directories(dir);
                write_event_log(dir + "/" + r.oracle_id + ".jsonl", r.events);
            }
        outputs.strategies = std::move(study);
    }

    if (config.run_bands) {
        if (!graded) throw Error("band study needs a graded lexicon");
        const ScoredVocabulary vocab = featurize_graded(*graded, resources->pool, resources->features);
        BandStudy study = run_band_study(resources, scores, vocab, config);
        write_file(out_dir + "/band_counts.csv", band_counts_csv(study));
        write_file(out_dir + "/band_models.csv", band_models_csv(study));
        write_file(out_dir + "/proficiency.csv", proficiency_csv(study.proficiency));
        for (const auto& m : study.models) {
            const std::string dir = out_dir + "/band_models/" + m.band;
            fs::create_directories(dir);
            write_file(dir + "/" + m.oracle_id + ".json", export_model(m.model));
            std::string seen;
            for (const auto& w : m.seen) seen += w + '\n';
            write_file(dir + "/" + m.oracle_id + ".seen", seen);
        }
        outputs.bands = std::move(study);
    }
    return outputs;
}

}  // namespace pcwi
