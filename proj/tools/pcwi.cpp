#include <algorithm>
#include <filesystem>
#include <iostream>
#include <unordered_set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pcwi/clustering.hpp"
#include "pcwi/downstream.hpp"
#include "pcwi/lexicon.hpp"
#include "pcwi/metrics.hpp"
#include "pcwi/service.hpp"
#include "pcwi/session.hpp"
#include "pcwi/simulation.hpp"
#include "pcwi/synthetic.hpp"

namespace fs = std::filesystem;
using namespace pcwi;

namespace {

void log(const std::string& msg) { std::cerr << "[pcwi] " << msg << '\n'; }

void fail(const std::string& command, const std::string& message) {
    nlohmann::json j = {{"error", message}, {"command", command}};
    std::cerr << j.dump() << '\n';
}

void emit(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-")
        std::cout << text;
    else
        write_file(out, text);
}

std::vector<std::string> read_word_list(const std::string& path) {
    std::vector<std::string> words;
    std::unordered_set<std::string> seen;
    for (const auto& line : split(read_file(path), '\n')) {
        std::string w = to_lower(trim(split(line, '\t').front()));
        if (w.empty() || w == "word") continue;
        if (seen.insert(w).second) words.push_back(std::move(w));
    }
    return words;
}

FeatureSource feature_source(const std::string& pool_path, const std::string& features_path) {
    FeatureSource fs;
    if (!pool_path.empty()) fs = FeatureSource(load_pool(pool_path));
    if (!features_path.empty()) fs.add_file(features_path);
    if (fs.size() == 0) throw Error("no feature records: give --pool or --features");
    return fs;
}

std::vector<fs::path> files_with_extension(const std::string& dir, const std::string& ext) {
    if (!fs::is_directory(dir)) throw Error("not a directory: " + dir);
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

struct ResourceFlags {
    ResourcePaths paths;

    void add(CLI::App* app, bool required) {
        auto* pool = app->add_option("--pool", paths.pool, "Pool TSV or ingested directory")->envname("PCWI_POOL");
        app->add_option("--clusters", paths.clusters, "Cluster cache file")->envname("PCWI_CLUSTERS");
        auto* seed = app->add_option("--seed-data", paths.seed_data, "Seed TSV (word, votes|label)")->envname("PCWI_SEED_DATA");
        auto* test = app->add_option("--test-set", paths.test_set, "Test word list TSV")->envname("PCWI_TEST_SET");
        app->add_option("--features", paths.features, "Lexicon TSV for words outside the pool")->envname("PCWI_FEATURES");
        app->add_option("--k", paths.k, "Number of clusters")->check(CLI::Range(2, 1 << 30));
        if (required) {
            pool->required();
            seed->required();
            test->required();
        }
    }
};

int cmd_ingest(const std::string& pool_path, const std::string& out) {
    Pool pool = ingest_pool(pool_path);
    save_ingested(pool, out);
    log("ingested " + std::to_string(pool.size()) + " words, d=" + std::to_string(pool.dim()) + ", " +
        std::to_string(pool.diagnostics.size()) + " diagnostics, hash " + pool.stats.content_hash);
    return 0;
}

int cmd_cluster(const std::string& pool_path, int k, const std::string& out, const std::string& diagnostics_dir,
                const std::string& graded_path) {
    Pool pool = load_pool(pool_path);
    bool hit = false;
    ClusterIndex index = load_or_build_clusters(pool, k, out, &hit);
    log(std::string(hit ? "cache hit, reused " : "built and cached ") + out + " (k=" + std::to_string(k) + ")");
    for (int c = 0; c < index.k; ++c)
        log("cluster " + std::to_string(c) + ": " + std::to_string(index.members[static_cast<std::size_t>(c)].size()) +
            " words");
    if (!diagnostics_dir.empty()) {
        GradedLexicon graded;
        if (!graded_path.empty()) graded = load_graded_lexicon(graded_path);
        std::map<std::string, int> votes;
        for (const auto& r : pool.raw)
            if (r.votes) votes[r.word] = *r.votes;
        const ClusterDiagnostics d = cluster_diagnostics(index, graded, votes);
        fs::create_directories(diagnostics_dir);
        write_file(diagnostics_dir + "/level_frequency.csv", level_frequency_csv(d));
        write_file(diagnostics_dir + "/vote_histogram.csv", vote_histogram_csv(d));
        log("graded overlap " + std::to_string(d.graded_overlap) + " words, " + std::to_string(d.missing_graded) +
            " without graded entry, " + std::to_string(d.missing_votes) + " without votes");
    }
    return 0;
}

int cmd_simulate(const std::string& study_path, const std::string& out, std::optional<std::uint64_t> seed,
                 std::optional<int> threads) {
    if (!fs::exists(study_path)) throw Error("study config not found: " + study_path);
    StudyConfig config = parse_study_config(read_file(study_path), fs::path(study_path).parent_path().string());
    if (seed) config.seed = *seed;
    if (threads) config.threads = *threads;
    if (!fs::exists(config.paths.pool)) throw Error("pool not found: " + config.paths.pool);
    const StudyOutputs o = run_study(config, out);
    if (o.strategies)
        for (const auto& s : o.strategies->summary)
            log(std::string(to_string(s.strategy)) + ": mean F " + format_double(s.mean_f) + ", mean kappa " +
                format_double(s.mean_kappa) + " over " + std::to_string(s.runs) + " oracles");
    if (o.bands) {
        for (std::size_t b = 0; b < o.bands->bands.size(); ++b) {
            std::string line = o.bands->bands[b] + ":";
            for (std::size_t l = 0; l < 5; ++l)
                line += " " + std::string(kCefrNames[l]) + "=" + format_double(o.bands->mean_counts[b][l]);
            log(line);
        }
        log("proficiency weighted precision " + format_double(o.bands->proficiency.weighted_precision));
    }
    log("results written to " + out);
    return 0;
}

int cmd_eval(const std::string& models_dir, const std::string& tests_dir, const std::string& groups_path,
             const std::string& out, const std::string& pool_path, const std::string& features_path,
             const std::string& external_path, const std::string& long_out) {
    const FeatureSource features = feature_source(pool_path, features_path);
    std::map<std::string, std::string> group_of;
    {
        const TsvTable t = parse_tsv(read_file(groups_path));
        const int c_id = t.column("annotator_id");
        const int c_group = t.column("proficiency");
        if (c_id < 0 || c_group < 0) throw IngestError(1, "groups file needs columns annotator_id and proficiency");
        for (const auto& row : t.rows)
            group_of[row[static_cast<std::size_t>(c_id)]] = row[static_cast<std::size_t>(c_group)];
    }
    std::vector<LabelledTestSet> sets;
    for (const auto& path : files_with_extension(tests_dir, ".tsv")) {
        const std::string id = path.stem().string();
        const auto g = group_of.find(id);
        if (g == group_of.end()) throw Error("annotator " + id + " missing from groups file");
        sets.push_back(parse_test_set(read_file(path.string()), id, g->second));
    }
    if (sets.empty()) throw Error("no test sets in " + tests_dir);

    std::unordered_map<std::string, double> frequency;
    std::vector<std::pair<std::string, int>> pooled;
    for (const auto& s : sets)
        for (const auto& item : s.items) {
            pooled.push_back(item);
            if (const auto* r = features.find(item.first)) frequency[item.first] = r->frequency;
        }
    const double threshold = sweep_frequency_threshold(frequency, pooled);
    log("frequency baseline threshold " + format_double(threshold));
    std::unordered_map<std::string, int> external;
    if (!external_path.empty()) external = parse_external_predictions(read_file(external_path));

    EvaluationReport report;
    for (const auto& s : sets) {
        const fs::path model_path = fs::path(models_dir) / (s.annotator_id + ".json");
        if (!fs::exists(model_path)) throw Error("no model for annotator " + s.annotator_id);
        const PersonalModel model = import_model(read_file(model_path.string()));
        const auto words = s.words();
        const auto gold = s.labels();
        std::vector<int> pred;
        for (const auto& w : words) {
            const auto* r = features.find(w);
            if (!r) throw Error("no feature record for test word '" + w + "'");
            pred.push_back(predict_proba_raw(model, *r) > 0.5 ? 1 : 0);
        }
        std::vector<LabelledTestSet> group;
        for (const auto& other : sets)
            if (other.group == s.group) group.push_back(other);
        report.add("model", s.group, pred, gold);
        report.add("group_average", s.group, baseline_group_average(group, s).labels, gold);
        report.add("frequency", s.group, baseline_frequency(frequency, threshold, words), gold);
        report.add("all_simple", s.group, baseline_all_simple(words.size()), gold);
        if (!external_path.empty()) report.add("external", s.group, baseline_external(external, words), gold);
    }
    emit(out, report.table_csv());
    if (!long_out.empty()) write_file(long_out, report.long_csv());
    log("evaluated " + std::to_string(sets.size()) + " annotators");
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& words_path, const std::string& pool_path,
                const std::string& features_path, const std::string& out) {
    const PersonalModel model = import_model(read_file(model_path));
    const FeatureSource features = feature_source(pool_path, features_path);
    const auto words = read_word_list(words_path);
    emit(out, score_words_csv(std::span<const PersonalModel>(&model, 1), words, features));
    return 0;
}

int cmd_proficiency(const std::string& models_dir, const std::string& graded_path, const std::string& pool_path,
                    const std::string& features_path, std::vector<std::string> bands, int folds, std::uint64_t seed,
                    const std::string& out) {
    if (bands.empty()) bands = {"intermediate", "advanced", "near_native"};
    const GradedLexicon graded = load_graded_lexicon(graded_path);
    const FeatureSource features = feature_source(pool_path, features_path);
    std::vector<std::pair<std::string, PersonalModel>> models;
    std::vector<std::unordered_set<std::string>> seen;
    for (const auto& band : bands) {
        const fs::path dir = fs::path(models_dir) / band;
        if (!fs::is_directory(dir)) continue;
        for (const auto& path : files_with_extension(dir.string(), ".json")) {
            models.emplace_back(band, import_model(read_file(path.string())));
            std::unordered_set<std::string> s;
            fs::path seen_path = path;
            seen_path.replace_extension(".seen");
            if (fs::exists(seen_path))
                for (const auto& w : read_word_list(seen_path.string())) s.insert(w);
            seen.push_back(std::move(s));
        }
    }
    if (models.empty()) throw Error("no models under " + models_dir);

    Pool normalization;
    normalization.stats = models.front().second.normalization;
    for (const auto& [_, m] : models)
        if (m.normalization.content_hash != normalization.stats.content_hash)
            throw Error("models were trained against different pools");
    const ScoredVocabulary vocab = featurize_graded(graded, normalization, features);

    std::vector<BandSample> samples;
    std::map<std::string, std::pair<std::array<double, 5>, std::size_t>> sums;
    for (std::size_t i = 0; i < models.size(); ++i) {
        const auto& [band, model] = models[i];
        const auto counts = complex_counts_by_level(model, vocab, seen[i]);
        auto& [acc, n] = sums[band];
        for (std::size_t l = 0; l < 5; ++l) acc[l] += static_cast<double>(counts[l]);
        ++n;
        samples.push_back({static_cast<double>(c1_complex_count(model, vocab, seen[i])), band});
    }
    const ProficiencyResult r = predict_proficiency(samples, bands, folds, seed);
    std::string text = proficiency_csv(r);
    text += "\nband,models";
    for (auto name : kCefrNames) text += "," + std::string(name);
    text += '\n';
    for (const auto& band : bands) {
        const auto it = sums.find(band);
        if (it == sums.end()) continue;
        text += band + "," + std::to_string(it->second.second);
        for (double s : it->second.first) text += "," + format_double(s / static_cast<double>(it->second.second));
        text += '\n';
    }
    emit(out, text);
    return 0;
}

int cmd_replay(const ResourcePaths& paths, const std::string& log_path, const std::string& out) {
    auto resources = load_resources(paths);
    const auto events = parse_event_log(read_file(log_path));
    Session s = Session::replay(events, resources);
    log("replayed " + std::to_string(events.size()) + " events, phase " + std::string(to_string(s.phase().kind)) +
        ", model version " + std::to_string(s.model().version));
    emit(out, export_model(s.model()));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Personal complex word identification: ingest, cluster, simulate, evaluate, serve"};
    app.require_subcommand(1);

    std::string pool_path, out, features_path, graded_path, diagnostics_dir;
    int k = 7;

    auto* ingest = app.add_subcommand("ingest", "Normalize a pool TSV");
    ingest->add_option("--pool", pool_path, "Pool TSV")->required();
    ingest->add_option("--out", out, "Output directory")->required();

    auto* cluster = app.add_subcommand("cluster", "Build or reuse the cluster cache");
    cluster->add_option("--pool", pool_path, "Pool TSV or ingested directory")->required();
    cluster->add_option("--k", k, "Number of clusters")->check(CLI::Range(2, 1 << 30));
    cluster->add_option("--out", out, "Cluster cache file")->required();
    cluster->add_option("--diagnostics", diagnostics_dir, "Write level-frequency and vote-histogram CSVs here");
    cluster->add_option("--graded", graded_path, "Graded lexicon TSV for the diagnostics");

    std::string study_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    auto* simulate = app.add_subcommand("simulate", "Run simulation studies");
    simulate->add_option("--study", study_path, "Study config JSON")->required();
    simulate->add_option("--out", out, "Output directory")->required();
    simulate->add_option("--seed", seed, "Override the study seed");
    simulate->add_option("--threads", threads, "Worker threads (0: all cores)");

    std::string models_dir, tests_dir, groups_path, external_path, long_out;
    auto* eval = app.add_subcommand("eval", "Evaluate models and baselines on recorded test sets");
    eval->add_option("--models", models_dir, "Directory of <annotator>.json models")->required();
    eval->add_option("--tests", tests_dir, "Directory of <annotator>.tsv test sets")->required();
    eval->add_option("--groups", groups_path, "TSV annotator_id, proficiency")->required();
    eval->add_option("--out", out, "Report CSV (default stdout)");
    eval->add_option("--pool", pool_path, "Pool TSV or ingested directory");
    eval->add_option("--features", features_path, "Lexicon TSV");
    eval->add_option("--external", external_path, "Stored predictions of an external system");
    eval->add_option("--long", long_out, "Also write per-cell counts and scores here");

    std::string model_path, words_path;
    auto* predict = app.add_subcommand("predict", "Score a word list with an exported model");
    predict->add_option("--model", model_path, "Exported model")->required();
    predict->add_option("--words", words_path, "One word per line")->required();
    predict->add_option("--pool", pool_path, "Pool TSV or ingested directory");
    predict->add_option("--features", features_path, "Lexicon TSV");
    predict->add_option("--out", out, "Output CSV (default stdout)");

    std::vector<std::string> bands;
    int folds = 5;
    std::uint64_t cv_seed = 0;
    auto* proficiency = app.add_subcommand("proficiency", "Predict proficiency bands from C1-complex counts");
    proficiency->add_option("--models", models_dir, "Directory with one subdirectory of models per band")->required();
    proficiency->add_option("--graded", graded_path, "Graded lexicon TSV")->required();
    proficiency->add_option("--pool", pool_path, "Pool TSV or ingested directory");
    proficiency->add_option("--features", features_path, "Lexicon TSV");
    proficiency->add_option("--bands", bands, "Bands from least to most proficient")->delimiter(',');
    proficiency->add_option("--folds", folds, "Cross-validation folds");
    proficiency->add_option("--seed", cv_seed, "Fold assignment seed");
    proficiency->add_option("--out", out, "Output CSV (default stdout)");

    ServerOptions server;
    ResourceFlags server_resources;
    auto* serve = app.add_subcommand("serve", "Run the annotation session service");
    server_resources.add(serve, true);
    serve->add_option("--port", server.port, "Listen port")->envname("PCWI_PORT");
    serve->add_option("--host", server.host, "Listen address")->envname("PCWI_HOST");
    serve->add_option("--data-dir", server.data_dir, "Session logs directory")->envname("PCWI_DATA_DIR");
    serve->add_option("--config", server.config_path, "Service config JSON")->envname("PCWI_CONFIG");

    SyntheticWorldConfig world;
    auto* synth = app.add_subcommand("synth", "Generate the synthetic lexical world");
    synth->add_option("--out", out, "Output directory")->required();
    synth->add_option("--seed", world.seed, "Generator seed");
    synth->add_option("--vocabulary", world.vocabulary_size, "Vocabulary size");
    synth->add_option("--pool-size", world.pool_size, "Pool size");

    ResourceFlags replay_resources;
    std::string log_path;
    auto* replay = app.add_subcommand("replay", "Rebuild a session from its event log and print its model");
    replay_resources.add(replay, true);
    replay->add_option("--log", log_path, "Event log (JSONL)")->required();
    replay->add_option("--out", out, "Model output (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        fail(app.get_subcommands().empty() ? "pcwi" : app.get_subcommands().front()->get_name(), e.what());
        return 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (*ingest) return cmd_ingest(pool_path, out);
        if (*cluster) return cmd_cluster(pool_path, k, out, diagnostics_dir, graded_path);
        if (*simulate) return cmd_simulate(study_path, out, seed, threads);
        if (*eval)
            return cmd_eval(models_dir, tests_dir, groups_path, out, pool_path, features_path, external_path, long_out);
        if (*predict) return cmd_predict(model_path, words_path, pool_path, features_path, out);
        if (*proficiency)
            return cmd_proficiency(models_dir, graded_path, pool_path, features_path, bands, folds, cv_seed, out);
        if (*serve) {
            server.paths = server_resources.paths;
            return run_server(server);
        }
        if (*synth) {
            generate_world(world).write(out);
            log("wrote synthetic world to " + out);
            return 0;
        }
        if (*replay) return cmd_replay(replay_resources.paths, log_path, out);
    } catch (const IngestError& e) {
        nlohmann::json j = {{"error", e.what()}, {"command", command}, {"line", e.line()}};
        std::cerr << j.dump() << '\n';
        return 1;
    } catch (const std::exception& e) {
        fail(command, e.what());
        return 1;
    }
    return 0;
}
