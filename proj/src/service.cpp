#include "pcwi/service.hpp"

#include <csignal>
#include <cstdio>
#include <fcntl.h>
#include <filesystem>
#include <iostream>
#include <random>
#include <unistd.h>

#include <httplib.h>

#include "pcwi/downstream.hpp"
#include "pcwi/metrics.hpp"

namespace pcwi {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ServiceResponse reply(int status, const json& body) { return {status, body.dump(), "application/json"}; }

ServiceResponse error_reply(int status, const std::string& message, json extra = json::object()) {
    extra["error"] = message;
    return reply(status, extra);
}

std::string random_session_id() {
    std::random_device rd;
    std::uint64_t hi = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::uint64_t lo = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    char buf[33];
    std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(hi),
                  static_cast<unsigned long long>(lo));
    return buf;
}

void write_all(int fd, std::string_view data) {
    while (!data.empty()) {
        const ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error("event log write failed: " + std::string(std::strerror(errno)));
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

void sync_fd(int fd) {
    if (::fsync(fd) != 0) throw Error("event log sync failed: " + std::string(std::strerror(errno)));
}

bool valid_session_id(const std::string& id) {
    if (id.empty() || id.size() > 64) return false;
    for (char c : id)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
    return true;
}

}  // namespace

ServiceConfig parse_service_config(std::string_view text, const std::string& base_dir) {
    ServiceConfig c;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("service config: ") + e.what());
    }
    if (j.contains("session")) c.session = config_from_json(j["session"], c.session);
    if (j.contains("group_models")) {
        for (const auto& [band, files] : j["group_models"].items())
            for (const auto& f : files) {
                fs::path p = f.get<std::string>();
                if (p.is_relative()) p = fs::path(base_dir) / p;
                c.group_models[band].push_back(p.lexically_normal().string());
            }
    }
    return c;
}

struct SessionService::Entry {
    std::mutex busy;
    std::optional<Session> session;
    int fd = -1;

    ~Entry() {
        if (fd >= 0) ::close(fd);
    }

    Session::Sink sink() {
        return [this](const SessionEvent& e) { write_all(fd, event_to_line(e)); };
    }
};

SessionService::SessionService(std::shared_ptr<const Resources> resources, std::string data_dir, ServiceConfig config)
    : resources_(std::move(resources)), data_dir_(std::move(data_dir)), config_(std::move(config)) {
    fs::create_directories(fs::path(data_dir_) / "sessions");
    for (const auto& [band, files] : config_.group_models)
        for (const auto& f : files) {
            PersonalModel m = import_model(read_file(f), static_cast<int>(resources_->pool.dim()));
            groups_[band].push_back(std::move(m));
        }
}

SessionService::~SessionService() = default;

std::string SessionService::log_path(const std::string& id) const {
    return (fs::path(data_dir_) / "sessions" / (id + ".jsonl")).string();
}

std::size_t SessionService::session_count() const {
    std::shared_lock lock(sessions_mutex_);
    return sessions_.size();
}

std::shared_ptr<SessionService::Entry> SessionService::find(const std::string& id) const {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

std::shared_ptr<SessionService::Entry> SessionService::open_entry(const std::string& id, bool existing) {
    auto e = std::make_shared<Entry>();
    const std::string path = log_path(id);
    const int flags = O_WRONLY | O_APPEND | O_CLOEXEC | (existing ? 0 : O_CREAT | O_EXCL);
    e->fd = ::open(path.c_str(), flags, 0644);
    if (e->fd < 0) throw Error("cannot open event log " + path + ": " + std::strerror(errno));
    return e;
}

void SessionService::register_completed(const Entry& e) {
    const Session& s = *e.session;
    std::unique_lock lock(groups_mutex_);
    groups_[std::string(to_string(s.profile().proficiency))].push_back(s.model());
}

std::size_t SessionService::recover() {
    std::vector<fs::path> logs;
    for (const auto& de : fs::directory_iterator(fs::path(data_dir_) / "sessions"))
        if (de.path().extension() == ".jsonl") logs.push_back(de.path());
    std::sort(logs.begin(), logs.end());
    std::size_t restored = 0;
    for (const auto& path : logs) {
        const std::string id = path.stem().string();
        try {
            const std::string text = read_file(path.string());
            const auto events = parse_event_log(text);
            const std::size_t complete = text.rfind('\n') == std::string::npos ? 0 : text.rfind('\n') + 1;
            if (complete < text.size()) fs::resize_file(path, complete);   // drop a torn final write
            auto e = open_entry(id, true);
            e->session.emplace(Session::replay(events, resources_, iso_timestamp_now, e->sink()));
            e->session->finish_pending_step();
            sync_fd(e->fd);
            if (e->session->completed()) register_completed(*e);
            std::unique_lock lock(sessions_mutex_);
            sessions_[id] = std::move(e);
            ++restored;
        } catch (const std::exception& ex) {
            std::cerr << "[pcwi] cannot restore session " << id << ": " << ex.what() << '\n';
        }
    }
    return restored;
}

json SessionService::view(const Session& s) const {
    json item = nullptr;
    if (s.current_query())
        item = {{"word", *s.current_query()}, {"item_number", s.item_number()}, {"total_items", s.total_items()}};
    return {{"session_id", s.id()}, {"item", item}, {"done", s.completed()}};
}

ServiceResponse SessionService::create_session(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception&) {
        return error_reply(400, "body is not valid JSON");
    }
    std::map<std::string, std::string> errors;
    auto profile = profile_from_json(j, errors);
    SessionConfig config = config_.session;
    bool seed_given = false;
    if (j.is_object() && j.contains("config")) {
        const json& overrides = j["config"];
        try {
            if (overrides.is_object() && overrides.contains("test_set_path"))
                throw Error("test_set_path is fixed by the server");
            config = config_from_json(overrides, config);
            seed_given = overrides.is_object() && overrides.contains("rng_seed");
        } catch (const Error& e) {
            errors["config"] = e.what();
        }
    }
    if (!profile || !errors.empty()) return error_reply(400, "invalid session request", {{"fields", errors}});

    const std::string id = random_session_id();
    if (!seed_given) config.rng_seed = mix_seed(0, id);
    std::shared_ptr<Entry> e;
    try {
        e = open_entry(id, false);
        e->session.emplace(Session::create(resources_, id, *profile, config, iso_timestamp_now, e->sink()));
        sync_fd(e->fd);
    } catch (const Error& ex) {
        std::error_code ec;
        fs::remove(log_path(id), ec);
        return error_reply(400, ex.what());
    }
    {
        const std::string index_line = id + '\t' + std::string(to_string(profile->proficiency)) + '\t' +
                                       e->session->event_log().front().timestamp + '\n';
        std::unique_lock lock(sessions_mutex_);
        const std::string index = (fs::path(data_dir_) / "index.tsv").string();
        const int fd = ::open(index.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
        if (fd >= 0) {
            write_all(fd, index_line);
            ::fsync(fd);
            ::close(fd);
        }
        sessions_[id] = e;
    }
    if (e->session->completed()) register_completed(*e);
    return reply(201, view(*e->session));
}

ServiceResponse SessionService::get_session(const std::string& id) {
    auto e = find(id);
    if (!e) return error_reply(404, "unknown session");
    std::lock_guard lock(e->busy);
    return reply(200, view(*e->session));
}

ServiceResponse SessionService::submit_annotation(const std::string& id, const std::string& body) {
    auto e = find(id);
    if (!e) return error_reply(404, "unknown session");
    std::unique_lock lock(e->busy, std::try_to_lock);
    if (!lock.owns_lock()) return error_reply(409, "another annotation for this session is in flight");
    Session& s = *e->session;
    if (s.completed()) return error_reply(410, "session is completed");

    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception&) {
        return error_reply(400, "body is not valid JSON");
    }
    if (!j.is_object() || !j.contains("word") || !j["word"].is_string() || !j.contains("knows_word") ||
        !j["knows_word"].is_boolean())
        return error_reply(400, "body needs a string 'word' and a boolean 'knows_word'");
    try {
        s.submit_annotation(j["word"].get<std::string>(), j["knows_word"].get<bool>());
        sync_fd(e->fd);
    } catch (const AnnotationRejected& ex) {
        return error_reply(409, ex.what(), {{"expected_word", ex.expected_word()}, {"session", view(s)}});
    } catch (const SessionClosed& ex) {
        return error_reply(410, ex.what());
    }
    if (s.completed()) register_completed(*e);
    return reply(200, view(s));
}

ServiceResponse SessionService::get_model(const std::string& id) {
    auto e = find(id);
    if (!e) return error_reply(404, "unknown session");
    std::lock_guard lock(e->busy);
    if (!e->session->training_finished()) return error_reply(409, "training is not finished");
    return {200, export_model(e->session->model()), "application/json"};
}

ServiceResponse SessionService::get_report(const std::string& id) {
    auto e = find(id);
    if (!e) return error_reply(404, "unknown session");
    std::lock_guard lock(e->busy);
    const Session& s = *e->session;
    if (!s.completed()) return error_reply(409, "session is not completed");
    std::vector<int> pred, gold;
    for (const auto& [word, label] : s.test_answers()) {
        const auto& items = resources_->test_items;
        const auto it = std::find_if(items.begin(), items.end(), [&](const TestItem& t) { return t.word == word; });
        pred.push_back(predict_label(s.model(), it->features));
        gold.push_back(label);
    }
    json systems = json::object();
    if (!gold.empty()) {
        EvaluationReport report;
        const std::string group(to_string(s.profile().proficiency));
        report.add("model", group, pred, gold);
        const auto simple = baseline_all_simple(gold.size());
        report.add("all_simple", group, simple, gold);
        for (const auto& name : report.systems()) {
            const ReportCell& c = report.cell(name, group);
            systems[name] = {{"f_score", c.f.macro},
                             {"f_complex", c.f.positive},
                             {"f_simple", c.f.negative},
                             {"kappa", c.kappa.value},
                             {"kappa_degenerate", c.kappa.degenerate},
                             {"test_size", c.counts.total()},
                             {"confusion", {{"tp", c.counts.tp}, {"fp", c.counts.fp}, {"fn", c.counts.fn}, {"tn", c.counts.tn}}}};
        }
    }
    return reply(200, {{"session_id", s.id()},
                       {"proficiency", to_string(s.profile().proficiency)},
                       {"model_version", s.model().version},
                       {"systems", systems}});
}

ServiceResponse SessionService::group_probability(const std::string& word, const std::string& band) {
    if (word.empty() || band.empty()) return error_reply(400, "query needs word and band");
    std::shared_lock lock(groups_mutex_);
    const auto it = groups_.find(band);
    if (it == groups_.end() || it->second.empty()) return error_reply(404, "no models for band '" + band + "'");
    const auto* record = resources_->features.find(to_lower(word));
    if (!record) return error_reply(404, "no features for word '" + word + "'");
    const double p = group_complexity_probability(it->second, *record);
    return reply(200, {{"word", record->word},
                       {"band", band},
                       {"probability", p},
                       {"complex", group_decision(p)},
                       {"models", it->second.size()}});
}

void install_routes(httplib::Server& server, SessionService& service) {
    auto send = [](httplib::Response& res, const ServiceResponse& r) {
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    auto guarded = [send](auto handler) {
        return [send, handler](const httplib::Request& req, httplib::Response& res) {
            try {
                send(res, handler(req));
            } catch (const std::exception& e) {
                send(res, error_reply(500, e.what()));
            }
        };
    };
    server.Post("/sessions", guarded([&](const httplib::Request& req) { return service.create_session(req.body); }));
    server.Get(R"(/sessions/([^/]+))", guarded([&](const httplib::Request& req) {
                   const std::string id = req.matches[1];
                   if (!valid_session_id(id)) return error_reply(404, "unknown session");
                   return service.get_session(id);
               }));
    server.Post(R"(/sessions/([^/]+)/annotations)", guarded([&](const httplib::Request& req) {
                    const std::string id = req.matches[1];
                    if (!valid_session_id(id)) return error_reply(404, "unknown session");
                    return service.submit_annotation(id, req.body);
                }));
    server.Get(R"(/sessions/([^/]+)/model)", guarded([&](const httplib::Request& req) {
                   const std::string id = req.matches[1];
                   if (!valid_session_id(id)) return error_reply(404, "unknown session");
                   return service.get_model(id);
               }));
    server.Get(R"(/sessions/([^/]+)/report)", guarded([&](const httplib::Request& req) {
                   const std::string id = req.matches[1];
                   if (!valid_session_id(id)) return error_reply(404, "unknown session");
                   return service.get_report(id);
               }));
    server.Get("/group/probability", guarded([&](const httplib::Request& req) {
                   return service.group_probability(req.get_param_value("word"), req.get_param_value("band"));
               }));
}

namespace {
httplib::Server* g_server = nullptr;
void stop_server(int) {
    if (g_server) g_server->stop();
}
}  // namespace

int run_server(const ServerOptions& options) {
    bool cache_hit = false;
    auto resources = load_resources(options.paths, &cache_hit);
    std::cerr << "[pcwi] pool " << resources->pool.size() << " words, clusters "
              << (cache_hit ? "loaded from cache" : "built") << '\n';
    ServiceConfig config;
    if (!options.config_path.empty())
        config = parse_service_config(read_file(options.config_path),
                                      fs::path(options.config_path).parent_path().string());
    SessionService service(resources, options.data_dir, config);
    std::cerr << "[pcwi] restored " << service.recover() << " sessions from " << options.data_dir << '\n';

    httplib::Server server;
    install_routes(server, service);
    g_server = &server;
    std::signal(SIGINT, stop_server);
    std::signal(SIGTERM, stop_server);
    if (!server.bind_to_port(options.host, options.port)) throw Error("cannot listen on " + options.host + ":" +
                                                                     std::to_string(options.port));
    std::cerr << "[pcwi] listening on " << options.host << ':' << options.port << '\n';
    server.listen_after_bind();
    g_server = nullptr;
    return 0;
}

}  // namespace pcwi
