#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcwi/session.hpp"

namespace httplib {
class Server;
}

namespace pcwi {

struct ServiceConfig {
    SessionConfig session;
    // band -> exported model files registered in addition to completed sessions
    std::map<std::string, std::vector<std::string>> group_models;
};

ServiceConfig parse_service_config(std::string_view text, const std::string& base_dir = ".");

struct ServiceResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

// Transport-independent session service. Sessions persist as append-only
// event logs under <data_dir>/sessions/<id>.jsonl, synced before a success
// response; recover() replays them after a restart.
class SessionService {
public:
    SessionService(std::shared_ptr<const Resources> resources, std::string data_dir, ServiceConfig config = {});
    ~SessionService();

    SessionService(const SessionService&) = delete;
    SessionService& operator=(const SessionService&) = delete;

    // Returns the number of sessions restored.
    std::size_t recover();

    ServiceResponse create_session(const std::string& body);
    ServiceResponse get_session(const std::string& id);
    ServiceResponse submit_annotation(const std::string& id, const std::string& body);
    ServiceResponse get_model(const std::string& id);
    ServiceResponse get_report(const std::string& id);
    ServiceResponse group_probability(const std::string& word, const std::string& band);

    std::size_t session_count() const;
    std::string log_path(const std::string& id) const;

private:
    struct Entry;

    std::shared_ptr<Entry> find(const std::string& id) const;
    std::shared_ptr<Entry> open_entry(const std::string& id, bool existing);
    void register_completed(const Entry& e);
    nlohmann::json view(const Session& s) const;

    std::shared_ptr<const Resources> resources_;
    std::string data_dir_;
    ServiceConfig config_;

    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;

    mutable std::shared_mutex groups_mutex_;
    std::map<std::string, std::vector<PersonalModel>> groups_;
};

// Registers the HTTP routes of `service` on `server`.
void install_routes(httplib::Server& server, SessionService& service);

struct ServerOptions {
    ResourcePaths paths;
    std::string data_dir = "pcwi-data";
    std::string config_path;
    std::string host = "127.0.0.1";
    int port = 8080;
};

// Loads resources, recovers sessions and serves until stopped.
int run_server(const ServerOptions& options);

}  // namespace pcwi
