#include "ofa/service.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "ofa/errors.hpp"

namespace ofa {

namespace {

using nlohmann::json;

void reply_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
    reply_json(res, status, {{"error", message}});
}

json parse_body(const httplib::Request& req) {
    try {
        auto body = json::parse(req.body);
        if (!body.is_object()) throw ParseError("request body must be a JSON object");
        return body;
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() ? base / path : path;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

// Maps gateway errors onto HTTP status codes.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const NotFound& e) {
        reply_error(res, 404, e.what());
    } catch (const Conflict& e) {
        reply_error(res, 409, e.what());
    } catch (const NoAgentsEnabled& e) {
        reply_error(res, 503, e.what());
    } catch (const ParseError& e) {
        reply_error(res, 400, e.what());
    } catch (const ValidationError& e) {
        reply_error(res, 400, e.what());
    } catch (const json::exception& e) {
        reply_error(res, 400, e.what());
    } catch (const std::exception& e) {
        reply_error(res, 500, e.what());
    }
}

json distances_json(const InteractionRecord& r) {
    auto arr = json::array();
    if (!r.distances) return arr;
    for (const auto& [agent, d] : *r.distances) {
        arr.push_back({{"agent_id", agent}, {"distance", std::isfinite(d) ? json(d) : json(nullptr)}});
    }
    return arr;
}

}  // namespace

void ServiceConfig::validate() const {
    auto require = [](const std::filesystem::path& p, const char* what) {
        if (p.empty() || !std::filesystem::exists(p)) {
            throw ConfigError(std::string(what) + " not found: " + (p.empty() ? "<unset>" : p.string()));
        }
    };
    require(registry_path, "agent registry config");
    if (refusal_patterns_path) require(*refusal_patterns_path, "refusal pattern file");
    const bool has_sif = word_vectors_path.has_value() || frequencies_path.has_value();
    const bool has_remote = embedding_backend_url.has_value();
    if (has_sif == has_remote) {
        throw ConfigError("configure exactly one embedding backend: word_vectors + frequencies, or embedding_backend_url");
    }
    if (has_sif) {
        if (!word_vectors_path || !frequencies_path) {
            throw ConfigError("the SIF backend needs both word_vectors and frequencies");
        }
        require(*word_vectors_path, "word vector file");
        require(*frequencies_path, "frequency file");
    }
    if (log_path.empty()) throw ConfigError("log path is not set");
    const auto log_dir = log_path.parent_path();
    if (!log_dir.empty() && !std::filesystem::is_directory(log_dir)) {
        throw ConfigError("log directory not found: " + log_dir.string());
    }
    sif.validate();
}

std::pair<std::string, int> parse_listen_address(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos || colon == 0) throw ConfigError("listen address must be host:port, got " + address);
    int port = 0;
    const auto* first = address.data() + colon + 1;
    const auto* last = address.data() + address.size();
    auto [ptr, ec] = std::from_chars(first, last, port);
    if (ec != std::errc{} || ptr != last || port < 0 || port > 65535) {
        throw ConfigError("bad port in listen address " + address);
    }
    return {address.substr(0, colon), port};
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
    const auto j = read_json_file(path);
    if (!j.is_object()) throw ConfigError(path.string() + ": config must be a JSON object");
    const auto base = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();

    ServiceConfig c;
    c.base_dir = base;
    try {
        std::tie(c.listen_host, c.listen_port) = parse_listen_address(j.value("listen", std::string("127.0.0.1:8080")));
        c.registry_path = resolve(base, j.at("registry").get<std::string>());
        if (j.contains("word_vectors")) c.word_vectors_path = resolve(base, j["word_vectors"].get<std::string>());
        if (j.contains("frequencies")) c.frequencies_path = resolve(base, j["frequencies"].get<std::string>());
        if (j.contains("refusal_patterns")) {
            c.refusal_patterns_path = resolve(base, j["refusal_patterns"].get<std::string>());
        }
        if (j.contains("sif")) {
            const auto& s = j["sif"];
            c.sif.smoothing_a = s.value("smoothing_a", c.sif.smoothing_a);
            c.sif.remove_common_component = s.value("remove_common_component", c.sif.remove_common_component);
            if (s.contains("oov_policy")) c.sif.oov_policy = parse_oov_policy(s["oov_policy"].get<std::string>());
        }
        if (j.contains("embedding_backend_url") && !j["embedding_backend_url"].is_null()) {
            c.embedding_backend_url = j["embedding_backend_url"].get<std::string>();
        }
        c.embedding_backend_id = j.value("embedding_backend_id", c.embedding_backend_id);
        c.log_path = resolve(base, j.at("log").get<std::string>());
        c.default_prefilter = j.value("prefilter", true);
        c.fallback_text = j.value("fallback_text", c.fallback_text);
        if (j.contains("domain_preferences")) c.domain_preferences = preferences_from_json(j["domain_preferences"]);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    } catch (const ParseError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (const char* env = std::getenv("OFA_LISTEN"); env && *env) {
        std::tie(c.listen_host, c.listen_port) = parse_listen_address(env);
    }
    c.validate();
    return c;
}

std::shared_ptr<const EmbeddingBackend> make_backend(const ServiceConfig& config) {
    if (config.embedding_backend_url) {
        return std::make_shared<RemoteEmbeddingBackend>(RemoteBackendEndpoint{*config.embedding_backend_url},
                                                        config.embedding_backend_id);
    }
    return std::make_shared<SifBackend>(load_word_vectors(*config.word_vectors_path),
                                        load_frequencies(*config.frequencies_path), config.sif);
}

std::shared_ptr<Orchestrator> make_orchestrator(const ServiceConfig& config) {
    config.validate();
    auto registry = std::make_shared<AgentRegistry>(load_registry(config.registry_path));
    auto patterns = config.refusal_patterns_path ? load_patterns(*config.refusal_patterns_path)
                                                 : UndesirablePatternSet::defaults();
    for (const auto& rule : config.domain_preferences.rules) {
        if (!registry->find(rule.agent_id)) {
            throw ConfigError("domain preference routes to unregistered agent '" + rule.agent_id + "'");
        }
    }
    auto log = std::make_shared<InteractionLog>(config.log_path);
    OrchestratorOptions options{config.fallback_text, config.default_prefilter};
    return std::make_shared<Orchestrator>(std::move(registry), make_backend(config), std::move(patterns),
                                          std::move(log), std::move(options), config.domain_preferences);
}

struct Service::Impl {
    httplib::Server server;
    std::thread worker;
    std::filesystem::path base_dir;
};

Service::Service(std::shared_ptr<Orchestrator> orchestrator, std::filesystem::path base_dir)
    : orchestrator_(std::move(orchestrator)), impl_(std::make_unique<Impl>()) {
    if (!orchestrator_) throw ConfigError("service needs an orchestrator");
    impl_->base_dir = std::move(base_dir);
    auto& server = impl_->server;
    auto* orch = orchestrator_.get();

    server.Post("/query", [orch](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto body = parse_body(req);
            if (!body.contains("text") || !body["text"].is_string() || body["text"].get<std::string>().empty()) {
                throw ParseError("'text' must be a non-empty string");
            }
            const auto text = body["text"].get<std::string>();
            const auto mode = body.value("mode", std::string("one_for_all"));
            const bool has_agent = body.contains("agent_id") && !body["agent_id"].is_null();
            std::optional<bool> prefilter;
            if (body.contains("prefilter") && !body["prefilter"].is_null()) {
                if (!body["prefilter"].is_boolean()) throw ParseError("'prefilter' must be a boolean");
                prefilter = body["prefilter"].get<bool>();
            }
            const auto session = body.value("session_id", std::string());

            TurnResult turn;
            if (mode == "agent_select") {
                if (!has_agent || !body["agent_id"].is_string()) throw ParseError("agent_select needs 'agent_id'");
                turn = orch->handle_turn_agent_select(text, body["agent_id"].get<std::string>(), session);
            } else if (mode == "one_for_all") {
                if (has_agent) throw ParseError("'agent_id' is only valid with mode agent_select");
                turn = orch->handle_turn_one_for_all(text, prefilter, session);
            } else {
                throw ParseError("unknown mode '" + mode + "'");
            }

            const auto& r = turn.record;
            json out = {{"selected_agent", r.selected_agent},
                        {"text", turn.selected_text},
                        {"turn_id", r.turn_id},
                        {"latency_ms", r.total_latency_ms},
                        {"mode", r.mode.is_agent_select() ? "agent_select" : "one_for_all"},
                        {"outcome", std::string(to_string(r.outcome))}};
            if (r.mode.is_agent_select()) {
                out["status"] = std::string(to_string(r.all_responses.front().status));
                out["routed_by_preference"] = r.routed_by_preference;
            } else {
                out["distances"] = distances_json(r);
                out["degraded"] = r.degraded;
            }
            reply_json(res, 200, out);
        });
    });

    server.Get("/agents", [orch](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] {
            auto arr = json::array();
            for (const auto& spec : orch->registry().specs()) arr.push_back(to_json(spec));
            reply_json(res, 200, arr);
        });
    });

    server.Post("/agents", [orch, this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto spec = agent_spec_from_json(parse_body(req), impl_->base_dir);
            orch->registry().register_agent(spec);
            reply_json(res, 201, to_json(spec));
        });
    });

    server.Delete(R"(/agents/([^/]+))", [orch](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            orch->registry().remove_agent(req.matches[1].str());
            res.status = 204;
        });
    });

    server.Post("/feedback", [orch](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto body = parse_body(req);
            if (!body.contains("turn_id") || !body["turn_id"].is_string()) throw ParseError("'turn_id' must be a string");
            if (!body.contains("correct") || !body["correct"].is_boolean()) {
                throw ParseError("'correct' must be a boolean");
            }
            orch->record_feedback(body["turn_id"].get<std::string>(), body["correct"].get<bool>());
            res.status = 204;
        });
    });

    server.Get("/log", [orch](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            std::size_t limit = 100;
            if (req.has_param("limit")) {
                const auto raw = req.get_param_value("limit");
                auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), limit);
                if (ec != std::errc{} || ptr != raw.data() + raw.size()) {
                    throw ParseError("'limit' must be a non-negative integer");
                }
            }
            auto arr = json::array();
            for (const auto& r : orch->log().recent(limit)) arr.push_back(to_json(r));
            reply_json(res, 200, arr);
        });
    });

    server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        reply_json(res, 200, {{"status", "ok"}});
    });
}

Service::~Service() { stop(); }

int Service::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound <= 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
    impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void Service::run(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
}

void Service::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace ofa
