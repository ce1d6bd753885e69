#include "ofa/agents.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <mutex>
#include <thread>

#include "http_client.hpp"
#include "ofa/embedding.hpp"
#include "ofa/errors.hpp"

namespace ofa {

namespace {

std::string normalize_query(std::string_view text) {
    std::string out;
    for (const auto& token : tokenize(text)) {
        if (!out.empty()) out.push_back(' ');
        out += token;
    }
    return out;
}

std::int64_t elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - since).count();
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::chrono::milliseconds read_delay(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ParseError(std::string("'") + key + "' must be a non-negative integer");
    }
    return std::chrono::milliseconds(v.get<std::int64_t>());
}

}  // namespace

void AgentSpec::validate() const {
    if (agent_id.empty()) throw ValidationError("agent_id must be non-empty");
    if (timeout.count() <= 0) throw ValidationError("timeout_ms of '" + agent_id + "' must be positive");
    if (const auto* remote = std::get_if<RemoteHttpTransport>(&transport); remote && remote->endpoint.empty()) {
        throw ValidationError("remote agent '" + agent_id + "' needs an endpoint");
    }
    if (const auto* scripted = std::get_if<ScriptedTransport>(&transport); scripted && scripted->script_path.empty()) {
        throw ValidationError("scripted agent '" + agent_id + "' needs a script path");
    }
}

AgentSpec agent_spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ParseError("agent spec must be a JSON object");
    AgentSpec spec;
    try {
        spec.agent_id = j.at("agent_id").get<std::string>();
        spec.display_name = j.value("display_name", spec.agent_id);
        if (j.contains("timeout_ms")) {
            const auto& t = j.at("timeout_ms");
            if (!t.is_number_integer()) throw ParseError("timeout_ms must be an integer");
            spec.timeout = std::chrono::milliseconds(t.get<std::int64_t>());
        }
        spec.enabled = j.value("enabled", true);

        const auto& transport = j.at("transport");
        const auto kind = transport.at("kind").get<std::string>();
        if (kind == "remote_http") {
            spec.transport = RemoteHttpTransport{transport.at("endpoint").get<std::string>()};
        } else if (kind == "scripted") {
            std::filesystem::path script = transport.at("script_path").get<std::string>();
            if (script.is_relative() && !base_dir.empty()) script = base_dir / script;
            spec.transport = ScriptedTransport{script};
        } else {
            throw ParseError("unknown agent transport kind: " + kind);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("agent spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

nlohmann::json to_json(const AgentSpec& spec) {
    nlohmann::json transport;
    if (const auto* remote = std::get_if<RemoteHttpTransport>(&spec.transport)) {
        transport = {{"kind", "remote_http"}, {"endpoint", remote->endpoint}};
    } else {
        transport = {{"kind", "scripted"},
                     {"script_path", std::get<ScriptedTransport>(spec.transport).script_path.string()}};
    }
    return {{"agent_id", spec.agent_id},
            {"display_name", spec.display_name},
            {"transport", transport},
            {"timeout_ms", spec.timeout.count()},
            {"enabled", spec.enabled}};
}

nlohmann::json to_json(const AgentResponse& r) {
    return {{"agent_id", r.agent_id},
            {"text", r.text},
            {"status", std::string(to_string(r.status))},
            {"latency_ms", r.latency_ms}};
}

AgentResponse agent_response_from_json(const nlohmann::json& j) {
    AgentResponse r;
    r.agent_id = j.at("agent_id").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.status = parse_response_status(j.at("status").get<std::string>());
    r.latency_ms = j.at("latency_ms").get<std::int64_t>();
    return r;
}

AgentScript script_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("agent script must be a JSON object");
    AgentScript script;
    try {
        script.default_response = j.at("default").get<std::string>();
        if (j.contains("delay_ms")) script.delay = read_delay(j, "delay_ms");
        if (j.contains("entries")) {
            for (const auto& e : j.at("entries")) {
                ScriptEntry entry;
                entry.match = e.at("match").get<std::string>();
                entry.response = e.at("response").get<std::string>();
                entry.regex = e.value("regex", false);
                if (e.contains("delay_ms")) entry.delay = read_delay(e, "delay_ms");
                if (entry.match.empty()) throw ParseError("script entry has an empty 'match'");
                script.entries.push_back(std::move(entry));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("agent script: ") + e.what());
    }
    return script;
}

AgentScript load_scripted_agent(const std::filesystem::path& path) {
    try {
        return script_from_json(read_json_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

ScriptedAgent::ScriptedAgent(AgentScript script) : script_(std::move(script)) {
    for (const auto& entry : script_.entries) {
        Compiled c{entry, normalize_query(entry.match), std::nullopt};
        if (entry.regex) {
            try {
                c.pattern.emplace(entry.match, std::regex::ECMAScript | std::regex::icase);
            } catch (const std::regex_error& e) {
                throw ParseError("bad regex '" + entry.match + "': " + e.what());
            }
        }
        compiled_.push_back(std::move(c));
    }
}

std::pair<std::string, std::chrono::milliseconds> ScriptedAgent::lookup(const std::string& query) const {
    const auto normalized = normalize_query(query);
    for (const auto& c : compiled_) {
        const bool hit = c.pattern ? std::regex_search(normalized, *c.pattern)
                                   : normalized.find(c.normalized_match) != std::string::npos;
        if (hit) return {c.entry.response, c.entry.delay.value_or(script_.delay)};
    }
    return {script_.default_response, script_.delay};
}

std::string ScriptedAgent::respond(const std::string& query, const std::string&) {
    count_call();
    auto [text, delay] = lookup(query);
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    return text;
}

RemoteHttpAgent::RemoteHttpAgent(std::string endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {}

std::string RemoteHttpAgent::respond(const std::string& query, const std::string& session_id) {
    count_call();
    const nlohmann::json request = {{"query", query}, {"session_id", session_id}};
    const auto reply = detail::post_json(endpoint_, "/respond", request.dump(), timeout_);
    if (reply.status < 200 || reply.status >= 300) {
        throw TransportError("agent returned HTTP " + std::to_string(reply.status));
    }
    try {
        const auto body = nlohmann::json::parse(reply.body);
        return body.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("agent reply: ") + e.what());
    }
}

std::shared_ptr<Agent> make_agent(const AgentSpec& spec) {
    if (const auto* remote = std::get_if<RemoteHttpTransport>(&spec.transport)) {
        return std::make_shared<RemoteHttpAgent>(remote->endpoint, spec.timeout);
    }
    return std::make_shared<ScriptedAgent>(
        load_scripted_agent(std::get<ScriptedTransport>(spec.transport).script_path));
}

AgentRegistry::AgentRegistry(std::vector<AgentHandle> agents) {
    for (auto& h : agents) register_agent(std::move(h.spec), std::move(h.agent));
}

RegistrySnapshot AgentRegistry::snapshot() const {
    std::shared_lock lock(mutex_);
    return agents_;
}

void AgentRegistry::register_agent(AgentSpec spec, std::shared_ptr<Agent> agent) {
    spec.validate();
    if (!agent) throw ValidationError("agent '" + spec.agent_id + "' has no implementation");
    std::unique_lock lock(mutex_);
    const auto& current = *agents_;
    if (std::any_of(current.begin(), current.end(),
                    [&](const AgentHandle& h) { return h.spec.agent_id == spec.agent_id; })) {
        throw Conflict("agent '" + spec.agent_id + "' is already registered");
    }
    auto next = std::make_shared<std::vector<AgentHandle>>(current);
    next->push_back({std::move(spec), std::move(agent)});
    agents_ = std::move(next);
}

void AgentRegistry::register_agent(AgentSpec spec) {
    spec.validate();
    auto agent = make_agent(spec);
    register_agent(std::move(spec), std::move(agent));
}

void AgentRegistry::remove_agent(const std::string& agent_id) {
    std::unique_lock lock(mutex_);
    auto next = std::make_shared<std::vector<AgentHandle>>(*agents_);
    const auto it = std::find_if(next->begin(), next->end(),
                                 [&](const AgentHandle& h) { return h.spec.agent_id == agent_id; });
    if (it == next->end()) throw NotFound("no agent '" + agent_id + "'");
    next->erase(it);
    agents_ = std::move(next);
}

std::optional<AgentHandle> AgentRegistry::find(const std::string& agent_id) const {
    const auto snap = snapshot();
    for (const auto& h : *snap) {
        if (h.spec.agent_id == agent_id) return h;
    }
    return std::nullopt;
}

std::vector<AgentSpec> AgentRegistry::specs() const {
    std::vector<AgentSpec> out;
    for (const auto& h : *snapshot()) out.push_back(h.spec);
    return out;
}

std::vector<std::string> AgentRegistry::order() const {
    std::vector<std::string> out;
    for (const auto& h : *snapshot()) out.push_back(h.spec.agent_id);
    return out;
}

std::size_t AgentRegistry::size() const { return snapshot()->size(); }

AgentRegistry load_registry(const std::filesystem::path& path) {
    const auto j = read_json_file(path);
    if (!j.is_array()) throw ParseError(path.string() + ": registry config must be a JSON list");
    AgentRegistry registry;
    const auto base = path.parent_path();
    for (const auto& item : j) registry.register_agent(agent_spec_from_json(item, base));
    return registry;
}

PendingResponse::PendingResponse(std::string agent_id, std::chrono::milliseconds timeout,
                                 std::future<std::string> reply, std::chrono::steady_clock::time_point started)
    : agent_id_(std::move(agent_id)), timeout_(timeout), reply_(std::move(reply)), started_(started) {}

AgentResponse PendingResponse::collect() {
    AgentResponse out{agent_id_, {}, ResponseStatus::ok, 0};
    if (reply_.wait_until(started_ + timeout_) != std::future_status::ready) {
        out.status = ResponseStatus::timeout;
        out.latency_ms = std::max<std::int64_t>(elapsed_ms(started_), timeout_.count());
        return out;
    }
    out.latency_ms = elapsed_ms(started_);
    try {
        out.text = reply_.get();
        if (out.text.empty()) {
            out.status = ResponseStatus::error;
            out.text = "agent returned an empty response";
        }
    } catch (const std::exception& e) {
        out.status = ResponseStatus::error;
        out.text = e.what();
    }
    return out;
}

PendingResponse dispatch(const AgentHandle& handle, const std::string& query, const std::string& session_id) {
    auto promise = std::make_shared<std::promise<std::string>>();
    auto future = promise->get_future();
    const auto started = std::chrono::steady_clock::now();
    std::thread([agent = handle.agent, promise, query, session_id] {
        try {
            promise->set_value(agent->respond(query, session_id));
        } catch (...) {
            promise->set_exception(std::current_exception());
        }
    }).detach();
    return PendingResponse(handle.spec.agent_id, handle.spec.timeout, std::move(future), started);
}

AgentResponse query_agent(const AgentHandle& handle, const std::string& query, const std::string& session_id) {
    if (!handle.spec.enabled) throw ValidationError("agent '" + handle.spec.agent_id + "' is disabled");
    return dispatch(handle, query, session_id).collect();
}

}  // namespace ofa
