#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <future>
#include <memory>
#include <optional>
#include <regex>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ofa/response.hpp"

namespace ofa {

inline constexpr std::chrono::milliseconds kDefaultAgentTimeout{3000};

struct RemoteHttpTransport {
    std::string endpoint;  // POST {endpoint}/respond
};

struct ScriptedTransport {
    std::filesystem::path script_path;
};

using AgentTransport = std::variant<RemoteHttpTransport, ScriptedTransport>;

struct AgentSpec {
    std::string agent_id;
    std::string display_name;
    AgentTransport transport;
    std::chrono::milliseconds timeout = kDefaultAgentTimeout;
    bool enabled = true;

    void validate() const;
};

// Relative script paths resolve against `base_dir`.
AgentSpec agent_spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const AgentSpec& spec);

struct AgentResponse {
    std::string agent_id;
    std::string text;
    ResponseStatus status = ResponseStatus::ok;
    std::int64_t latency_ms = 0;

    CandidateResponse as_candidate() const { return {agent_id, text, status}; }
};

nlohmann::json to_json(const AgentResponse& r);
AgentResponse agent_response_from_json(const nlohmann::json& j);

// A black-box conversational agent. respond() may block; callers bound it
// with the spec's timeout. Failures throw and are mapped to status=error.
class Agent {
public:
    virtual ~Agent() = default;
    virtual std::string respond(const std::string& query, const std::string& session_id) = 0;
    std::uint64_t call_count() const noexcept { return calls_.load(); }

protected:
    void count_call() noexcept { calls_.fetch_add(1); }

private:
    std::atomic<std::uint64_t> calls_{0};
};

struct ScriptEntry {
    std::string match;
    bool regex = false;
    std::string response;
    std::optional<std::chrono::milliseconds> delay;
};

struct AgentScript {
    std::string default_response;
    std::chrono::milliseconds delay{0};
    std::vector<ScriptEntry> entries;
};

// {"default": "...", "delay_ms": 0, "entries": [{"match": "...", "response": "...", "delay_ms": 0}]}
// An entry with "regex": true matches with ECMAScript regex search instead of substring.
AgentScript script_from_json(const nlohmann::json& j);
AgentScript load_scripted_agent(const std::filesystem::path& path);

// Deterministic test double. Queries and substring patterns are compared
// after tokenize()-style normalization; first matching entry wins.
class ScriptedAgent final : public Agent {
public:
    explicit ScriptedAgent(AgentScript script);
    std::string respond(const std::string& query, const std::string& session_id) override;

    // Response text and delay, without sleeping.
    std::pair<std::string, std::chrono::milliseconds> lookup(const std::string& query) const;

private:
    struct Compiled {
        ScriptEntry entry;
        std::string normalized_match;
        std::optional<std::regex> pattern;
    };
    AgentScript script_;
    std::vector<Compiled> compiled_;
};

// POST {endpoint}/respond with {"query", "session_id"} -> {"text"}.
class RemoteHttpAgent final : public Agent {
public:
    RemoteHttpAgent(std::string endpoint, std::chrono::milliseconds timeout);
    std::string respond(const std::string& query, const std::string& session_id) override;

private:
    std::string endpoint_;
    std::chrono::milliseconds timeout_;
};

std::shared_ptr<Agent> make_agent(const AgentSpec& spec);

struct AgentHandle {
    AgentSpec spec;
    std::shared_ptr<Agent> agent;
};

using RegistrySnapshot = std::shared_ptr<const std::vector<AgentHandle>>;

// Ordered ensemble. Readers take immutable snapshots; writers replace the
// snapshot, so a turn in flight keeps the list it started with.
class AgentRegistry {
public:
    AgentRegistry() = default;
    explicit AgentRegistry(std::vector<AgentHandle> agents);
    AgentRegistry(AgentRegistry&& other) noexcept : agents_(other.snapshot()) {}
    AgentRegistry& operator=(AgentRegistry&&) = delete;

    RegistrySnapshot snapshot() const;

    // Throws Conflict on a duplicate agent_id.
    void register_agent(AgentSpec spec, std::shared_ptr<Agent> agent);
    void register_agent(AgentSpec spec);
    // Throws NotFound.
    void remove_agent(const std::string& agent_id);

    std::optional<AgentHandle> find(const std::string& agent_id) const;
    std::vector<AgentSpec> specs() const;
    std::vector<std::string> order() const;
    std::size_t size() const;

private:
    mutable std::shared_mutex mutex_;
    RegistrySnapshot agents_ = std::make_shared<const std::vector<AgentHandle>>();
};

// Registry config: JSON list of AgentSpec.
AgentRegistry load_registry(const std::filesystem::path& path);

// A query dispatched to one agent, awaiting its deadline.
class PendingResponse {
public:
    PendingResponse(std::string agent_id, std::chrono::milliseconds timeout, std::future<std::string> reply,
                    std::chrono::steady_clock::time_point started);
    // Blocks until the reply arrives or the deadline passes.
    AgentResponse collect();

private:
    std::string agent_id_;
    std::chrono::milliseconds timeout_;
    std::future<std::string> reply_;
    std::chrono::steady_clock::time_point started_;
};

// Starts respond() on a detached worker and returns immediately. The worker
// co-owns the agent, so a late reply after the deadline is simply discarded.
PendingResponse dispatch(const AgentHandle& handle, const std::string& query, const std::string& session_id);

AgentResponse query_agent(const AgentHandle& handle, const std::string& query, const std::string& session_id = {});

}  // namespace ofa
