#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ofa/agents.hpp"
#include "ofa/embedding.hpp"
#include "ofa/ranking.hpp"

namespace ofa {

struct InteractionMode {
    enum class Kind { one_for_all, agent_select };
    Kind kind = Kind::one_for_all;
    std::string agent_id;  // set iff kind == agent_select

    static InteractionMode one_for_all() { return {}; }
    static InteractionMode agent_select(std::string id) { return {Kind::agent_select, std::move(id)}; }
    bool is_agent_select() const noexcept { return kind == Kind::agent_select; }
};

enum class TurnOutcome {
    ok,
    // No usable response came back; the fallback text was returned.
    fallback,
    // The query itself could not be embedded.
    error,
};

std::string_view to_string(TurnOutcome outcome);

struct InteractionRecord {
    std::string turn_id;
    std::string timestamp;  // ISO-8601 UTC
    InteractionMode mode;
    std::string query_text;
    std::vector<AgentResponse> all_responses;
    std::string selected_agent;
    std::string selected_text;
    std::optional<std::vector<std::pair<std::string, double>>> distances;
    std::optional<bool> user_correct;
    std::int64_t total_latency_ms = 0;

    TurnOutcome outcome = TurnOutcome::ok;
    bool prefilter = true;
    bool degraded = false;
    bool routed_by_preference = false;
    // Bumped by each feedback line appended for the same turn.
    int version = 1;
};

nlohmann::json to_json(const InteractionRecord& r);
InteractionRecord interaction_record_from_json(const nlohmann::json& j);

// Append-only JSON-Lines log. The newest line for a turn_id wins on replay.
class InteractionLog {
public:
    // Empty path keeps the log in memory only.
    explicit InteractionLog(std::filesystem::path path = {});

    void append(const InteractionRecord& record);
    // Sets user_correct and appends a new version of the record. Throws NotFound.
    InteractionRecord record_feedback(const std::string& turn_id, bool user_correct);

    std::optional<InteractionRecord> find(const std::string& turn_id) const;
    // Newest turn first.
    std::vector<InteractionRecord> recent(std::size_t limit) const;
    std::size_t size() const;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    void write_line(const InteractionRecord& record);

    mutable std::mutex mutex_;
    std::filesystem::path path_;
    std::ofstream out_;
    std::vector<std::string> turn_order_;
    std::map<std::string, InteractionRecord> latest_;
};

// Fraction of turns with feedback that were marked correct; nullopt when none have feedback.
std::optional<double> feedback_accuracy(const std::vector<InteractionRecord>& records);

struct DomainPreferenceRule {
    std::string pattern;  // case-insensitive keyword
    std::string agent_id;
};

struct DomainPreferenceList {
    std::vector<DomainPreferenceRule> rules;
};

DomainPreferenceList preferences_from_json(const nlohmann::json& j);

// First rule whose keyword occurs in the query wins.
std::optional<std::string> route_by_preference(const std::string& query_text, const DomainPreferenceList& prefs);

// One response per enabled agent, in registry order. Agents are queried
// concurrently and every one is awaited up to its own timeout.
std::vector<AgentResponse> fanout(const std::string& query_text, const RegistrySnapshot& agents,
                                  const std::string& session_id = {});

struct OrchestratorOptions {
    std::string fallback_text = "None of the assistants could answer that.";
    bool default_prefilter = true;
};

struct TurnResult {
    std::string selected_text;
    InteractionRecord record;
};

class Orchestrator {
public:
    Orchestrator(std::shared_ptr<AgentRegistry> registry, std::shared_ptr<const EmbeddingBackend> backend,
                 UndesirablePatternSet patterns, std::shared_ptr<InteractionLog> log,
                 OrchestratorOptions options = {}, DomainPreferenceList preferences = {});

    // Fan out, prefilter, rank, return the closest response. A matching
    // domain preference rule turns this into an agent-select turn.
    TurnResult handle_turn_one_for_all(const std::string& query_text, std::optional<bool> prefilter = std::nullopt,
                                       const std::string& session_id = {});

    // Queries only `agent_id`; no ranking. Throws NotFound for an unknown or disabled agent.
    TurnResult handle_turn_agent_select(const std::string& query_text, const std::string& agent_id,
                                        const std::string& session_id = {});

    TurnResult handle_turn(const std::string& query_text, const InteractionMode& mode,
                           std::optional<bool> prefilter = std::nullopt, const std::string& session_id = {});

    InteractionRecord record_feedback(const std::string& turn_id, bool user_correct);

    AgentRegistry& registry() noexcept { return *registry_; }
    InteractionLog& log() noexcept { return *log_; }
    const OrchestratorOptions& options() const noexcept { return options_; }

private:
    TurnResult agent_select_turn(const std::string& query_text, const AgentHandle& handle,
                                 const std::string& session_id, bool routed);

    std::shared_ptr<AgentRegistry> registry_;
    std::shared_ptr<const EmbeddingBackend> backend_;
    UndesirablePatternSet patterns_;
    std::shared_ptr<InteractionLog> log_;
    OrchestratorOptions options_;
    DomainPreferenceList preferences_;
};

std::string new_turn_id();
std::string utc_timestamp_now();

}  // namespace ofa
