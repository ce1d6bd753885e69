#include "ofa/orchestrator.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <random>
#include <sstream>

#include "ofa/errors.hpp"

namespace ofa {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        const auto u = static_cast<unsigned char>(c);
        if (u < 128) c = static_cast<char>(std::tolower(u));
    }
    return out;
}

std::int64_t elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

std::string_view to_string(TurnOutcome outcome) {
    switch (outcome) {
        case TurnOutcome::ok: return "ok";
        case TurnOutcome::fallback: return "fallback";
        case TurnOutcome::error: return "error";
    }
    return "error";
}

std::string new_turn_id() {
    static thread_local std::mt19937_64 gen{std::random_device{}()};
    std::uniform_int_distribution<std::uint64_t> dist;
    std::ostringstream os;
    os << std::hex << std::setfill('0') << std::setw(16) << dist(gen) << std::setw(16) << dist(gen);
    return os.str();
}

std::string utc_timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << 'Z';
    return os.str();
}

nlohmann::json to_json(const InteractionRecord& r) {
    nlohmann::json j;
    j["turn_id"] = r.turn_id;
    j["version"] = r.version;
    j["timestamp"] = r.timestamp;
    j["mode"] = r.mode.is_agent_select() ? "agent_select" : "one_for_all";
    j["chosen_agent"] = r.mode.is_agent_select() ? nlohmann::json(r.mode.agent_id) : nlohmann::json(nullptr);
    j["query_text"] = r.query_text;
    j["all_responses"] = nlohmann::json::array();
    for (const auto& resp : r.all_responses) j["all_responses"].push_back(to_json(resp));
    j["selected_agent"] = r.selected_agent;
    j["selected_text"] = r.selected_text;
    if (r.distances) {
        auto arr = nlohmann::json::array();
        for (const auto& [agent, d] : *r.distances) {
            arr.push_back({{"agent_id", agent}, {"distance", std::isfinite(d) ? nlohmann::json(d) : nlohmann::json(nullptr)}});
        }
        j["distances"] = std::move(arr);
    } else {
        j["distances"] = nullptr;
    }
    j["user_correct"] = r.user_correct ? nlohmann::json(*r.user_correct) : nlohmann::json(nullptr);
    j["total_latency_ms"] = r.total_latency_ms;
    j["outcome"] = std::string(to_string(r.outcome));
    j["prefilter"] = r.prefilter;
    j["degraded"] = r.degraded;
    j["routed_by_preference"] = r.routed_by_preference;
    return j;
}

InteractionRecord interaction_record_from_json(const nlohmann::json& j) {
    InteractionRecord r;
    try {
        r.turn_id = j.at("turn_id").get<std::string>();
        r.version = j.value("version", 1);
        r.timestamp = j.at("timestamp").get<std::string>();
        const auto mode = j.at("mode").get<std::string>();
        if (mode == "agent_select") {
            r.mode = InteractionMode::agent_select(j.at("chosen_agent").get<std::string>());
        } else if (mode != "one_for_all") {
            throw ParseError("unknown mode: " + mode);
        }
        r.query_text = j.at("query_text").get<std::string>();
        for (const auto& resp : j.at("all_responses")) r.all_responses.push_back(agent_response_from_json(resp));
        r.selected_agent = j.at("selected_agent").get<std::string>();
        r.selected_text = j.at("selected_text").get<std::string>();
        if (j.contains("distances") && !j["distances"].is_null()) {
            std::vector<std::pair<std::string, double>> ds;
            for (const auto& d : j["distances"]) {
                const auto& v = d.at("distance");
                ds.emplace_back(d.at("agent_id").get<std::string>(),
                                v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>());
            }
            r.distances = std::move(ds);
        }
        if (j.contains("user_correct") && !j["user_correct"].is_null()) r.user_correct = j["user_correct"].get<bool>();
        r.total_latency_ms = j.at("total_latency_ms").get<std::int64_t>();
        const auto outcome = j.value("outcome", std::string("ok"));
        r.outcome = outcome == "fallback" ? TurnOutcome::fallback
                    : outcome == "error"  ? TurnOutcome::error
                                          : TurnOutcome::ok;
        r.prefilter = j.value("prefilter", true);
        r.degraded = j.value("degraded", false);
        r.routed_by_preference = j.value("routed_by_preference", false);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("interaction record: ") + e.what());
    }
    return r;
}

InteractionLog::InteractionLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.empty()) return;
    if (std::filesystem::exists(path_)) {
        std::ifstream in(path_);
        if (!in) throw ConfigError("cannot read interaction log " + path_.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                auto rec = interaction_record_from_json(nlohmann::json::parse(line));
                if (!latest_.contains(rec.turn_id)) turn_order_.push_back(rec.turn_id);
                latest_.insert_or_assign(rec.turn_id, std::move(rec));
            } catch (const std::exception& e) {
                throw ParseError(path_.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
    }
    out_.open(path_, std::ios::app);
    if (!out_) throw ConfigError("cannot open interaction log " + path_.string() + " for appending");
}

void InteractionLog::write_line(const InteractionRecord& record) {
    if (!out_.is_open()) return;
    out_ << to_json(record).dump() << '\n';
    out_.flush();
}

void InteractionLog::append(const InteractionRecord& record) {
    std::lock_guard lock(mutex_);
    if (latest_.contains(record.turn_id)) throw Conflict("turn '" + record.turn_id + "' is already logged");
    write_line(record);
    turn_order_.push_back(record.turn_id);
    latest_.emplace(record.turn_id, record);
}

InteractionRecord InteractionLog::record_feedback(const std::string& turn_id, bool user_correct) {
    std::lock_guard lock(mutex_);
    const auto it = latest_.find(turn_id);
    if (it == latest_.end()) throw NotFound("no turn '" + turn_id + "'");
    auto updated = it->second;
    updated.user_correct = user_correct;
    updated.version += 1;
    write_line(updated);
    it->second = updated;
    return updated;
}

std::optional<InteractionRecord> InteractionLog::find(const std::string& turn_id) const {
    std::lock_guard lock(mutex_);
    const auto it = latest_.find(turn_id);
    if (it == latest_.end()) return std::nullopt;
    return it->second;
}

std::vector<InteractionRecord> InteractionLog::recent(std::size_t limit) const {
    std::lock_guard lock(mutex_);
    std::vector<InteractionRecord> out;
    for (auto it = turn_order_.rbegin(); it != turn_order_.rend() && out.size() < limit; ++it) {
        out.push_back(latest_.at(*it));
    }
    return out;
}

std::size_t InteractionLog::size() const {
    std::lock_guard lock(mutex_);
    return turn_order_.size();
}

std::optional<double> feedback_accuracy(const std::vector<InteractionRecord>& records) {
    std::size_t rated = 0;
    std::size_t correct = 0;
    for (const auto& r : records) {
        if (!r.user_correct) continue;
        ++rated;
        if (*r.user_correct) ++correct;
    }
    if (rated == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(rated);
}

DomainPreferenceList preferences_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw ParseError("domain preferences must be a JSON list");
    DomainPreferenceList prefs;
    for (const auto& rule : j) {
        try {
            DomainPreferenceRule r{rule.at("pattern").get<std::string>(), rule.at("agent_id").get<std::string>()};
            if (r.pattern.empty() || r.agent_id.empty()) throw ParseError("domain preference rule has empty fields");
            prefs.rules.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("domain preference rule: ") + e.what());
        }
    }
    return prefs;
}

std::optional<std::string> route_by_preference(const std::string& query_text, const DomainPreferenceList& prefs) {
    const auto folded = lower(query_text);
    for (const auto& rule : prefs.rules) {
        if (folded.find(lower(rule.pattern)) != std::string::npos) return rule.agent_id;
    }
    return std::nullopt;
}

std::vector<AgentResponse> fanout(const std::string& query_text, const RegistrySnapshot& agents,
                                  const std::string& session_id) {
    std::vector<PendingResponse> pending;
    for (const auto& handle : *agents) {
        if (handle.spec.enabled) pending.push_back(dispatch(handle, query_text, session_id));
    }
    if (pending.empty()) throw NoAgentsEnabled("no enabled agents to query");

    std::vector<AgentResponse> out;
    out.reserve(pending.size());
    for (auto& p : pending) out.push_back(p.collect());
    return out;
}

Orchestrator::Orchestrator(std::shared_ptr<AgentRegistry> registry, std::shared_ptr<const EmbeddingBackend> backend,
                           UndesirablePatternSet patterns, std::shared_ptr<InteractionLog> log,
                           OrchestratorOptions options, DomainPreferenceList preferences)
    : registry_(std::move(registry)),
      backend_(std::move(backend)),
      patterns_(std::move(patterns)),
      log_(std::move(log)),
      options_(std::move(options)),
      preferences_(std::move(preferences)) {
    if (!registry_ || !backend_ || !log_) throw ConfigError("orchestrator needs a registry, a backend and a log");
    patterns_.validate();
}

TurnResult Orchestrator::handle_turn_one_for_all(const std::string& query_text, std::optional<bool> prefilter,
                                                 const std::string& session_id) {
    if (query_text.empty()) throw ValidationError("query text must be non-empty");
    const auto started = std::chrono::steady_clock::now();
    const bool use_prefilter = prefilter.value_or(options_.default_prefilter);
    const auto snapshot = registry_->snapshot();

    if (const auto routed = route_by_preference(query_text, preferences_)) {
        for (const auto& h : *snapshot) {
            if (h.spec.agent_id == *routed && h.spec.enabled) return agent_select_turn(query_text, h, session_id, true);
        }
    }

    auto responses = fanout(query_text, snapshot, session_id);

    InteractionRecord record;
    record.turn_id = new_turn_id();
    record.timestamp = utc_timestamp_now();
    record.mode = InteractionMode::one_for_all();
    record.query_text = query_text;
    record.prefilter = use_prefilter;

    RankingInput input;
    input.query = query_text;
    for (const auto& r : responses) input.candidates.push_back(r.as_candidate());
    for (const auto& h : *snapshot) input.ensemble_order.push_back(h.spec.agent_id);
    record.all_responses = std::move(responses);

    const bool any_ok = std::any_of(input.candidates.begin(), input.candidates.end(),
                                    [](const CandidateResponse& c) { return c.status == ResponseStatus::ok; });
    if (!any_ok) {
        record.outcome = TurnOutcome::fallback;
        record.selected_text = options_.fallback_text;
    } else {
        try {
            const auto ranked = rank(input, *backend_, patterns_, use_prefilter);
            const auto& best = select_best(ranked);
            record.selected_agent = best.agent_id;
            record.selected_text = best.text;
            record.degraded = ranked.degraded;
            std::vector<std::pair<std::string, double>> distances;
            for (const auto& e : ranked.entries) distances.emplace_back(e.candidate.agent_id, e.distance);
            record.distances = std::move(distances);
        } catch (const Error&) {
            record.outcome = TurnOutcome::error;
            record.selected_text = options_.fallback_text;
        }
    }
    record.total_latency_ms = elapsed_ms(started);
    log_->append(record);
    return {record.selected_text, record};
}

TurnResult Orchestrator::handle_turn_agent_select(const std::string& query_text, const std::string& agent_id,
                                                  const std::string& session_id) {
    if (query_text.empty()) throw ValidationError("query text must be non-empty");
    const auto handle = registry_->find(agent_id);
    if (!handle) throw NotFound("no agent '" + agent_id + "'");
    if (!handle->spec.enabled) throw NotFound("agent '" + agent_id + "' is disabled");
    return agent_select_turn(query_text, *handle, session_id, false);
}

TurnResult Orchestrator::agent_select_turn(const std::string& query_text, const AgentHandle& handle,
                                           const std::string& session_id, bool routed) {
    const auto started = std::chrono::steady_clock::now();
    auto response = query_agent(handle, query_text, session_id);

    InteractionRecord record;
    record.turn_id = new_turn_id();
    record.timestamp = utc_timestamp_now();
    record.mode = InteractionMode::agent_select(handle.spec.agent_id);
    record.query_text = query_text;
    record.selected_agent = handle.spec.agent_id;
    record.prefilter = false;
    record.routed_by_preference = routed;
    if (response.status == ResponseStatus::ok) {
        record.selected_text = response.text;
    } else {
        record.outcome = TurnOutcome::fallback;
        record.selected_text = options_.fallback_text;
    }
    record.all_responses.push_back(std::move(response));
    record.total_latency_ms = elapsed_ms(started);
    log_->append(record);
    return {record.selected_text, record};
}

TurnResult Orchestrator::handle_turn(const std::string& query_text, const InteractionMode& mode,
                                     std::optional<bool> prefilter, const std::string& session_id) {
    if (mode.is_agent_select()) return handle_turn_agent_select(query_text, mode.agent_id, session_id);
    return handle_turn_one_for_all(query_text, prefilter, session_id);
}

InteractionRecord Orchestrator::record_feedback(const std::string& turn_id, bool user_correct) {
    return log_->record_feedback(turn_id, user_correct);
}

}  // namespace ofa
