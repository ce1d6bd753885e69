#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ofa/embedding.hpp"
#include "ofa/response.hpp"

namespace ofa {

struct RankingInput {
    std::string query;
    std::vector<CandidateResponse> candidates;
    // Agent ids in configured ensemble order; breaks exact distance ties.
    // When empty, the order of `candidates` is used instead.
    std::vector<std::string> ensemble_order;
};

enum class DropReason { status, refusal };
std::string_view to_string(DropReason reason);

struct DroppedCandidate {
    CandidateResponse candidate;
    DropReason reason;
};

struct RankedEntry {
    CandidateResponse candidate;
    // +infinity when the backend could not embed the candidate.
    double distance = 0.0;
    int rank = 0;
};

struct RankedCandidates {
    std::vector<RankedEntry> entries;
    std::vector<DroppedCandidate> filtered_out;
    // Every ok response was a refusal, so refusals were ranked anyway.
    bool degraded = false;
};

// Case-insensitive substring patterns that mark a refusal.
struct UndesirablePatternSet {
    std::vector<std::string> global_patterns;
    std::map<std::string, std::vector<std::string>> per_agent_patterns;

    // Phrases the integrated assistants used to signal they could not help.
    static UndesirablePatternSet defaults();

    void validate() const;
};

UndesirablePatternSet patterns_from_json(const nlohmann::json& j);
nlohmann::json to_json(const UndesirablePatternSet& patterns);
// {"global": [...], "per_agent": {"alexa": [...]}}
UndesirablePatternSet load_patterns(const std::filesystem::path& path);

bool is_undesirable(std::string_view text, std::string_view agent_id, const UndesirablePatternSet& patterns);

struct PrefilterResult {
    std::vector<CandidateResponse> kept;
    std::vector<DroppedCandidate> dropped;
    bool degraded = false;
};

// Drops non-ok responses and refusals. When that would leave nothing, the
// ok-status refusals are kept so the turn can still answer.
PrefilterResult prefilter(const RankingInput& input, const UndesirablePatternSet& patterns);

// Embeds the query and every surviving candidate in one batch and sorts by
// Euclidean distance to the query. Non-ok responses are always dropped;
// refusals only when `prefilter_enabled`. Throws NoResolvableTokens when the
// query cannot be embedded and ValidationError when nothing survives.
RankedCandidates rank(const RankingInput& input, const EmbeddingBackend& backend,
                      const UndesirablePatternSet& patterns, bool prefilter_enabled = true);

const CandidateResponse& select_best(const RankedCandidates& ranked);

}  // namespace ofa
