#include "ofa/ranking.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <numeric>

#include "ofa/errors.hpp"

namespace ofa {

namespace {

// Lowercase ASCII and fold the typographic apostrophe (U+2019) to '.
std::string fold_case(std::string_view s) {
    static constexpr std::string_view curly = "\xE2\x80\x99";
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.substr(i, curly.size()) == curly) {
            out.push_back('\'');
            i += curly.size() - 1;
            continue;
        }
        const auto u = static_cast<unsigned char>(s[i]);
        out.push_back(u < 128 ? static_cast<char>(std::tolower(u)) : s[i]);
    }
    return out;
}

bool contains_folded(const std::string& haystack_folded, std::string_view pattern) {
    return haystack_folded.find(fold_case(pattern)) != std::string::npos;
}

}  // namespace

std::string_view to_string(DropReason reason) {
    return reason == DropReason::status ? "status" : "refusal";
}

UndesirablePatternSet UndesirablePatternSet::defaults() {
    UndesirablePatternSet set;
    set.global_patterns = {
        "I'm not sure",
        "I don't have an opinion on that",
        "sorry I'm not sure how to help",
        "my apologies I don't understand",
        "Didn't get that",
        "I don't know that one",
    };
    return set;
}

void UndesirablePatternSet::validate() const {
    for (const auto& p : global_patterns) {
        if (p.empty()) throw ValidationError("refusal patterns must be non-empty");
    }
    for (const auto& [agent, list] : per_agent_patterns) {
        for (const auto& p : list) {
            if (p.empty()) throw ValidationError("refusal pattern for agent '" + agent + "' is empty");
        }
    }
}

UndesirablePatternSet patterns_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("refusal pattern config must be a JSON object");
    UndesirablePatternSet set;
    try {
        if (j.contains("global")) set.global_patterns = j.at("global").get<std::vector<std::string>>();
        if (j.contains("per_agent")) {
            set.per_agent_patterns = j.at("per_agent").get<std::map<std::string, std::vector<std::string>>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("refusal pattern config: ") + e.what());
    }
    set.validate();
    return set;
}

nlohmann::json to_json(const UndesirablePatternSet& patterns) {
    return {{"global", patterns.global_patterns}, {"per_agent", patterns.per_agent_patterns}};
}

UndesirablePatternSet load_patterns(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read " + path.string());
    try {
        return patterns_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

bool is_undesirable(std::string_view text, std::string_view agent_id, const UndesirablePatternSet& patterns) {
    const auto folded = fold_case(text);
    for (const auto& p : patterns.global_patterns) {
        if (contains_folded(folded, p)) return true;
    }
    const auto it = patterns.per_agent_patterns.find(std::string(agent_id));
    if (it != patterns.per_agent_patterns.end()) {
        for (const auto& p : it->second) {
            if (contains_folded(folded, p)) return true;
        }
    }
    return false;
}

PrefilterResult prefilter(const RankingInput& input, const UndesirablePatternSet& patterns) {
    PrefilterResult out;
    std::vector<CandidateResponse> refusals;
    for (const auto& c : input.candidates) {
        if (c.status != ResponseStatus::ok) {
            out.dropped.push_back({c, DropReason::status});
        } else if (is_undesirable(c.text, c.agent_id, patterns)) {
            refusals.push_back(c);
        } else {
            out.kept.push_back(c);
        }
    }
    if (out.kept.empty() && !refusals.empty()) {
        out.kept = std::move(refusals);
        out.degraded = true;
    } else {
        for (auto& r : refusals) out.dropped.push_back({std::move(r), DropReason::refusal});
    }
    return out;
}

RankedCandidates rank(const RankingInput& input, const EmbeddingBackend& backend,
                      const UndesirablePatternSet& patterns, bool prefilter_enabled) {
    if (input.candidates.empty()) throw ValidationError("ranking needs at least one candidate");

    RankedCandidates result;
    std::vector<CandidateResponse> survivors;
    if (prefilter_enabled) {
        auto filtered = prefilter(input, patterns);
        survivors = std::move(filtered.kept);
        result.filtered_out = std::move(filtered.dropped);
        result.degraded = filtered.degraded;
    } else {
        for (const auto& c : input.candidates) {
            if (c.status == ResponseStatus::ok) {
                survivors.push_back(c);
            } else {
                result.filtered_out.push_back({c, DropReason::status});
            }
        }
    }
    if (survivors.empty()) throw ValidationError("no candidate response survived filtering");

    std::vector<std::string> texts;
    texts.reserve(survivors.size() + 1);
    texts.push_back(input.query);
    for (const auto& c : survivors) texts.push_back(c.text);
    const auto embeddings = backend.embed_batch(texts);
    if (embeddings.size() != texts.size()) {
        throw ProtocolError("embedding backend returned the wrong number of embeddings");
    }
    if (!embeddings.front()) {
        throw NoResolvableTokens("query cannot be embedded: \"" + input.query + "\"");
    }
    const auto& query_vec = *embeddings.front();

    const auto& order = input.ensemble_order;
    auto ensemble_index = [&](const std::string& agent_id, std::size_t position) {
        const auto it = std::find(order.begin(), order.end(), agent_id);
        if (it != order.end()) return static_cast<std::size_t>(it - order.begin());
        return order.size() + position;
    };

    struct Scored {
        double distance;
        std::size_t tie_key;
        std::size_t position;
    };
    std::vector<Scored> scored;
    scored.reserve(survivors.size());
    for (std::size_t i = 0; i < survivors.size(); ++i) {
        const auto& e = embeddings[i + 1];
        const double d = e ? euclidean_distance(query_vec, *e) : std::numeric_limits<double>::infinity();
        scored.push_back({d, ensemble_index(survivors[i].agent_id, i), i});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        if (a.tie_key != b.tie_key) return a.tie_key < b.tie_key;
        return a.position < b.position;
    });

    result.entries.reserve(scored.size());
    for (std::size_t r = 0; r < scored.size(); ++r) {
        result.entries.push_back({survivors[scored[r].position], scored[r].distance, static_cast<int>(r + 1)});
    }
    return result;
}

const CandidateResponse& select_best(const RankedCandidates& ranked) {
    if (ranked.entries.empty()) throw ValidationError("cannot select from an empty ranking");
    return ranked.entries.front().candidate;
}

}  // namespace ofa
