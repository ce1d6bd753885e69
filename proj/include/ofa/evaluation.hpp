#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ofa/embedding.hpp"
#include "ofa/ranking.hpp"

namespace ofa::eval {

struct EvaluationTask {
    std::string task_id;
    std::string domain;
    std::string query_text;
    // Agent -> response text, in file order (the ensemble order for tie-breaks).
    std::vector<std::pair<std::string, std::string>> responses;
    std::vector<std::string> human_votes;
    // Agent -> Likert ratings in 1..5.
    std::optional<std::map<std::string, std::vector<int>>> quality_ratings;

    const std::string* response_of(const std::string& agent_id) const;
    void validate() const;
};

// Ordered JSON keeps the file order of `responses`.
EvaluationTask task_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const EvaluationTask& task);

// JSON-Lines, one task per line. Errors name the line and the task_id.
std::vector<EvaluationTask> load_dataset(const std::filesystem::path& path);
std::vector<EvaluationTask> parse_dataset(std::istream& in, const std::string& source = "<stream>");

struct VoteOutcome {
    std::string winner;
    bool tied = false;
};

// Most frequent id; ties go to the lexicographically smallest id.
VoteOutcome majority_vote_detail(const std::vector<std::string>& votes);
std::string majority_vote(const std::vector<std::string>& votes);

struct OneForAllPolicy {
    std::string backend_id;
};
struct FixedAgentPolicy {
    std::string agent_id;
};
struct HumanGoldPolicy {};

using RankingPolicy = std::variant<OneForAllPolicy, FixedAgentPolicy, HumanGoldPolicy>;

// "human_gold", "fixed:<agent>", "ofa:<backend>".
RankingPolicy parse_policy(const std::string& spec);
std::string policy_name(const RankingPolicy& policy);

struct EvalContext {
    // Backends by id, for one_for_all policies.
    std::map<std::string, std::shared_ptr<const EmbeddingBackend>> backends;
    UndesirablePatternSet patterns = UndesirablePatternSet::defaults();
    bool prefilter = true;
    // Overrides each task's response order for tie-breaking when non-empty.
    std::vector<std::string> agent_order;
};

// Agent the policy picks for `task`. Throws NotFound when the policy names an
// absent agent or backend, and NoResolvableTokens when one_for_all cannot
// embed the query.
std::string apply_policy(const EvaluationTask& task, const RankingPolicy& policy, const EvalContext& ctx);

struct Fraction {
    std::size_t hits = 0;
    std::size_t total = 0;
    double value() const { return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total); }
};

struct AccuracyResult {
    Fraction overall;
    std::map<std::string, Fraction> per_domain;
    // Tasks whose query the backend could not embed; counted as misses.
    std::size_t unrankable = 0;
    std::size_t vote_ties = 0;
};

AccuracyResult selection_accuracy(const std::vector<EvaluationTask>& tasks, const RankingPolicy& policy,
                                  const EvalContext& ctx);

enum class QualityAggregation {
    // Every worker rating counts once.
    per_rating,
    // Each task contributes the (lower) median of its ratings.
    per_task_median,
};

struct QualityResult {
    std::array<std::size_t, 5> histogram{};  // index 0 -> rating 1
    Fraction acceptable_or_better;           // ratings >= 3
    std::size_t tasks_rated = 0;
};

// Tasks without any quality ratings are skipped; a rated task lacking
// ratings for the selected agent is a ValidationError.
QualityResult quality_distribution(const std::vector<EvaluationTask>& tasks, const RankingPolicy& policy,
                                   const EvalContext& ctx,
                                   QualityAggregation aggregation = QualityAggregation::per_rating);

// Fraction of tasks whose selected response is a refusal.
Fraction undesirable_rate(const std::vector<EvaluationTask>& tasks, const RankingPolicy& policy,
                          const EvalContext& ctx);

struct PolicyReport {
    std::string policy;
    AccuracyResult accuracy;
    std::optional<QualityResult> quality;
    Fraction undesirable;
};

struct MetricsReport {
    std::vector<PolicyReport> policies;
    std::vector<std::string> domains;  // first-seen order
    std::size_t task_count = 0;
    std::size_t vote_ties = 0;
    bool prefilter = true;
};

MetricsReport evaluate(const std::vector<EvaluationTask>& tasks, const std::vector<RankingPolicy>& policies,
                       const EvalContext& ctx, QualityAggregation aggregation = QualityAggregation::per_rating);

nlohmann::ordered_json to_json(const MetricsReport& report);
// Domains down the side, policies across, percentages in cells.
std::string to_table(const MetricsReport& report);

}  // namespace ofa::eval
