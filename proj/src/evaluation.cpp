#include "ofa/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "ofa/errors.hpp"

namespace ofa::eval {

namespace {

using ojson = nlohmann::ordered_json;

[[noreturn]] void invalid(const std::string& task_id, const std::string& field, const std::string& what) {
    throw ValidationError("task '" + task_id + "', field '" + field + "': " + what);
}

struct Selection {
    std::optional<std::string> agent;  // nullopt: query could not be embedded
};

Selection select(const EvaluationTask& task, const RankingPolicy& policy, const EvalContext& ctx) {
    try {
        return {apply_policy(task, policy, ctx)};
    } catch (const NoResolvableTokens&) {
        return {std::nullopt};
    }
}

std::string percent(const Fraction& f) {
    if (f.total == 0) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * f.value());
    return buf;
}

ojson fraction_json(const Fraction& f) {
    return {{"value", f.value()}, {"hits", f.hits}, {"total", f.total}};
}

}  // namespace

const std::string* EvaluationTask::response_of(const std::string& agent_id) const {
    for (const auto& [agent, text] : responses) {
        if (agent == agent_id) return &text;
    }
    return nullptr;
}

void EvaluationTask::validate() const {
    if (task_id.empty()) invalid(task_id, "task_id", "must be non-empty");
    if (responses.empty()) invalid(task_id, "responses", "must name at least one agent");
    std::set<std::string> seen;
    for (const auto& [agent, _] : responses) {
        if (!seen.insert(agent).second) invalid(task_id, "responses", "duplicate agent '" + agent + "'");
    }
    if (human_votes.empty()) invalid(task_id, "human_votes", "must be non-empty");
    for (const auto& v : human_votes) {
        if (!seen.contains(v)) invalid(task_id, "human_votes", "vote for '" + v + "' which has no response");
    }
    if (quality_ratings) {
        for (const auto& [agent, ratings] : *quality_ratings) {
            if (!seen.contains(agent)) invalid(task_id, "quality_ratings", "ratings for unknown agent '" + agent + "'");
            for (int r : ratings) {
                if (r < 1 || r > 5) {
                    invalid(task_id, "quality_ratings", "rating " + std::to_string(r) + " outside 1..5");
                }
            }
        }
    }
}

EvaluationTask task_from_json(const ojson& j) {
    EvaluationTask t;
    if (!j.is_object()) throw ParseError("task must be a JSON object");
    t.task_id = j.contains("task_id") && j["task_id"].is_string() ? j["task_id"].get<std::string>() : "";
    auto field = [&](const char* name) -> const ojson& {
        if (!j.contains(name)) invalid(t.task_id, name, "missing");
        return j[name];
    };
    try {
        if (t.task_id.empty()) invalid("", "task_id", "missing or not a string");
        t.domain = field("domain").get<std::string>();
        t.query_text = field("query_text").get<std::string>();
        const auto& responses = field("responses");
        if (!responses.is_object()) invalid(t.task_id, "responses", "must be an object");
        for (const auto& [agent, text] : responses.items()) t.responses.emplace_back(agent, text.get<std::string>());
        t.human_votes = field("human_votes").get<std::vector<std::string>>();
        if (j.contains("quality_ratings") && !j["quality_ratings"].is_null()) {
            t.quality_ratings = j["quality_ratings"].get<std::map<std::string, std::vector<int>>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("task '" + t.task_id + "': " + e.what());
    }
    t.validate();
    return t;
}

ojson to_json(const EvaluationTask& task) {
    ojson j;
    j["task_id"] = task.task_id;
    j["domain"] = task.domain;
    j["query_text"] = task.query_text;
    ojson responses = ojson::object();
    for (const auto& [agent, text] : task.responses) responses[agent] = text;
    j["responses"] = std::move(responses);
    j["human_votes"] = task.human_votes;
    if (task.quality_ratings) j["quality_ratings"] = *task.quality_ratings;
    return j;
}

std::vector<EvaluationTask> parse_dataset(std::istream& in, const std::string& source) {
    std::vector<EvaluationTask> tasks;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = source + ":" + std::to_string(line_no) + ": ";
        ojson j;
        try {
            j = ojson::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(where + e.what());
        }
        try {
            auto task = task_from_json(j);
            if (!ids.insert(task.task_id).second) invalid(task.task_id, "task_id", "duplicate");
            tasks.push_back(std::move(task));
        } catch (const Error& e) {
            throw ValidationError(where + e.what());
        }
    }
    if (tasks.empty()) throw ParseError(source + ": dataset has no tasks");
    return tasks;
}

std::vector<EvaluationTask> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read " + path.string());
    return parse_dataset(in, path.string());
}

VoteOutcome majority_vote_detail(const std::vector<std::string>& votes) {
    if (votes.empty()) throw ValidationError("majority vote needs at least one vote");
    std::map<std::string, std::size_t> counts;
    for (const auto& v : votes) ++counts[v];
    VoteOutcome out;
    std::size_t best = 0;
    // std::map iterates ids in lexicographic order, so the first maximum wins ties.
    for (const auto& [id, n] : counts) {
        if (n > best) {
            best = n;
            out.winner = id;
            out.tied = false;
        } else if (n == best) {
            out.tied = true;
        }
    }
    return out;
}

std::string majority_vote(const std::vector<std::string>& votes) { return majority_vote_detail(votes).winner; }

RankingPolicy parse_policy(const std::string& spec) {
    if (spec == "human_gold") return HumanGoldPolicy{};
    const auto colon = spec.find(':');
    if (colon != std::string::npos && colon + 1 < spec.size()) {
        const auto kind = spec.substr(0, colon);
        const auto arg = spec.substr(colon + 1);
        if (kind == "fixed") return FixedAgentPolicy{arg};
        if (kind == "ofa") return OneForAllPolicy{arg};
    }
    throw ParseError("unknown policy '" + spec + "' (expected human_gold, fixed:<agent> or ofa:<backend>)");
}

std::string policy_name(const RankingPolicy& policy) {
    if (const auto* p = std::get_if<OneForAllPolicy>(&policy)) return "ofa:" + p->backend_id;
    if (const auto* p = std::get_if<FixedAgentPolicy>(&policy)) return "fixed:" + p->agent_id;
    return "human_gold";
}

std::string apply_policy(const EvaluationTask& task, const RankingPolicy& policy, const EvalContext& ctx) {
    if (const auto* fixed = std::get_if<FixedAgentPolicy>(&policy)) {
        if (!task.response_of(fixed->agent_id)) {
            throw NotFound("task '" + task.task_id + "' has no response from '" + fixed->agent_id + "'");
        }
        return fixed->agent_id;
    }
    if (std::holds_alternative<HumanGoldPolicy>(policy)) return majority_vote(task.human_votes);

    const auto& ofa = std::get<OneForAllPolicy>(policy);
    const auto it = ctx.backends.find(ofa.backend_id);
    if (it == ctx.backends.end() || !it->second) throw NotFound("no embedding backend '" + ofa.backend_id + "'");

    RankingInput input;
    input.query = task.query_text;
    for (const auto& [agent, text] : task.responses) {
        // A stored empty answer cannot be an ok response.
        input.candidates.push_back({agent, text, text.empty() ? ResponseStatus::error : ResponseStatus::ok});
    }
    if (!ctx.agent_order.empty()) {
        input.ensemble_order = ctx.agent_order;
    } else {
        for (const auto& [agent, _] : task.responses) input.ensemble_order.push_back(agent);
    }
    const auto ranked = rank(input, *it->second, ctx.patterns, ctx.prefilter);
    return select_best(ranked).agent_id;
}

AccuracyResult selection_accuracy(const std::vector<EvaluationTask>& tasks, const RankingPolicy& policy,
                                  const EvalContext& ctx) {
    if (tasks.empty()) throw ValidationError("selection accuracy needs at least one task");
    AccuracyResult out;
    for (const auto& task : tasks) {
        const auto gold = majority_vote_detail(task.human_votes);
        if (gold.tied) ++out.vote_ties;
        const auto chosen = select(task, policy, ctx);
        if (!chosen.agent) ++out.unrankable;
        const bool hit = chosen.agent && *chosen.agent == gold.winner;
        auto& dom = out.per_domain[task.domain];
        ++dom.total;
        ++out.overall.total;
        if (hit) {
            ++dom.hits;
            ++out.overall.hits;
        }
    }
    return out;
}

QualityResult quality_distribution(const std::vector<EvaluationTask>& tasks, const RankingPolicy& policy,
                                   const EvalContext& ctx, QualityAggregation aggregation) {
    QualityResult out;
    auto add = [&](int rating) {
        ++out.histogram[static_cast<std::size_t>(rating - 1)];
        ++out.acceptable_or_better.total;
        if (rating >= 3) ++out.acceptable_or_better.hits;
    };
    for (const auto& task : tasks) {
        if (!task.quality_ratings) continue;
        const auto chosen = select(task, policy, ctx);
        if (!chosen.agent) continue;
        const auto it = task.quality_ratings->find(*chosen.agent);
        if (it == task.quality_ratings->end() || it->second.empty()) {
            throw ValidationError("task '" + task.task_id + "' has no quality ratings for selected agent '" +
                                  *chosen.agent + "'");
        }
        ++out.tasks_rated;
        if (aggregation == QualityAggregation::per_rating) {
            for (int r : it->second) add(r);
        } else {
            auto sorted = it->second;
            std::sort(sorted.begin(), sorted.end());
            add(sorted[(sorted.size() - 1) / 2]);
        }
    }
    return out;
}

Fraction undesirable_rate(const std::vector<EvaluationTask>& tasks, const RankingPolicy& policy,
                          const EvalContext& ctx) {
    if (tasks.empty()) throw ValidationError("undesirable rate needs at least one task");
    Fraction out;
    for (const auto& task : tasks) {
        ++out.total;
        const auto chosen = select(task, policy, ctx);
        if (!chosen.agent) continue;
        const auto* text = task.response_of(*chosen.agent);
        if (text && is_undesirable(*text, *chosen.agent, ctx.patterns)) ++out.hits;
    }
    return out;
}

MetricsReport evaluate(const std::vector<EvaluationTask>& tasks, const std::vector<RankingPolicy>& policies,
                       const EvalContext& ctx, QualityAggregation aggregation) {
    MetricsReport report;
    report.task_count = tasks.size();
    report.prefilter = ctx.prefilter;
    for (const auto& t : tasks) {
        if (std::find(report.domains.begin(), report.domains.end(), t.domain) == report.domains.end()) {
            report.domains.push_back(t.domain);
        }
        if (majority_vote_detail(t.human_votes).tied) ++report.vote_ties;
    }
    const bool any_ratings =
        std::any_of(tasks.begin(), tasks.end(), [](const EvaluationTask& t) { return t.quality_ratings.has_value(); });
    for (const auto& policy : policies) {
        PolicyReport pr;
        pr.policy = policy_name(policy);
        pr.accuracy = selection_accuracy(tasks, policy, ctx);
        if (any_ratings) pr.quality = quality_distribution(tasks, policy, ctx, aggregation);
        pr.undesirable = undesirable_rate(tasks, policy, ctx);
        report.policies.push_back(std::move(pr));
    }
    return report;
}

ojson to_json(const MetricsReport& report) {
    ojson j;
    j["task_count"] = report.task_count;
    j["vote_ties"] = report.vote_ties;
    j["prefilter"] = report.prefilter;
    j["domains"] = report.domains;
    ojson policies = ojson::array();
    for (const auto& p : report.policies) {
        ojson pj;
        pj["policy"] = p.policy;
        pj["overall_accuracy"] = fraction_json(p.accuracy.overall);
        ojson per_domain = ojson::object();
        for (const auto& d : report.domains) {
            const auto it = p.accuracy.per_domain.find(d);
            if (it != p.accuracy.per_domain.end()) per_domain[d] = fraction_json(it->second);
        }
        pj["per_domain_accuracy"] = std::move(per_domain);
        pj["unrankable"] = p.accuracy.unrankable;
        pj["undesirable_rate"] = fraction_json(p.undesirable);
        if (p.quality) {
            ojson hist = ojson::object();
            for (std::size_t i = 0; i < 5; ++i) hist[std::to_string(i + 1)] = p.quality->histogram[i];
            pj["quality_histogram"] = std::move(hist);
            pj["acceptable_or_better"] = fraction_json(p.quality->acceptable_or_better);
        } else {
            pj["quality_histogram"] = nullptr;
            pj["acceptable_or_better"] = nullptr;
        }
        policies.push_back(std::move(pj));
    }
    j["policies"] = std::move(policies);
    return j;
}

std::string to_table(const MetricsReport& report) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"Task Domains"};
    for (const auto& p : report.policies) header.push_back(p.policy);
    rows.push_back(header);

    std::vector<std::string> all{"All"};
    for (const auto& p : report.policies) all.push_back(percent(p.accuracy.overall));
    rows.push_back(all);
    for (const auto& d : report.domains) {
        std::vector<std::string> row{d};
        for (const auto& p : report.policies) {
            const auto it = p.accuracy.per_domain.find(d);
            row.push_back(it == p.accuracy.per_domain.end() ? "-" : percent(it->second));
        }
        rows.push_back(row);
    }
    const std::size_t separator = rows.size();
    std::vector<std::string> undesirable{"Non-desirable"};
    std::vector<std::string> acceptable{"Acceptable+"};
    for (const auto& p : report.policies) {
        undesirable.push_back(percent(p.undesirable));
        acceptable.push_back(p.quality ? percent(p.quality->acceptable_or_better) : "-");
    }
    rows.push_back(undesirable);
    rows.push_back(acceptable);

    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream os;
    auto rule = [&] {
        std::size_t total = 0;
        for (auto w : width) total += w + 2;
        os << std::string(total > 2 ? total - 2 : total, '-') << '\n';
    };
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (r == 1 || r == separator) rule();
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            const auto& cell = rows[r][c];
            if (c == 0) {
                os << cell << std::string(width[c] - cell.size(), ' ');
            } else {
                os << "  " << std::string(width[c] - cell.size(), ' ') << cell;
            }
        }
        os << '\n';
    }
    os << report.task_count << " tasks, " << report.vote_ties << " tied votes, prefilter "
       << (report.prefilter ? "on" : "off") << '\n';
    return os.str();
}

}  // namespace ofa::eval
