// ofa: command-line entry point for the multi-agent gateway.
//
//   ofa serve --config gateway.json
//   ofa evaluate --dataset tasks.jsonl --policy human_gold --policy ofa:sif ...
//   ofa rank --query "..." --candidate alexa="..." --candidate adasa="..." ...

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <iostream>
#include <memory>

#include "ofa/embedding.hpp"
#include "ofa/errors.hpp"
#include "ofa/evaluation.hpp"
#include "ofa/ranking.hpp"
#include "ofa/service.hpp"

namespace {

struct BackendOptions {
    std::string config;
    std::string word_vectors;
    std::string frequencies;
    std::string patterns;
    std::string embed_url;
    std::string embed_id = "remote";
    double smoothing_a = ofa::SifConfig{}.smoothing_a;
    bool remove_pc = false;
    std::string oov_policy = "skip_token";

    void add_to(CLI::App* app) {
        app->add_option("--config", config, "Service config to take backend and pattern paths from");
        app->add_option("--word-vectors", word_vectors, "Word vector file (token c1 ... cd)");
        app->add_option("--frequencies", frequencies, "Word frequency file (token count)");
        app->add_option("--patterns", patterns, "Refusal pattern JSON");
        app->add_option("--embed-url", embed_url, "Remote embedding backend base URL");
        app->add_option("--embed-id", embed_id, "Backend id of the remote embedding backend");
        app->add_option("--smoothing-a", smoothing_a, "SIF smoothing parameter a");
        app->add_flag("--remove-pc", remove_pc, "Remove the batch's first principal component");
        app->add_option("--oov-policy", oov_policy, "skip_token | use_default_frequency")
            ->check(CLI::IsMember({"skip_token", "use_default_frequency"}));
    }

    ofa::SifConfig sif() const {
        ofa::SifConfig c;
        c.smoothing_a = smoothing_a;
        c.remove_common_component = remove_pc;
        c.oov_policy = ofa::parse_oov_policy(oov_policy);
        return c;
    }

    // Explicit flags win over the config file.
    void merge_config() {
        if (config.empty()) return;
        const auto cfg = ofa::load_service_config(config);
        if (word_vectors.empty() && cfg.word_vectors_path) word_vectors = cfg.word_vectors_path->string();
        if (frequencies.empty() && cfg.frequencies_path) frequencies = cfg.frequencies_path->string();
        if (patterns.empty() && cfg.refusal_patterns_path) patterns = cfg.refusal_patterns_path->string();
        if (embed_url.empty() && cfg.embedding_backend_url) {
            embed_url = *cfg.embedding_backend_url;
            embed_id = cfg.embedding_backend_id;
        }
    }

    std::shared_ptr<const ofa::EmbeddingBackend> sif_backend() const {
        if (word_vectors.empty() || frequencies.empty()) return nullptr;
        return std::make_shared<ofa::SifBackend>(ofa::load_word_vectors(word_vectors),
                                                 ofa::load_frequencies(frequencies), sif());
    }

    std::shared_ptr<const ofa::EmbeddingBackend> remote_backend() const {
        if (embed_url.empty()) return nullptr;
        return std::make_shared<ofa::RemoteEmbeddingBackend>(ofa::RemoteBackendEndpoint{embed_url}, embed_id);
    }

    ofa::UndesirablePatternSet pattern_set() const {
        return patterns.empty() ? ofa::UndesirablePatternSet::defaults() : ofa::load_patterns(patterns);
    }
};

ofa::Service* g_service = nullptr;

void on_signal(int) {
    if (g_service) g_service->stop();
}

int run_serve(const std::string& config_path) {
    const auto config = ofa::load_service_config(config_path);
    ofa::Service service(ofa::make_orchestrator(config), config.base_dir);
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "ofa: listening on " << config.listen_host << ":" << config.listen_port << "\n";
    service.run(config.listen_host, config.listen_port);
    g_service = nullptr;
    return 0;
}

int run_evaluate(const std::string& dataset, const std::vector<std::string>& policy_specs,
                 const std::string& prefilter, const std::string& format, const std::string& quality,
                 BackendOptions backend) {
    backend.merge_config();
    const auto tasks = ofa::eval::load_dataset(dataset);

    ofa::eval::EvalContext ctx;
    ctx.patterns = backend.pattern_set();
    ctx.prefilter = prefilter == "on";

    std::vector<ofa::eval::RankingPolicy> policies;
    for (const auto& spec : policy_specs) {
        auto policy = ofa::eval::parse_policy(spec);
        if (const auto* ofa_policy = std::get_if<ofa::eval::OneForAllPolicy>(&policy)) {
            const auto& id = ofa_policy->backend_id;
            if (!ctx.backends.contains(id)) {
                auto b = id == "sif" ? backend.sif_backend() : backend.remote_backend();
                if (!b) {
                    throw ofa::ConfigError("policy " + spec + " needs " +
                                           (id == "sif" ? "--word-vectors and --frequencies" : "--embed-url"));
                }
                ctx.backends.emplace(id, std::move(b));
            }
        } else if (const auto* fixed = std::get_if<ofa::eval::FixedAgentPolicy>(&policy)) {
            for (const auto& t : tasks) {
                if (!t.response_of(fixed->agent_id)) {
                    throw ofa::ValidationError("policy " + spec + ": task '" + t.task_id + "' has no response from '" +
                                               fixed->agent_id + "'");
                }
            }
        }
        policies.push_back(std::move(policy));
    }

    const auto aggregation = quality == "median" ? ofa::eval::QualityAggregation::per_task_median
                                                 : ofa::eval::QualityAggregation::per_rating;
    const auto report = ofa::eval::evaluate(tasks, policies, ctx, aggregation);
    if (format == "json") {
        std::cout << ofa::eval::to_json(report).dump(2) << "\n";
    } else {
        std::cout << ofa::eval::to_table(report);
    }
    return 0;
}

int run_rank(const std::string& query, const std::vector<std::string>& candidates, bool prefilter,
             BackendOptions backend) {
    backend.merge_config();
    auto b = backend.remote_backend();
    if (!b) b = backend.sif_backend();
    if (!b) throw ofa::ConfigError("rank needs --word-vectors and --frequencies, or --embed-url");

    ofa::RankingInput input;
    input.query = query;
    for (const auto& c : candidates) {
        const auto eq = c.find('=');
        if (eq == std::string::npos || eq == 0) throw ofa::ParseError("candidate must be agent=text: " + c);
        input.candidates.push_back({c.substr(0, eq), c.substr(eq + 1), ofa::ResponseStatus::ok});
    }
    const auto ranked = ofa::rank(input, *b, backend.pattern_set(), prefilter);

    nlohmann::json out;
    out["selected_agent"] = ofa::select_best(ranked).agent_id;
    out["degraded"] = ranked.degraded;
    for (const auto& e : ranked.entries) {
        out["ranking"].push_back({{"rank", e.rank},
                                  {"agent_id", e.candidate.agent_id},
                                  {"distance", std::isfinite(e.distance) ? nlohmann::json(e.distance) : nlohmann::json(nullptr)},
                                  {"text", e.candidate.text}});
    }
    out["filtered_out"] = nlohmann::json::array();
    for (const auto& d : ranked.filtered_out) {
        out["filtered_out"].push_back({{"agent_id", d.candidate.agent_id}, {"reason", std::string(to_string(d.reason))}});
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-agent conversational gateway"};
    app.require_subcommand(1);

    std::string config_path;
    auto* serve = app.add_subcommand("serve", "Run the HTTP gateway");
    serve->add_option("--config", config_path, "Service config JSON")->required();

    std::string dataset;
    std::vector<std::string> policies;
    std::string prefilter = "on";
    std::string format = "table";
    std::string quality = "rating";
    BackendOptions eval_backend;
    auto* evaluate = app.add_subcommand("evaluate", "Score selection policies against a gold-standard dataset");
    evaluate->add_option("--dataset", dataset, "JSON-Lines dataset")->required();
    evaluate->add_option("--policy", policies, "human_gold | fixed:<agent> | ofa:<backend> (repeatable)")->required();
    evaluate->add_option("--prefilter", prefilter, "Drop refusals before ranking")
        ->check(CLI::IsMember({"on", "off"}));
    evaluate->add_option("--format", format, "Report format")->check(CLI::IsMember({"table", "json"}));
    evaluate->add_option("--quality", quality, "Quality aggregation: rating | median")
        ->check(CLI::IsMember({"rating", "median"}));
    eval_backend.add_to(evaluate);

    std::string query;
    std::vector<std::string> candidates;
    std::string rank_prefilter = "on";
    BackendOptions rank_backend;
    auto* rank = app.add_subcommand("rank", "Rank candidate responses for one query");
    rank->add_option("--query", query, "User query")->required();
    rank->add_option("--candidate", candidates, "agent=response text (repeatable)")->required();
    rank->add_option("--prefilter", rank_prefilter, "Drop refusals before ranking")
        ->check(CLI::IsMember({"on", "off"}));
    rank_backend.add_to(rank);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve) return run_serve(config_path);
        if (*evaluate) return run_evaluate(dataset, policies, prefilter, format, quality, eval_backend);
        if (*rank) return run_rank(query, candidates, rank_prefilter == "on", rank_backend);
    } catch (const ofa::Error& e) {
        std::cerr << "ofa: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "ofa: unexpected failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
