#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "ofa/errors.hpp"
#include "ofa/evaluation.hpp"
#include "ofa/ranking.hpp"

namespace py = pybind11;
using namespace ofa;

namespace {

RankingInput make_input(const std::string& query, const std::vector<py::tuple>& candidates,
                        const std::vector<std::string>& ensemble_order) {
    RankingInput in;
    in.query = query;
    in.ensemble_order = ensemble_order;
    for (const auto& c : candidates) {
        if (c.size() != 2 && c.size() != 3) throw ValidationError("candidate must be (agent_id, text[, status])");
        CandidateResponse r{c[0].cast<std::string>(), c[1].cast<std::string>(), ResponseStatus::ok};
        if (c.size() == 3) r.status = parse_response_status(c[2].cast<std::string>());
        in.candidates.push_back(std::move(r));
    }
    return in;
}

std::string evaluate_json(const std::vector<eval::EvaluationTask>& tasks, const std::vector<std::string>& policies,
                          const std::map<std::string, std::shared_ptr<EmbeddingBackend>>& backends,
                          const UndesirablePatternSet& patterns, bool prefilter, const std::string& quality) {
    eval::EvalContext ctx;
    for (const auto& [id, b] : backends) ctx.backends.emplace(id, b);
    ctx.patterns = patterns;
    ctx.prefilter = prefilter;
    std::vector<eval::RankingPolicy> parsed;
    for (const auto& p : policies) parsed.push_back(eval::parse_policy(p));
    const auto aggregation =
        quality == "median" ? eval::QualityAggregation::per_task_median : eval::QualityAggregation::per_rating;
    py::gil_scoped_release release;
    return eval::to_json(eval::evaluate(tasks, parsed, ctx, aggregation)).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Response ranking and evaluation for multi-agent conversational systems";

    auto base = py::register_exception<Error>(m, "OfaError", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<DimensionMismatch>(m, "DimensionMismatch", base.ptr());
    py::register_exception<NoResolvableTokens>(m, "NoResolvableTokens", base.ptr());
    py::register_exception<NotFound>(m, "NotFound", base.ptr());
    py::register_exception<TransportError>(m, "TransportError", base.ptr());
    py::register_exception<ProtocolError>(m, "ProtocolError", base.ptr());

    m.def("tokenize", &tokenize, py::arg("text"));
    m.def("sif_weight", &sif_weight, py::arg("a"), py::arg("p"));

    py::class_<WordVectorTable>(m, "WordVectorTable")
        .def(py::init<std::size_t, std::unordered_map<std::string, std::vector<double>>>(), py::arg("dimension"),
             py::arg("entries"))
        .def_property_readonly("dimension", &WordVectorTable::dimension)
        .def("__len__", &WordVectorTable::size)
        .def("scaled", &WordVectorTable::scaled, py::arg("factor"));
    m.def("load_word_vectors", &load_word_vectors, py::arg("path"));

    py::class_<FrequencyTable>(m, "FrequencyTable")
        .def(py::init<std::unordered_map<std::string, double>, double>(), py::arg("entries"),
             py::arg("default_frequency"))
        .def_static("from_counts", &FrequencyTable::from_counts, py::arg("counts"))
        .def("find", &FrequencyTable::find, py::arg("token"))
        .def_property_readonly("default_frequency", &FrequencyTable::default_frequency);
    m.def("load_frequencies", &load_frequencies, py::arg("path"));

    py::enum_<OovPolicy>(m, "OovPolicy")
        .value("skip_token", OovPolicy::skip_token)
        .value("use_default_frequency", OovPolicy::use_default_frequency);

    py::class_<SifConfig>(m, "SifConfig")
        .def(py::init<>())
        .def_readwrite("smoothing_a", &SifConfig::smoothing_a)
        .def_readwrite("remove_common_component", &SifConfig::remove_common_component)
        .def_readwrite("oov_policy", &SifConfig::oov_policy);

    m.def(
        "embed_sif",
        [](const std::string& text, const WordVectorTable& v, const FrequencyTable& f, const SifConfig& c) {
            return embed_sif(text, v, f, c).values;
        },
        py::arg("text"), py::arg("vectors"), py::arg("frequencies"), py::arg("config") = SifConfig{});
    m.def(
        "euclidean_distance",
        [](const std::vector<double>& x, const std::vector<double>& y) {
            return euclidean_distance(SentenceEmbedding{x, ""}, SentenceEmbedding{y, ""});
        },
        py::arg("x"), py::arg("y"));

    py::class_<EmbeddingBackend, std::shared_ptr<EmbeddingBackend>>(m, "EmbeddingBackend")
        .def_property_readonly("id", &EmbeddingBackend::id)
        .def(
            "embed",
            [](const EmbeddingBackend& b, const std::vector<std::string>& texts) {
                std::vector<std::optional<std::vector<double>>> out;
                for (auto& e : b.embed_batch(texts)) {
                    out.push_back(e ? std::optional(std::move(e->values)) : std::nullopt);
                }
                return out;
            },
            py::arg("texts"));
    py::class_<SifBackend, EmbeddingBackend, std::shared_ptr<SifBackend>>(m, "SifBackend")
        .def(py::init<WordVectorTable, FrequencyTable, SifConfig>(), py::arg("vectors"), py::arg("frequencies"),
             py::arg("config") = SifConfig{});
    py::class_<RemoteEmbeddingBackend, EmbeddingBackend, std::shared_ptr<RemoteEmbeddingBackend>>(
        m, "RemoteEmbeddingBackend")
        .def(py::init([](const std::string& url, int timeout_ms, const std::string& id) {
                 return std::make_shared<RemoteEmbeddingBackend>(
                     RemoteBackendEndpoint{url, std::chrono::milliseconds(timeout_ms)}, id);
             }),
             py::arg("url"), py::arg("timeout_ms") = 5000, py::arg("id") = "remote");

    py::class_<UndesirablePatternSet>(m, "UndesirablePatternSet")
        .def(py::init<>())
        .def_static("defaults", &UndesirablePatternSet::defaults)
        .def_readwrite("global_patterns", &UndesirablePatternSet::global_patterns)
        .def_readwrite("per_agent_patterns", &UndesirablePatternSet::per_agent_patterns);
    m.def("load_patterns", &load_patterns, py::arg("path"));
    m.def("is_undesirable", &is_undesirable, py::arg("text"), py::arg("agent_id"), py::arg("patterns"));

    py::class_<RankedEntry>(m, "RankedEntry")
        .def_property_readonly("agent_id", [](const RankedEntry& e) { return e.candidate.agent_id; })
        .def_property_readonly("text", [](const RankedEntry& e) { return e.candidate.text; })
        .def_readonly("distance", &RankedEntry::distance)
        .def_readonly("rank", &RankedEntry::rank);
    py::class_<RankedCandidates>(m, "RankedCandidates")
        .def_readonly("entries", &RankedCandidates::entries)
        .def_readonly("degraded", &RankedCandidates::degraded)
        .def_property_readonly("filtered_out", [](const RankedCandidates& r) {
            std::vector<std::pair<std::string, std::string>> out;
            for (const auto& d : r.filtered_out) out.emplace_back(d.candidate.agent_id, to_string(d.reason));
            return out;
        });

    m.def(
        "prefilter",
        [](const std::string& query, const std::vector<py::tuple>& candidates, const UndesirablePatternSet& patterns) {
            const auto result = prefilter(make_input(query, candidates, {}), patterns);
            std::vector<std::string> kept;
            for (const auto& c : result.kept) kept.push_back(c.agent_id);
            return py::make_tuple(kept, result.degraded);
        },
        py::arg("query"), py::arg("candidates"), py::arg("patterns") = UndesirablePatternSet::defaults());
    m.def(
        "rank",
        [](const std::string& query, const std::vector<py::tuple>& candidates, const EmbeddingBackend& backend,
           const UndesirablePatternSet& patterns, bool prefilter, const std::vector<std::string>& ensemble_order) {
            const auto input = make_input(query, candidates, ensemble_order);
            py::gil_scoped_release release;
            return rank(input, backend, patterns, prefilter);
        },
        py::arg("query"), py::arg("candidates"), py::arg("backend"),
        py::arg("patterns") = UndesirablePatternSet::defaults(), py::arg("prefilter") = true,
        py::arg("ensemble_order") = std::vector<std::string>{});

    py::class_<eval::EvaluationTask>(m, "EvaluationTask")
        .def_readonly("task_id", &eval::EvaluationTask::task_id)
        .def_readonly("domain", &eval::EvaluationTask::domain)
        .def_readonly("query_text", &eval::EvaluationTask::query_text)
        .def_readonly("responses", &eval::EvaluationTask::responses)
        .def_readonly("human_votes", &eval::EvaluationTask::human_votes)
        .def_readonly("quality_ratings", &eval::EvaluationTask::quality_ratings);
    m.def("load_dataset", &eval::load_dataset, py::arg("path"));
    m.def("majority_vote", &eval::majority_vote, py::arg("votes"));
    m.def("_evaluate_json", &evaluate_json, py::arg("tasks"), py::arg("policies"), py::arg("backends"),
          py::arg("patterns"), py::arg("prefilter"), py::arg("quality"));
}
