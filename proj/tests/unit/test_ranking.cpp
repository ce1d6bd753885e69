#include <doctest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "ofa/errors.hpp"
#include "ofa/ranking.hpp"
#include "ranking_oracle.hpp"
#include "test_support.hpp"

using namespace ofa;
using namespace ofa::testing;

namespace {

const UndesirablePatternSet kDefaults = UndesirablePatternSet::defaults();

RankingInput lka_input() {
    RankingInput in;
    in.query = kLkaQuery;
    for (const auto& [agent, text] : kLkaResponses) {
        in.candidates.push_back({agent, text, ResponseStatus::ok});
        in.ensemble_order.push_back(agent);
    }
    return in;
}

SifBackend shipped_sif() {
    return SifBackend(load_word_vectors(data_dir() / "vectors.txt"), load_frequencies(data_dir() / "frequencies.txt"));
}

}  // namespace

TEST_CASE("is_undesirable") {
    CHECK(is_undesirable("I'm not sure", "alexa", kDefaults));
    CHECK(is_undesirable("Didn't get that", "houndify", kDefaults));
    CHECK_FALSE(is_undesirable("The weather outside is delightful.", "alexa", kDefaults));
    CHECK(is_undesirable("SORRY I'M NOT SURE HOW TO HELP", "google", kDefaults));
    CHECK(is_undesirable("Hmm, I\xE2\x80\x99m not sure.", "alexa", kDefaults));

    UndesirablePatternSet set;
    set.per_agent_patterns["google"] = {"here are some results"};
    CHECK(is_undesirable("Here are some results about LKA", "google", set));
    CHECK_FALSE(is_undesirable("Here are some results about LKA", "alexa", set));
}

TEST_CASE("pattern config round-trips and rejects empty patterns") {
    const auto j = nlohmann::json::parse(R"({"global": ["nope"], "per_agent": {"alexa": ["meh"]}})");
    const auto set = patterns_from_json(j);
    CHECK(set.global_patterns == std::vector<std::string>{"nope"});
    CHECK(to_json(set) == j);
    CHECK_THROWS_AS(patterns_from_json(nlohmann::json::parse(R"({"global": [""]})")), ValidationError);
    CHECK_THROWS_AS(patterns_from_json(nlohmann::json::parse(R"([1])")), ParseError);
    CHECK_NOTHROW(load_patterns(data_dir() / "patterns.json"));
}

TEST_CASE("prefilter keeps only Adasa in the LKA dialogue") {
    const auto result = prefilter(lka_input(), kDefaults);
    REQUIRE(result.kept.size() == 1);
    CHECK(result.kept[0].agent_id == "adasa");
    CHECK(result.dropped.size() == 3);
    CHECK_FALSE(result.degraded);
    for (const auto& d : result.dropped) CHECK(d.reason == DropReason::refusal);
}

TEST_CASE("prefilter keeps every refusal when all candidates refuse") {
    auto in = lka_input();
    in.candidates[3].text = "I'm not sure";
    const auto result = prefilter(in, kDefaults);
    CHECK(result.kept.size() == 4);
    CHECK(result.degraded);
}

TEST_CASE("prefilter always drops non-ok responses") {
    auto in = lka_input();
    in.candidates[0] = {"alexa", "", ResponseStatus::timeout};
    in.candidates[1] = {"google", "boom", ResponseStatus::error};
    const auto result = prefilter(in, kDefaults);
    REQUIRE(result.dropped.size() == 3);
    CHECK(result.dropped[0].reason == DropReason::status);
    CHECK(result.dropped[1].reason == DropReason::status);
    CHECK(result.dropped[2].reason == DropReason::refusal);

    RankingInput dead;
    dead.candidates = {{"a", "", ResponseStatus::timeout}};
    const auto none = prefilter(dead, kDefaults);
    CHECK(none.kept.empty());
}

TEST_CASE("weather response ranks above the refusal") {
    const auto backend = shipped_sif();
    RankingInput in;
    in.query = "What is the weather outside?";
    in.candidates = {{"a", "Sorry, I don't know how to help with that.", ResponseStatus::ok},
                     {"b", "The weather outside is delightful.", ResponseStatus::ok}};
    for (bool pre : {true, false}) {
        const auto ranked = rank(in, backend, kDefaults, pre);
        REQUIRE(ranked.entries.size() == 2);
        CHECK(ranked.entries[0].candidate.agent_id == "b");
        CHECK(ranked.entries[0].rank == 1);
        CHECK(ranked.entries[1].rank == 2);
        CHECK(ranked.entries[0].distance < ranked.entries[1].distance);
    }
}

TEST_CASE("weather response ranks first with a hand-built vocabulary") {
    const WordVectorTable vectors(3, {{"weather", {1.0, 0.0, 0.0}},
                                      {"outside", {0.8, 0.2, 0.0}},
                                      {"delightful", {0.7, 0.1, 0.1}},
                                      {"sorry", {0.0, 0.0, 1.0}},
                                      {"know", {0.0, 0.2, 0.9}},
                                      {"help", {0.0, 0.3, 0.8}}});
    const FrequencyTable freqs({{"weather", 1e-4}, {"outside", 1e-4}, {"delightful", 1e-5}, {"sorry", 1e-4},
                                {"know", 1e-3}, {"help", 1e-3}},
                               1e-3);
    const SifBackend backend(vectors, freqs);
    RankingInput in;
    in.query = "What is the weather outside?";
    in.candidates = {{"a", "Sorry, I don't know how to help with that.", ResponseStatus::ok},
                     {"b", "The weather outside is delightful.", ResponseStatus::ok}};
    CHECK(select_best(rank(in, backend, kDefaults, false)).agent_id == "b");
}

TEST_CASE("a single candidate ranks first whatever its distance") {
    const FixtureBackend backend({{"q", {0.0, 0.0}}, {"far", {100.0, 100.0}}});
    RankingInput in{"q", {{"x", "far", ResponseStatus::ok}}, {}};
    const auto ranked = rank(in, backend, kDefaults);
    REQUIRE(ranked.entries.size() == 1);
    CHECK(ranked.entries[0].rank == 1);
    CHECK(select_best(ranked).agent_id == "x");
}

TEST_CASE("unembeddable candidates rank last") {
    const FixtureBackend backend({{"q", {0.0}}, {"far", {50.0}}});
    RankingInput in{"q", {{"x", "gibberish", ResponseStatus::ok}, {"y", "far", ResponseStatus::ok}}, {}};
    const auto ranked = rank(in, backend, kDefaults);
    CHECK(ranked.entries[0].candidate.agent_id == "y");
    CHECK(std::isinf(ranked.entries[1].distance));
}

TEST_CASE("rank errors") {
    const FixtureBackend backend({{"a", {0.0}}});
    RankingInput unembeddable_query{"zzz", {{"x", "a", ResponseStatus::ok}}, {}};
    CHECK_THROWS_AS(rank(unembeddable_query, backend, kDefaults), NoResolvableTokens);
    RankingInput nothing_left{"a", {{"x", "", ResponseStatus::timeout}}, {}};
    CHECK_THROWS_AS(rank(nothing_left, backend, kDefaults), ValidationError);
}

TEST_CASE("ranking matches the brute-force oracle on a 6-word vocabulary") {
    const ToyVocab vocab = [] {
        ToyVocab v;
        v.dim = 2;
        v.words = {"rain", "sun", "wind", "car", "lane", "song"};
        const std::vector<std::vector<double>> vecs{{1, 0}, {0.9, 0.3}, {0.7, -0.2}, {-1, 0.1}, {-0.8, 0.5}, {0, -1}};
        const std::vector<double> freqs{0.01, 0.02, 0.005, 0.03, 0.001, 0.04};
        for (std::size_t i = 0; i < 6; ++i) {
            v.vectors[v.words[i]] = vecs[i];
            v.freqs[v.words[i]] = freqs[i];
        }
        return v;
    }();
    const auto backend = sif_backend_for(vocab);
    const std::vector<OracleCandidate> cands{{"a", "car lane"}, {"b", "rain wind sun"}, {"c", "song rain"}};
    const std::vector<std::string> order{"a", "b", "c"};
    for (const std::string q : {"rain", "lane car", "song", "wind sun car"}) {
        RankingInput in{q, {}, order};
        for (const auto& c : cands) in.candidates.push_back({c.agent, c.text, ResponseStatus::ok});
        const auto ranked = rank(in, backend, kDefaults);
        const auto qv = *oracle_embed(q, vocab);
        std::vector<std::pair<double, std::string>> want;
        for (const auto& c : cands) want.emplace_back(oracle_distance(qv, *oracle_embed(c.text, vocab)), c.agent);
        std::sort(want.begin(), want.end());
        REQUIRE(ranked.entries.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(ranked.entries[i].candidate.agent_id == want[i].second);
            CHECK(ranked.entries[i].distance == doctest::Approx(want[i].first).epsilon(1e-12));
        }
    }
}

TEST_CASE("select_best") {
    const FixtureBackend backend({{"q", {0.0}}, {"r1", {0.2}}, {"r2", {0.9}}, {"r3", {1.4}}});
    RankingInput in{"q",
                    {{"a", "r1", ResponseStatus::ok}, {"b", "r2", ResponseStatus::ok}, {"c", "r3", ResponseStatus::ok}},
                    {"c", "b", "a"}};
    CHECK(select_best(rank(in, backend, kDefaults)).agent_id == "a");

    const FixtureBackend tied({{"q", {0.0}}, {"left", {-1.0}}, {"right", {1.0}}});
    RankingInput tie{"q", {{"x", "left", ResponseStatus::ok}, {"y", "right", ResponseStatus::ok}}, {"y", "x"}};
    CHECK(select_best(rank(tie, tied, kDefaults)).agent_id == "y");
    tie.ensemble_order = {"x", "y"};
    CHECK(select_best(rank(tie, tied, kDefaults)).agent_id == "x");

    CHECK_THROWS_AS(select_best(RankedCandidates{}), ValidationError);
}

TEST_CASE("ranking properties on random toy inputs") {
    std::mt19937_64 gen(99);
    const std::vector<std::string> refusals = kDefaults.global_patterns;
    for (int trial = 0; trial < 200; ++trial) {
        const auto vocab = make_toy_vocab(gen, 4 + trial % 16, 1 + trial % 8);
        const auto backend = sif_backend_for(vocab);
        std::uniform_int_distribution<int> n_cands(1, 5);
        std::bernoulli_distribution refuse(0.3);
        RankingInput in;
        in.query = random_sentence(gen, vocab);
        const int n = n_cands(gen);
        for (int i = 0; i < n; ++i) {
            const std::string agent = "agent" + std::to_string(i);
            in.ensemble_order.push_back(agent);
            in.candidates.push_back(
                {agent, refuse(gen) ? "I'm not sure " + random_sentence(gen, vocab) : random_sentence(gen, vocab),
                 ResponseStatus::ok});
        }
        const auto ranked = rank(in, backend, kDefaults);

        // Distances never decrease with rank.
        for (std::size_t i = 1; i < ranked.entries.size(); ++i) {
            CHECK(ranked.entries[i - 1].distance <= ranked.entries[i].distance);
            CHECK(ranked.entries[i].rank == static_cast<int>(i + 1));
        }

        // Refusals only win when nothing else is left.
        const bool any_clean = std::any_of(in.candidates.begin(), in.candidates.end(),
                                           [&](const auto& c) { return !oracle_refusal(c.text, refusals); });
        if (any_clean) CHECK_FALSE(is_undesirable(select_best(ranked).text, "", kDefaults));

        // Shuffling candidates keeps the winner.
        auto shuffled = in;
        std::shuffle(shuffled.candidates.begin(), shuffled.candidates.end(), gen);
        CHECK(select_best(rank(shuffled, backend, kDefaults)) == select_best(ranked));

        // Adding a candidate never increases the winning distance.
        auto grown = in;
        grown.candidates.push_back({"extra", random_sentence(gen, vocab), ResponseStatus::ok});
        grown.ensemble_order.push_back("extra");
        const auto grown_ranked = rank(grown, backend, kDefaults, false);
        CHECK(grown_ranked.entries[0].distance <= rank(in, backend, kDefaults, false).entries[0].distance);
    }
}
