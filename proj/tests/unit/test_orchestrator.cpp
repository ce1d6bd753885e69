#include <doctest.h>
#include <nlohmann/json.hpp>

#include <fstream>

#include "ofa/errors.hpp"
#include "ofa/orchestrator.hpp"
#include "test_support.hpp"

using namespace ofa;
using namespace ofa::testing;
using namespace std::chrono_literals;

namespace {

std::shared_ptr<AgentRegistry> registry_of(std::vector<AgentHandle> handles) {
    return std::make_shared<AgentRegistry>(std::move(handles));
}

std::shared_ptr<AgentRegistry> lka_registry() {
    std::vector<AgentHandle> handles;
    for (const auto& [agent, text] : kLkaResponses) handles.push_back(scripted_handle(agent, fixed_reply(text)));
    return registry_of(std::move(handles));
}

// Puts Houndify's refusal nearest the query.
std::shared_ptr<const EmbeddingBackend> lka_fixture_backend() {
    return std::make_shared<FixtureBackend>(std::map<std::string, std::vector<double>>{
        {kLkaQuery, {0.0, 0.0}},
        {kLkaResponses[0].second, {2.0, 0.0}},
        {kLkaResponses[1].second, {0.0, 3.0}},
        {kLkaResponses[2].second, {0.1, 0.0}},
        {kLkaResponses[3].second, {1.0, 1.0}},
    });
}

std::shared_ptr<const EmbeddingBackend> shipped_backend() {
    return std::make_shared<SifBackend>(load_word_vectors(data_dir() / "vectors.txt"),
                                        load_frequencies(data_dir() / "frequencies.txt"));
}

Orchestrator make_orchestrator(std::shared_ptr<AgentRegistry> registry,
                               std::shared_ptr<const EmbeddingBackend> backend = lka_fixture_backend(),
                               std::shared_ptr<InteractionLog> log = std::make_shared<InteractionLog>(),
                               DomainPreferenceList prefs = {}) {
    return Orchestrator(std::move(registry), std::move(backend), UndesirablePatternSet::defaults(), std::move(log), {},
                        std::move(prefs));
}

}  // namespace

TEST_CASE("fanout queries agents in parallel") {
    const auto registry = registry_of({scripted_handle("a", fixed_reply("one", 50ms)),
                                       scripted_handle("b", fixed_reply("two", 100ms)),
                                       scripted_handle("c", fixed_reply("three", 150ms))});
    const auto started = std::chrono::steady_clock::now();
    const auto responses = fanout("hi", registry->snapshot());
    const auto elapsed = ms_since(started);
    CHECK(elapsed >= 150);
    CHECK(elapsed < 250);
    REQUIRE(responses.size() == 3);
    CHECK(responses[0].agent_id == "a");
    CHECK(responses[1].agent_id == "b");
    CHECK(responses[2].agent_id == "c");
    for (const auto& r : responses) CHECK(r.status == ResponseStatus::ok);
}

TEST_CASE("fanout with equal delays stays far below the serial sum") {
    const auto registry = registry_of({scripted_handle("a", fixed_reply("x", 100ms)),
                                       scripted_handle("b", fixed_reply("y", 100ms)),
                                       scripted_handle("c", fixed_reply("z", 100ms))});
    const auto started = std::chrono::steady_clock::now();
    fanout("hi", registry->snapshot());
    CHECK(ms_since(started) < 200);
}

TEST_CASE("fanout reports a slow agent as timed out") {
    const auto registry = registry_of({scripted_handle("fast", fixed_reply("quick")),
                                       scripted_handle("slow", fixed_reply("late", 500ms), 200ms)});
    const auto started = std::chrono::steady_clock::now();
    const auto responses = fanout("hi", registry->snapshot());
    CHECK(ms_since(started) < 300);
    CHECK(responses[0].status == ResponseStatus::ok);
    CHECK(responses[1].status == ResponseStatus::timeout);
    CHECK(responses[1].latency_ms >= 200);
}

TEST_CASE("fanout skips disabled agents and needs at least one enabled") {
    auto off = scripted_handle("off", fixed_reply("x"));
    off.spec.enabled = false;
    const auto registry = registry_of({off, scripted_handle("on", fixed_reply("y"))});
    const auto responses = fanout("hi", registry->snapshot());
    REQUIRE(responses.size() == 1);
    CHECK(responses[0].agent_id == "on");
    CHECK_THROWS_AS(fanout("hi", registry_of({off})->snapshot()), NoAgentsEnabled);
    CHECK_THROWS_AS(fanout("hi", AgentRegistry().snapshot()), NoAgentsEnabled);
}

TEST_CASE("registry changes apply to the next turn") {
    auto registry = lka_registry();
    auto orch = make_orchestrator(registry);
    CHECK(orch.handle_turn_one_for_all(kLkaQuery).record.all_responses.size() == 4);
    registry->register_agent(scripted_spec("fifth"), std::make_shared<ScriptedAgent>(fixed_reply("five")));
    CHECK(orch.handle_turn_one_for_all(kLkaQuery).record.all_responses.size() == 5);
    registry->remove_agent("google");
    registry->remove_agent("fifth");
    CHECK(orch.handle_turn_one_for_all(kLkaQuery).record.all_responses.size() == 3);
}

TEST_CASE("the only non-refusal weather answer is selected") {
    const auto registry = registry_of({scripted_handle("alexa", fixed_reply("I'm not sure")),
                                       scripted_handle("google", fixed_reply("Sorry I'm not sure how to help")),
                                       scripted_handle("houndify", fixed_reply("The weather outside is delightful.")),
                                       scripted_handle("adasa", fixed_reply("Didn't get that"))});
    auto orch = make_orchestrator(registry, shipped_backend());
    const auto turn = orch.handle_turn_one_for_all("What is the weather outside?");
    CHECK(turn.selected_text == "The weather outside is delightful.");
    CHECK(turn.record.selected_agent == "houndify");
    CHECK(turn.record.outcome == TurnOutcome::ok);
}

TEST_CASE("LKA dialogue: prefilter on selects Adasa, off reproduces the failure") {
    auto orch = make_orchestrator(lka_registry());
    for (int run = 0; run < 10; ++run) {
        const auto on = orch.handle_turn_one_for_all(kLkaQuery, true);
        CHECK(on.record.selected_agent == "adasa");
        CHECK(on.selected_text == kLkaResponses[3].second);
        CHECK_FALSE(on.record.degraded);
    }
    const auto off = orch.handle_turn_one_for_all(kLkaQuery, false);
    CHECK(off.record.selected_agent == "houndify");
    CHECK(off.selected_text == "Didn't get that");
    CHECK_FALSE(off.record.prefilter);
    REQUIRE(off.record.distances.has_value());
    CHECK(off.record.distances->size() == 4);
}

TEST_CASE("LKA dialogue with the shipped scripted agents and SIF vectors") {
    auto orch = make_orchestrator(std::make_shared<AgentRegistry>(load_registry(data_dir() / "agents.json")),
                                  shipped_backend());
    const auto turn = orch.handle_turn_one_for_all(kLkaQuery);
    CHECK(turn.record.selected_agent == "adasa");
}

TEST_CASE("all refusals are still answered and flagged degraded") {
    const auto registry =
        registry_of({scripted_handle("a", fixed_reply("I'm not sure")), scripted_handle("b", fixed_reply("Didn't get that"))});
    auto orch = make_orchestrator(registry, shipped_backend());
    const auto turn = orch.handle_turn_one_for_all("What is the weather outside?");
    CHECK(turn.record.degraded);
    CHECK(turn.record.outcome == TurnOutcome::ok);
    CHECK_FALSE(turn.record.selected_agent.empty());
}

TEST_CASE("every agent failing yields the fallback text and a logged record") {
    const auto registry = registry_of({scripted_handle("a", fixed_reply("x", 300ms), 50ms),
                                       scripted_handle("b", fixed_reply(""))});
    auto log = std::make_shared<InteractionLog>();
    auto orch = make_orchestrator(registry, shipped_backend(), log);
    const auto turn = orch.handle_turn_one_for_all("hello");
    CHECK(turn.selected_text == OrchestratorOptions{}.fallback_text);
    CHECK(turn.record.outcome == TurnOutcome::fallback);
    CHECK(log->size() == 1);
}

TEST_CASE("an unembeddable query is logged with the error outcome") {
    auto log = std::make_shared<InteractionLog>();
    auto orch = make_orchestrator(lka_registry(), lka_fixture_backend(), log);
    const auto turn = orch.handle_turn_one_for_all("qqq zzz");
    CHECK(turn.record.outcome == TurnOutcome::error);
    CHECK(turn.selected_text == OrchestratorOptions{}.fallback_text);
    CHECK(log->find(turn.record.turn_id).has_value());
}

TEST_CASE("agent select contacts only the chosen agent") {
    std::vector<AgentHandle> handles;
    std::vector<std::shared_ptr<ScriptedAgent>> agents;
    for (const auto& [id, text] : kLkaResponses) {
        agents.push_back(std::make_shared<ScriptedAgent>(fixed_reply(text)));
        handles.push_back({scripted_spec(id), agents.back()});
    }
    auto orch = make_orchestrator(registry_of(handles));
    const auto turn = orch.handle_turn_agent_select(kLkaQuery, "adasa");
    CHECK(turn.selected_text == kLkaResponses[3].second);
    REQUIRE(turn.record.all_responses.size() == 1);
    CHECK_FALSE(turn.record.distances.has_value());
    CHECK(turn.record.mode.agent_id == "adasa");
    CHECK(agents[3]->call_count() == 1);
    for (int i = 0; i < 3; ++i) CHECK(agents[i]->call_count() == 0);

    CHECK_THROWS_AS(orch.handle_turn_agent_select(kLkaQuery, "siri"), NotFound);
    for (const auto& a : agents) CHECK(a->call_count() <= 1);
    CHECK(orch.log().size() == 1);
}

TEST_CASE("agent select surfaces a timeout") {
    auto orch = make_orchestrator(registry_of({scripted_handle("slow", fixed_reply("late", 400ms), 100ms)}));
    const auto turn = orch.handle_turn(kLkaQuery, InteractionMode::agent_select("slow"));
    REQUIRE(turn.record.all_responses.size() == 1);
    CHECK(turn.record.all_responses[0].status == ResponseStatus::timeout);
    CHECK(turn.record.outcome == TurnOutcome::fallback);
}

TEST_CASE("route_by_preference") {
    DomainPreferenceList prefs{{{"weather", "houndify"}, {"lane", "adasa"}}};
    CHECK_FALSE(route_by_preference("will it snow tomorrow", prefs).has_value());
    CHECK(route_by_preference("what's the weekly weather report", prefs) == "houndify");
    CHECK(route_by_preference("Lane WEATHER", prefs) == "houndify");
    CHECK_FALSE(route_by_preference("weather", {}).has_value());
    const auto parsed = preferences_from_json(nlohmann::json::parse(R"([{"pattern": "lane", "agent_id": "adasa"}])"));
    REQUIRE(parsed.rules.size() == 1);
    CHECK(parsed.rules[0].agent_id == "adasa");
}

TEST_CASE("a preference rule short-circuits the fan-out") {
    std::vector<AgentHandle> handles;
    std::vector<std::shared_ptr<ScriptedAgent>> agents;
    for (const auto& [id, text] : kLkaResponses) {
        agents.push_back(std::make_shared<ScriptedAgent>(fixed_reply(text)));
        handles.push_back({scripted_spec(id), agents.back()});
    }
    auto orch = make_orchestrator(registry_of(handles), lka_fixture_backend(), std::make_shared<InteractionLog>(),
                                  DomainPreferenceList{{{"lka", "alexa"}}});
    const auto turn = orch.handle_turn_one_for_all(kLkaQuery);
    CHECK(turn.record.selected_agent == "alexa");
    CHECK(turn.record.routed_by_preference);
    CHECK(turn.record.mode.is_agent_select());
    CHECK(agents[1]->call_count() == 0);
}

TEST_CASE("feedback is versioned and drives accuracy") {
    auto log = std::make_shared<InteractionLog>();
    auto orch = make_orchestrator(lka_registry(), lka_fixture_backend(), log);
    std::vector<std::string> ids;
    for (int i = 0; i < 100; ++i) ids.push_back(orch.handle_turn_one_for_all(kLkaQuery).record.turn_id);
    for (int i = 0; i < 100; ++i) orch.record_feedback(ids[i], i < 71);
    const auto updated = log->find(ids[0]);
    REQUIRE(updated.has_value());
    CHECK(updated->user_correct == true);
    CHECK(updated->version == 2);
    const auto acc = feedback_accuracy(log->recent(1000));
    REQUIRE(acc.has_value());
    CHECK(*acc == doctest::Approx(0.71));
    CHECK_THROWS_AS(orch.record_feedback("nope", true), NotFound);
    CHECK_FALSE(feedback_accuracy({}).has_value());
}

TEST_CASE("the JSONL log replays, keeps every line and reads newest first") {
    TempDir dir;
    const auto path = dir.path() / "log.jsonl";
    std::string first, second;
    {
        auto log = std::make_shared<InteractionLog>(path);
        auto orch = make_orchestrator(lka_registry(), lka_fixture_backend(), log);
        first = orch.handle_turn_one_for_all(kLkaQuery).record.turn_id;
        second = orch.handle_turn_agent_select(kLkaQuery, "adasa").record.turn_id;
        orch.record_feedback(first, false);
    }
    std::ifstream in(path);
    std::vector<nlohmann::json> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(nlohmann::json::parse(line));
    REQUIRE(lines.size() == 3);
    CHECK(lines[0]["turn_id"] == first);
    CHECK(lines[0]["user_correct"].is_null());
    CHECK(lines[2]["user_correct"] == false);
    for (const auto* key : {"turn_id", "timestamp", "mode", "query_text", "all_responses", "selected_agent",
                            "selected_text", "distances", "user_correct", "total_latency_ms"}) {
        CHECK(lines[0].contains(key));
    }

    InteractionLog replay(path);
    CHECK(replay.size() == 2);
    const auto recent = replay.recent(10);
    REQUIRE(recent.size() == 2);
    CHECK(recent[0].turn_id == second);
    CHECK(recent[1].user_correct == false);
    CHECK(replay.recent(1).size() == 1);
}

TEST_CASE("records round-trip through JSON") {
    InteractionRecord r;
    r.turn_id = new_turn_id();
    r.timestamp = utc_timestamp_now();
    r.mode = InteractionMode::agent_select("adasa");
    r.query_text = "q";
    r.all_responses = {{"adasa", "t", ResponseStatus::ok, 5}};
    r.selected_agent = "adasa";
    r.selected_text = "t";
    r.distances = std::vector<std::pair<std::string, double>>{{"adasa", 0.5}, {"x", std::numeric_limits<double>::infinity()}};
    const auto back = interaction_record_from_json(to_json(r));
    CHECK(back.turn_id == r.turn_id);
    CHECK(back.mode.agent_id == "adasa");
    REQUIRE(back.distances.has_value());
    CHECK((*back.distances)[0].second == 0.5);
    CHECK(std::isinf((*back.distances)[1].second));
    CHECK(r.turn_id.size() == 32);
    CHECK(r.timestamp.back() == 'Z');
}
