// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "fixtures.hpp"
#include "shopsim/errors.hpp"
#include "shopsim/shopper_agent.hpp"

using namespace shopsim;
using fixtures::product;
using nlohmann::json;

namespace {

GatewayOptions quick() {
    GatewayOptions o;
    o.sleep = [](std::chrono::milliseconds) {};
    return o;
}

std::shared_ptr<MockBackend> script(std::vector<MockBackend::Step> steps) {
    return std::make_shared<MockBackend>(std::move(steps));
}

Transcript parametric_run(double price, double ceiling, std::uint64_t seed = 1, double bias = 1.0) {
    const Catalog base({product("m1", "Ceramic mug", price, "Kitchen"), product("x1", "Desk lamp", 30, "Home")});
    const auto v = EnvVariant::make("C", base);
    ParametricPolicy p({"mug", Money::from_dollars(ceiling), bias});
    return run_session(v, p, {}, seed);
}

Persona sample_persona() {
    Persona p;
    p.profile.gender.value = "Female";
    p.profile.interests = {"Cooking"};
    p.preferences.persona_text = "Budget-minded home cook.";
    p.rendered_history = "2024-09-10\n==========\n<SEARCH> mug - at 10:12\n";
    return p;
}

}  // namespace

TEST_CASE("parametric policy buys an item under its ceiling") {
    const auto t = parametric_run(8, 10);
    CHECK(t.purchased.size() == 1);
    CHECK(t.purchased[0].product_id == "m1");
    CHECK(session_stats(t) == SessionStats{1, 1, 1});
    CHECK(t.terminated_by == Termination::TerminateTool);
}

TEST_CASE("parametric policy walks away above its ceiling") {
    const auto t = parametric_run(12, 10);
    CHECK(t.purchased.empty());
    CHECK(session_stats(t) == SessionStats{1, 1, 0});
}

TEST_CASE("the ceiling is inclusive and the bias is honoured") {
    CHECK(parametric_run(10, 10).purchased.size() == 1);
    CHECK(parametric_run(8, 10, 1, 0.0).purchased.empty());
    int bought = 0;
    for (std::uint64_t s = 0; s < 400; ++s) bought += static_cast<int>(parametric_run(8, 10, s, 0.5).purchased.size());
    CHECK(bought > 150);
    CHECK(bought < 250);
    CHECK_THROWS_AS(ParametricPolicy({"mug", Money::from_dollars(1), 1.5}), ValidationError);
    CHECK_THROWS_AS(ParametricPolicy({"  ", Money::from_dollars(1), 1.0}), ValidationError);
}

TEST_CASE("parametric sessions are pure functions of the seed") {
    for (std::uint64_t s = 0; s < 20; ++s)
        CHECK(transcript_to_jsonl(parametric_run(8, 10, s, 0.5)) == transcript_to_jsonl(parametric_run(8, 10, s, 0.5)));
}

TEST_CASE("a four-step script yields four events plus terminate") {
    const Catalog base({product("m1", "Ceramic mug", 8)});
    const auto v = EnvVariant::make("C", base);
    ScriptedPolicy p({make_tool_call(tool_names::kSearch, {{"query", "mug"}}),
                      make_tool_call(tool_names::kProductInfo, {{"product_id", "m1"}}),
                      make_tool_call(tool_names::kCart, {{"action", "add"}, {"product_id", "m1"}}),
                      make_tool_call(tool_names::kCart, {{"action", "remove"}, {"product_id", "m1"}})});
    const auto t = run_session(v, p, {}, 0);
    REQUIRE(t.events.size() == 5);
    CHECK(t.events[4].tool == tool_names::kTerminate);
    const auto again = run_session(v, p, {}, 0);
    CHECK(again.events.size() == 5);
}

TEST_CASE("replaying a logged session reproduces its statistics") {
    const Catalog base(fixtures::example_products());
    const auto v = EnvVariant::make("C", base);
    for (const auto& s : {fixtures::example_0910(), fixtures::example_0912()}) {
        ScriptedPolicy p(replay_script(s));
        const auto t = run_session(v, p, {}, 0);
        CHECK(session_stats(t) == session_stats(s));
    }
}

TEST_CASE("the session prompt drops the description line for the baseline") {
    const auto with = session_system_prompt(sample_persona());
    CHECK(with.find("Customer description: Profile:") != std::string::npos);
    CHECK(with.find("Budget-minded home cook.") != std::string::npos);
    const auto without = session_system_prompt(Persona::empty_baseline());
    CHECK(without.find("Customer description") == std::string::npos);
    CHECK(without.find("{persona}") == std::string::npos);
    CHECK(session_system_prompt(sample_persona(), PersonaView::None) == without);
    const auto prefs_only = session_system_prompt(sample_persona(), PersonaView::PreferencesOnly);
    CHECK(prefs_only.find("Female") == std::string::npos);
    CHECK(prefs_only.find("Budget-minded") != std::string::npos);
}

TEST_CASE("the LLM policy threads tool results back to the model") {
    const Catalog base({product("m1", "Ceramic mug", 8)});
    const auto v = EnvVariant::make("C", base);
    auto mock = script({MockBackend::tool("search_tool", {{"query", "mug"}}, "t1"),
                        MockBackend::tool("get_product_info_tool", {{"product_id", "m1"}}, "t2"),
                        MockBackend::tool("cart_tool", {{"action", "add"}, {"product_id", "m1"}}),
                        MockBackend::tool("cart_tool", {{"action", "purchase"}}),
                        MockBackend::tool("terminate_session", json::object())});
    ChatGateway gw(mock, quick());
    LlmPolicyOptions opts;
    opts.shopping_intention = "You need a gift.";
    LlmPolicy policy(gw, sample_persona(), opts);
    const auto t = run_session(v, policy, {}, 42);
    CHECK(t.terminated_by == Termination::TerminateTool);
    CHECK(t.purchased.size() == 1);

    const auto reqs = mock->requests();
    REQUIRE(reqs.size() == 5);
    CHECK(reqs[0].messages.at(0).role == Role::System);
    CHECK(reqs[0].messages.at(1).content == "Start the shopping session. You need a gift.");
    CHECK(reqs[0].config.seed == 42);
    CHECK(reqs[0].tools.size() == 4);
    const auto& second = reqs[1].messages;
    REQUIRE(second.size() == 4);
    CHECK(second[2].tool_call->id == "t1");
    CHECK(second[3].role == Role::Tool);
    CHECK(second[3].tool_call_id == "t1");
    CHECK(second[3].content.find("Ceramic mug") != std::string::npos);
}

TEST_CASE("a plain-text reply ends the LLM session") {
    const Catalog base({product("m1", "Ceramic mug", 8)});
    const auto v = EnvVariant::make("C", base);
    ChatGateway gw(script({MockBackend::tool("search_tool", {{"query", "mug"}}), MockBackend::text("I am done.")}),
                   quick());
    LlmPolicy policy(gw, Persona::empty_baseline());
    const auto t = run_session(v, policy, {}, 0);
    CHECK(t.terminated_by == Termination::TerminateTool);
    CHECK(t.events.size() == 2);
}

TEST_CASE("protocol violations and backend outages end the session with an error") {
    const Catalog base({product("m1", "Ceramic mug", 8)});
    const auto v = EnvVariant::make("C", base);
    ChatGateway rogue(script({MockBackend::tool("fly_tool", json::object())}), quick());
    LlmPolicy p1(rogue, Persona::empty_baseline());
    CHECK(run_session(v, p1, {}, 0).terminated_by == Termination::Error);

    ChatGateway dead(script({}), quick());
    LlmPolicy p2(dead, Persona::empty_baseline());
    const auto t = run_session(v, p2, {}, 0);
    CHECK(t.terminated_by == Termination::Error);
    CHECK_FALSE(t.error_message.empty());
}

TEST_CASE("LLM sessions with the heuristic mock are reproducible") {
    const Catalog base({product("m1", "Ceramic mug", 8, "Kitchen"), product("m2", "Travel mug", 15, "Kitchen"),
                        product("k1", "Chef knife", 40, "Kitchen")});
    const auto v = EnvVariant::make("C", base);
    const auto run = [&] {
        ChatGateway gw(std::make_shared<MockBackend>(heuristic_responder(9)), quick());
        LlmPolicy policy(gw, sample_persona());
        return transcript_to_jsonl(run_session(v, policy, {}, 17));
    };
    const auto a = run();
    CHECK(a == run());
    CHECK(a.find("search_tool") != std::string::npos);
}

TEST_CASE("task answers") {
    SUBCASE("index choice") {
        ChatGateway gw(script({MockBackend::text("{\"output\": 2}")}), quick());
        CHECK(answer_index_choice(gw, "pick", 4) == 2);
    }
    SUBCASE("out of range index fails without a re-prompt") {
        auto mock = script({MockBackend::text("{\"output\": 7}"), MockBackend::text("{\"output\": 1}")});
        ChatGateway gw(mock, quick());
        CHECK_THROWS_AS(answer_index_choice(gw, "pick", 4), TaskAnswerFailed);
        CHECK(mock->remaining() == 1);
    }
    SUBCASE("non-integer index") {
        ChatGateway gw(script({MockBackend::text("{\"output\": \"2\"}")}), quick());
        CHECK_THROWS_AS(answer_index_choice(gw, "pick", 4), TaskAnswerFailed);
    }
    SUBCASE("unparseable twice") {
        ChatGateway gw(script({MockBackend::text("two"), MockBackend::text("the third one")}), quick());
        try {
            (void)answer_index_choice(gw, "pick", 4);
            FAIL("accepted prose");
        } catch (const TaskAnswerFailed& e) {
            CHECK(e.raw() == "the third one");
        }
    }
    SUBCASE("query map") {
        ChatGateway gw(script({MockBackend::text("{\"session_1\":\"knee brace for women\"}")}), quick());
        CHECK(answer_query_generation(gw, "q", 1) == std::vector<std::string>{"knee brace for women"});
    }
    SUBCASE("query map missing a session") {
        ChatGateway gw(script({MockBackend::text("{\"session_1\":\"a\"}")}), quick());
        CHECK_THROWS_AS(answer_query_generation(gw, "q", 2), TaskAnswerFailed);
    }
    SUBCASE("title choice is case and punctuation insensitive") {
        ChatGateway gw(script({MockBackend::text("{\"title\":\"men's LOW height boots\",\"reason\":\"fits\"}")}), quick());
        CHECK(answer_title_choice(gw, "t", {"Brand1 Waterproof hiking boots", "Men's Low height boots"}) == 1);
    }
    SUBCASE("unknown title") {
        ChatGateway gw(script({MockBackend::text("{\"title\":\"Hat\"}")}), quick());
        CHECK_THROWS_AS(answer_title_choice(gw, "t", {"Boots"}), TaskAnswerFailed);
    }
}

TEST_CASE("task prompts list their inputs") {
    const auto q = build_query_generation_prompt("P", {{"Red mug", "Blue mug"}, {"Lamp"}});
    CHECK(q.find("session_1:\n- Red mug\n- Blue mug\nsession_2:\n- Lamp\n") != std::string::npos);
    const auto ind = build_item_selection_individual_prompt("BG", {"A", "B"});
    CHECK(ind.find("- A\n- B") != std::string::npos);
    CHECK(ind.find("BG") != std::string::npos);
    const auto p1 = product("m1", "Ceramic mug", 8);
    const auto p2 = product("m2", "Travel mug", 15);
    const auto grp = build_item_selection_group_prompt("P", {&p1, &p2});
    CHECK(grp.find("[0] Ceramic mug | $8.00\n[1] Travel mug | $15.00") != std::string::npos);
}
