// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "fixtures.hpp"
#include "shopsim/errors.hpp"
#include "shopsim/persona.hpp"

using namespace shopsim;
using nlohmann::json;

namespace {

const std::vector<std::string> kInterests = {"Hiking", "Travel", "Reading", "Cooking"};

json profile_fixture() {
    json cp = json::object();
    for (const auto key : kProfileFieldKeys) cp[std::string(key)] = {{"value", "v-" + std::string(key)}, {"reasoning", "r"}};
    cp["interests"] = json::array({"Hiking", "Travel"});
    return json{{"analysis", "Buys boots and books."}, {"consumer_profile", cp}};
}

json preferences_fixture() {
    return json{{"inner_monologue", "I compare prices."}, {"persona", "A careful outdoor shopper."}};
}

ShoppingHistory history_fixture(const std::string& cid = "c1") {
    return ShoppingHistory{cid, {fixtures::example_0910(cid), fixtures::example_0912(cid)}, {}};
}

GatewayOptions quick() {
    GatewayOptions o;
    o.sleep = [](std::chrono::milliseconds) {};
    return o;
}

ChatGateway scripted(std::vector<std::string> replies) {
    std::vector<MockBackend::Step> steps;
    for (auto& r : replies) steps.push_back(MockBackend::text(std::move(r)));
    return ChatGateway(std::make_shared<MockBackend>(std::move(steps)), quick());
}

}  // namespace

TEST_CASE("a valid profile answer parses field for field") {
    auto gw = scripted({profile_fixture().dump()});
    const auto p = mine_consumer_profile(history_fixture(), kInterests, gw);
    CHECK(p.gender == ProfileField{"v-gender", "r"});
    CHECK(p.parental_status == ProfileField{"v-parental_status", "r"});
    CHECK(p.interests == std::vector<std::string>{"Hiking", "Travel"});
    CHECK(p.analysis == "Buys boots and books.");
    CHECK(profile_from_json(profile_to_json(p), kInterests) == p);
}

TEST_CASE("a profile missing a field fails after the re-prompt") {
    auto bad = profile_fixture();
    bad["consumer_profile"].erase("parental_status");
    auto gw = scripted({bad.dump(), bad.dump()});
    try {
        (void)mine_consumer_profile(history_fixture(), kInterests, gw);
        FAIL("incomplete profile accepted");
    } catch (const MiningFailed& e) {
        CHECK(std::string(e.what()).find("parental_status") != std::string::npos);
        CHECK(e.raw() == bad.dump());
    }
}

TEST_CASE("an interest outside the valid list is named") {
    auto bad = profile_fixture();
    bad["consumer_profile"]["interests"] = json::array({"Hiking", "Skydiving"});
    auto gw = scripted({bad.dump(), bad.dump()});
    try {
        (void)mine_consumer_profile(history_fixture(), kInterests, gw);
        FAIL("invalid interest accepted");
    } catch (const MiningFailed& e) {
        CHECK(std::string(e.what()).find("Skydiving") != std::string::npos);
    }
}

TEST_CASE("a bad first answer can be fixed by the re-prompt") {
    auto gw = scripted({"I think the profile is...", profile_fixture().dump()});
    CHECK(mine_consumer_profile(history_fixture(), kInterests, gw).interests.size() == 2);
}

TEST_CASE("profile parsing accepts title-case keys and bare strings") {
    json cp = json::object();
    cp["Gender"] = "female";
    cp["Age"] = {{"value", "30-40"}, {"reason", "school supplies"}};
    for (const auto key : {"relationships", "education", "industry", "home_ownership", "parental_status"}) cp[key] = "unknown";
    cp["Salary range"] = "mid";
    cp["interests"] = {{"value", json::array({"Reading"})}};
    const auto p = profile_from_json(json{{"consumer_profile", cp}}, kInterests);
    CHECK(p.gender.value == "female");
    CHECK(p.age == ProfileField{"30-40", "school supplies"});
    CHECK(p.salary_range.value == "mid");
    CHECK(p.interests == std::vector<std::string>{"Reading"});
    CHECK_THROWS_AS(profile_from_json(json::array(), kInterests), ValidationError);
}

TEST_CASE("preference mining") {
    auto ok = scripted({"```json\n" + preferences_fixture().dump(2) + "\n```"});
    const auto prefs = mine_shopping_preferences(ConsumerProfile{}, history_fixture(), ok);
    CHECK(prefs.persona_text == "A careful outdoor shopper.");
    CHECK(prefs.inner_monologue == "I compare prices.");

    const json only_persona{{"persona", "x"}};
    auto bad = scripted({only_persona.dump(), only_persona.dump()});
    CHECK_THROWS_AS(mine_shopping_preferences(ConsumerProfile{}, history_fixture(), bad), MiningFailed);
}

TEST_CASE("the preferences prompt carries the mined profile") {
    auto mock = std::make_shared<MockBackend>(std::vector<MockBackend::Step>{MockBackend::text(preferences_fixture().dump())});
    ChatGateway gw(mock, quick());
    ConsumerProfile profile;
    profile.industry.value = "forestry";
    (void)mine_shopping_preferences(profile, history_fixture(), gw);
    const auto prompt = mock->requests().at(0).messages.back().content;
    CHECK(prompt.find("forestry") != std::string::npos);
    CHECK(prompt.find("<SEARCH> waterproof hiking shoes - at 10:12") != std::string::npos);
}

TEST_CASE("mining an empty history is a validation error") {
    auto gw = scripted({});
    CHECK_THROWS_AS(mine_consumer_profile(ShoppingHistory{"c9", {}, {}}, kInterests, gw), ValidationError);
    CHECK_THROWS_AS(mine_consumer_profile(history_fixture(), {}, gw), ValidationError);
}

TEST_CASE("assembled personas render blocks in order and deterministically") {
    const auto profile = profile_from_json(profile_fixture(), kInterests);
    const ShoppingPreferences prefs{"A careful outdoor shopper.", "I compare prices."};
    const auto a = assemble_persona(profile, prefs, history_fixture());
    const auto b = assemble_persona(profile, prefs, history_fixture());
    CHECK(a.text() == b.text());
    const auto text = a.text();
    CHECK(text.rfind("Profile:\n", 0) == 0);
    const auto pref_pos = text.find("Shopping Preferences:\n");
    const auto hist_pos = text.find("Shopping History:\n");
    const auto reason_pos = text.find("Reasoning:\n");
    CHECK(pref_pos != std::string::npos);
    CHECK(pref_pos < hist_pos);
    CHECK(hist_pos < reason_pos);
    CHECK(reason_pos != std::string::npos);
    CHECK(a.reasoning == "Buys boots and books.\nI compare prices.");
    CHECK(a.rendered_history == render_history(history_fixture()));
}

TEST_CASE("persona views cut the text") {
    const auto p = assemble_persona(profile_from_json(profile_fixture(), kInterests), {"Likes deals.", "hmm"},
                                    history_fixture());
    CHECK(p.text(PersonaView::None).empty());
    CHECK(p.text(PersonaView::ProfileOnly) == render_profile(p.profile));
    CHECK(p.text(PersonaView::PreferencesOnly) == "Shopping Preferences:\nLikes deals.\n");
    CHECK(p.text(PersonaView::HistoryOnly) == "Shopping History:\n" + p.rendered_history);
    for (const auto v : {PersonaView::Full, PersonaView::ProfileOnly, PersonaView::PreferencesOnly, PersonaView::HistoryOnly,
                         PersonaView::None})
        CHECK(parse_persona_view(to_string(v)) == v);
    CHECK_THROWS_AS(parse_persona_view("everything"), ValidationError);
}

TEST_CASE("the empty baseline persona has no text") {
    const auto base = Persona::empty_baseline();
    CHECK(base.baseline);
    CHECK(base.text().empty());
}

TEST_CASE("customer ids never leak into persona text") {
    auto leaky = profile_fixture();
    leaky["analysis"] = "Customer cust-777 buys boots.";
    leaky["consumer_profile"]["industry"]["reasoning"] = "cust-777 searched for saws";
    auto gw = scripted({leaky.dump(), json{{"inner_monologue", "cust-777 likes deals"}, {"persona", "cust-777 is frugal"}}.dump()});
    const auto p = mine_persona(history_fixture("cust-777"), kInterests, gw);
    CHECK(p.text().find("cust-777") == std::string::npos);
    CHECK(persona_to_json(p).dump().find("cust-777") == std::string::npos);
}

TEST_CASE("mining with the heuristic mock is a pure function of the history") {
    const auto mine = [] {
        ChatGateway gw(std::make_shared<MockBackend>(heuristic_responder(3)), quick());
        return mine_persona(history_fixture(), kInterests, gw);
    };
    const auto a = mine();
    CHECK(a == mine());
    for (const auto& i : a.profile.interests)
        CHECK(std::find(kInterests.begin(), kInterests.end(), i) != kInterests.end());
}

TEST_CASE("persona store round trip") {
    fixtures::TempDir dir("personas");
    const auto p = assemble_persona(profile_from_json(profile_fixture(), kInterests), {"Likes deals.", "hmm"},
                                    history_fixture());
    save_persona(p, "c1", dir.path());
    save_persona(Persona::empty_baseline(), "c0", dir.path());
    CHECK(load_persona(dir / "c1.json") == p);
    const auto all = load_persona_dir(dir.path());
    REQUIRE(all.size() == 2);
    CHECK(all[0].first == "c0");
    CHECK(all[0].second.baseline);
    CHECK(all[1].second == p);
    CHECK_THROWS_AS(save_persona(p, "../evil", dir.path()), ValidationError);
    CHECK_THROWS_AS(load_persona_dir(dir / "missing"), ValidationError);

    fixtures::write_text(dir / "interests.txt", "# list\nHiking\n\n  Travel \n");
    CHECK(load_valid_interests(dir / "interests.txt") == std::vector<std::string>{"Hiking", "Travel"});
}
