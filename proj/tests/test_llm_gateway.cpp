// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "fixtures.hpp"
#include "shopsim/errors.hpp"
#include "shopsim/http_backend.hpp"
#include "shopsim/json_repair.hpp"
#include "shopsim/llm_gateway.hpp"
#include "shopsim/text_models.hpp"

using namespace shopsim;
using nlohmann::json;

namespace {

GatewayOptions fast_options(std::vector<std::chrono::milliseconds>* sleeps = nullptr, int budget = 3) {
    GatewayOptions o;
    o.retry_budget = budget;
    o.initial_backoff = std::chrono::milliseconds(10);
    o.sleep = [sleeps](std::chrono::milliseconds d) {
        if (sleeps) sleeps->push_back(d);
    };
    return o;
}

std::vector<ChatMessage> hello() { return {ChatMessage::user("hello")}; }

ToolSpec search_spec() { return ToolSpec{"search_tool", "search", {{"query", "string", "text", true, {}}}}; }

/// Local HTTP server on an ephemeral port, stopped on destruction.
class TestServer {
  public:
    TestServer() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~TestServer() {
        server_.stop();
        thread_.join();
    }
    httplib::Server& server() { return server_; }
    [[nodiscard]] std::string url(const std::string& path) const {
        return "http://127.0.0.1:" + std::to_string(port_) + path;
    }

  private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST_CASE("mock canned reply passes through") {
    ChatGateway gw(std::make_shared<MockBackend>(std::vector<MockBackend::Step>{MockBackend::text("OK")}), fast_options());
    CHECK(gw.complete(hello()) == "OK");
    CHECK(gw.call_count() == 1);
}

TEST_CASE("transport failures are retried with exponential backoff") {
    std::vector<std::chrono::milliseconds> sleeps;
    auto mock = std::make_shared<MockBackend>(std::vector<MockBackend::Step>{
        MockBackend::transport_failure(), MockBackend::transport_failure(), MockBackend::text("fine")});
    ChatGateway gw(mock, fast_options(&sleeps, 3));
    CHECK(gw.complete(hello()) == "fine");
    CHECK(sleeps == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(10), std::chrono::milliseconds(20)});
    CHECK(mock->requests().size() == 3);
}

TEST_CASE("retries stop at the budget") {
    auto mock = std::make_shared<MockBackend>(std::vector<MockBackend::Step>{
        MockBackend::transport_failure(), MockBackend::transport_failure(), MockBackend::text("late")});
    ChatGateway gw(mock, fast_options(nullptr, 1));
    CHECK_THROWS_AS(gw.complete(hello()), BackendUnavailable);
    CHECK(mock->remaining() == 1);
}

TEST_CASE("blank completions are errors") {
    ChatGateway gw(std::make_shared<MockBackend>(std::vector<MockBackend::Step>{MockBackend::text("  \n")}), fast_options());
    CHECK_THROWS_AS(gw.complete(hello()), EmptyResponse);
}

TEST_CASE("an exhausted mock without a responder is unavailable and not retried") {
    auto mock = std::make_shared<MockBackend>();
    ChatGateway gw(mock, fast_options());
    CHECK_THROWS_AS(gw.complete(hello()), BackendUnavailable);
    CHECK(mock->requests().size() == 1);
}

TEST_CASE("tool calls, final text and unknown tools") {
    auto mock = std::make_shared<MockBackend>(std::vector<MockBackend::Step>{
        MockBackend::tool("search_tool", {{"query", "mug"}}, "c1"), MockBackend::text("done"),
        MockBackend::tool("fly_tool", json::object())});
    ChatGateway gw(mock, fast_options());
    const auto first = gw.complete_with_tools(hello(), {search_spec()});
    REQUIRE(std::holds_alternative<ToolCall>(first));
    CHECK(std::get<ToolCall>(first) == ToolCall{"c1", "search_tool", {{"query", "mug"}}});
    const auto second = gw.complete_with_tools(hello(), {search_spec()});
    REQUIRE(std::holds_alternative<std::string>(second));
    CHECK(std::get<std::string>(second) == "done");
    CHECK_THROWS_AS(gw.complete_with_tools(hello(), {search_spec()}), ProtocolViolation);
    CHECK_THROWS_AS(gw.complete_with_tools(hello(), {}), ValidationError);
    CHECK_THROWS_AS(gw.complete_with_tools(hello(), {search_spec(), search_spec()}), ValidationError);
}

TEST_CASE("messages are validated before sending") {
    ChatGateway gw(std::make_shared<MockBackend>(std::vector<MockBackend::Step>{MockBackend::text("x")}), fast_options());
    CHECK_THROWS_AS(gw.complete({}), ValidationError);
    std::vector<ChatMessage> orphan = {ChatMessage::user("hi"), ChatMessage{Role::Tool, "result", {}, "nope"}};
    CHECK_THROWS_AS(gw.complete(orphan), ValidationError);

    ChatMessage call = ChatMessage::assistant("");
    call.tool_call = ToolCall{"c7", "search_tool", {{"query", "mug"}}};
    std::vector<ChatMessage> linked = {ChatMessage::user("hi"), call, ChatMessage{Role::Tool, "result", {}, "c7"}};
    CHECK(gw.complete(linked) == "x");
}

TEST_CASE("the in-flight cap holds under concurrent callers") {
    std::atomic<int> active{0}, peak{0};
    auto mock = std::make_shared<MockBackend>([&](const ChatRequest&) {
        const int now = ++active;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        --active;
        return ChatReply{"ok", {}};
    });
    auto opts = fast_options();
    opts.max_in_flight = 2;
    ChatGateway gw(mock, opts);
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t)
        threads.emplace_back([&] {
            for (int i = 0; i < 5; ++i) gw.complete(hello());
        });
    for (auto& t : threads) t.join();
    CHECK(peak.load() <= 2);
    CHECK(gw.peak_in_flight() <= 2);
    CHECK(gw.call_count() == 40);
}

TEST_CASE("audit log records requests, replies and errors") {
    fixtures::TempDir dir("audit");
    auto opts = fast_options(nullptr, 0);
    opts.audit_dir = dir.path();
    ChatGateway gw(std::make_shared<MockBackend>(std::vector<MockBackend::Step>{MockBackend::text("one"),
                                                                                MockBackend::transport_failure("boom")}),
                   opts);
    CHECK(gw.complete(hello()) == "one");
    CHECK_THROWS_AS(gw.complete(hello()), BackendUnavailable);
    const auto text = fixtures::read_text(dir / "llm_audit.jsonl");
    std::istringstream in(text);
    std::string line;
    std::vector<json> entries;
    while (std::getline(in, line)) entries.push_back(json::parse(line));
    REQUIRE(entries.size() == 2);
    CHECK(entries[0]["reply"]["choices"][0]["message"]["content"] == "one");
    CHECK(entries[0]["request"]["messages"][0]["content"] == "hello");
    CHECK(entries[1]["error"].get<std::string>().find("boom") != std::string::npos);
}

TEST_CASE("mock backend is deterministic and records requests") {
    const auto run = [] {
        auto mock = std::make_shared<MockBackend>(heuristic_responder(5));
        ChatGateway gw(mock, fast_options());
        return gw.complete({ChatMessage::user("<sessions>\nsession_1:\n- Red Ceramic Mug\n</sessions>")});
    };
    CHECK(run() == run());
}

TEST_CASE("wire format round trip") {
    ChatRequest req;
    ChatMessage call = ChatMessage::assistant("");
    call.tool_call = ToolCall{"c1", "search_tool", {{"query", "mug"}}};
    req.messages = {ChatMessage::system("sys"), ChatMessage::user("hi"), call, ChatMessage{Role::Tool, "res", {}, "c1"}};
    req.tools = {search_spec()};
    req.config.temperature = 0.5;
    req.config.seed = 9;
    const auto wire = request_to_wire(req, "m1");
    CHECK(wire["model"] == "m1");
    CHECK(wire["temperature"] == 0.5);
    CHECK(wire["seed"] == 9);
    CHECK(wire["messages"][2]["tool_calls"][0]["function"]["name"] == "search_tool");
    CHECK(json::parse(wire["messages"][2]["tool_calls"][0]["function"]["arguments"].get<std::string>()) ==
          json{{"query", "mug"}});
    CHECK(wire["messages"][3]["tool_call_id"] == "c1");
    CHECK(wire["tools"][0]["function"]["parameters"]["required"] == json::array({"query"}));

    ChatReply reply{"", {ToolCall{"x1", "search_tool", {{"query", "socks"}}}}};
    const auto back = reply_from_wire(reply_to_wire(reply));
    REQUIRE(back.tool_calls.size() == 1);
    CHECK(back.tool_calls[0] == reply.tool_calls[0]);

    CHECK(reply_from_wire(json{{"content", "plain"}}).text == "plain");
    CHECK(reply_from_wire(json{{"message", {{"content", "nested"}}}}).text == "nested");
    const auto object_args = reply_from_wire(json::parse(
        R"({"choices":[{"message":{"content":null,"tool_calls":[{"id":"a","function":{"name":"t","arguments":{"k":1}}}]}}]})"));
    CHECK(object_args.tool_calls.at(0).arguments == json{{"k", 1}});
    CHECK_THROWS_AS(reply_from_wire(json::parse(R"({"choices":[]})")), ProtocolViolation);
    CHECK_THROWS_AS(reply_from_wire(json::parse(
                        R"({"choices":[{"message":{"tool_calls":[{"function":{"name":"t","arguments":"{oops"}}]}}]})")),
                    ProtocolViolation);
}

TEST_CASE("endpoint parsing") {
    const auto e = Endpoint::parse("http://localhost:8080/v1/chat");
    CHECK(e.scheme == "http");
    CHECK(e.host == "localhost");
    CHECK(e.port == 8080);
    CHECK(e.path == "/v1/chat");
    CHECK(Endpoint::parse("https://api.example.com").port == 443);
    CHECK(Endpoint::parse("http://h").path == "/");
    CHECK_THROWS_AS(Endpoint::parse("ftp://h/x"), ValidationError);
    CHECK_THROWS_AS(Endpoint::parse("no-scheme"), ValidationError);
}

TEST_CASE("http backend speaks the chat protocol against a local server") {
    TestServer srv;
    json seen;
    std::string auth;
    std::atomic<int> hits{0};
    srv.server().Post("/chat", [&](const httplib::Request& req, httplib::Response& res) {
        seen = json::parse(req.body);
        auth = req.get_header_value("Authorization");
        ++hits;
        res.set_content(R"({"choices":[{"message":{"content":"","tool_calls":[{"id":"t1","type":"function",)"
                        R"("function":{"name":"search_tool","arguments":"{\"query\":\"mug\"}"}}]}}]})",
                        "application/json");
    });
    srv.server().Post("/flaky", [&](const httplib::Request&, httplib::Response& res) {
        if (++hits % 2 == 1) {
            res.status = 503;
            return;
        }
        res.set_content(R"({"content":"recovered"})", "application/json");
    });
    srv.server().Post("/bad", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 400;
        res.set_content("nope", "text/plain");
    });

    SUBCASE("request body, auth header and tool-call reply") {
        ChatGateway gw(std::make_shared<HttpBackend>(HttpBackendConfig{srv.url("/chat"), "secret", "model-x"}), fast_options());
        const auto turn = gw.complete_with_tools(hello(), {search_spec()});
        REQUIRE(std::holds_alternative<ToolCall>(turn));
        CHECK(std::get<ToolCall>(turn).arguments == json{{"query", "mug"}});
        CHECK(seen["model"] == "model-x");
        CHECK(seen["messages"][0]["role"] == "user");
        CHECK(seen["tools"][0]["function"]["name"] == "search_tool");
        CHECK(auth == "Bearer secret");
    }
    SUBCASE("5xx is retried") {
        hits = 0;
        ChatGateway gw(std::make_shared<HttpBackend>(HttpBackendConfig{srv.url("/flaky"), "", "m"}), fast_options());
        CHECK(gw.complete(hello()) == "recovered");
        CHECK(hits.load() == 2);
    }
    SUBCASE("4xx is not retried") {
        hits = 0;
        ChatGateway gw(std::make_shared<HttpBackend>(HttpBackendConfig{srv.url("/bad"), "", "m"}), fast_options());
        CHECK_THROWS_AS(gw.complete(hello()), BackendError);
        CHECK(hits.load() == 1);
    }
    SUBCASE("unreachable endpoints become BackendUnavailable") {
        ChatGateway gw(std::make_shared<HttpBackend>(HttpBackendConfig{"http://127.0.0.1:1/x", "", "m"}),
                       fast_options(nullptr, 1));
        CHECK_THROWS_AS(gw.complete(hello()), BackendUnavailable);
    }
}

TEST_CASE("http config comes from the environment") {
    ::unsetenv("LLM_ENDPOINT_URL");
    CHECK_THROWS_AS(HttpBackendConfig::from_env(), BackendUnavailable);
    ::setenv("LLM_ENDPOINT_URL", "http://127.0.0.1:9/v1", 1);
    ::setenv("LLM_MODEL", "m2", 1);
    const auto cfg = HttpBackendConfig::from_env();
    CHECK(cfg.url == "http://127.0.0.1:9/v1");
    CHECK(cfg.model == "m2");
    ::unsetenv("LLM_ENDPOINT_URL");
    ::unsetenv("LLM_MODEL");
}

TEST_CASE("remote embedder and perplexity wire formats") {
    TestServer srv;
    srv.server().Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body);
        json vectors = json::array();
        for (const auto& t : body.at("texts")) vectors.push_back({3.0, static_cast<double>(t.get<std::string>().size())});
        res.set_content(json{{"vectors", vectors}}.dump(), "application/json");
    });
    srv.server().Post("/ppl", [](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body);
        const double v = body.at("context").get<std::string>().size() + body.at("target").get<std::string>().size();
        res.set_content(json{{"ppl", v}}.dump(), "application/json");
    });
    RemoteEmbedder emb(srv.url("/embed"), 2);
    const auto v = emb.embed("abcd");
    REQUIRE(v.size() == 2);
    CHECK(v[0] == doctest::Approx(0.6));
    CHECK(v[1] == doctest::Approx(0.8));
    CHECK(emb.embed_all({"a", "abcd"}).size() == 2);
    RemotePerplexity ppl(srv.url("/ppl"));
    CHECK(ppl.perplexity("abc", "de") == doctest::Approx(5.0));

    RemoteEmbedder wrong_dim(srv.url("/embed"), 3);
    CHECK_THROWS(wrong_dim.embed("x"));
}

TEST_CASE("json repair strips fences and finds the first object") {
    CHECK(strip_code_fences("```json\n{\"a\":1}\n```") == "{\"a\":1}");
    CHECK(extract_first_object("noise {\"a\":\"}\\\"{\"} tail {\"b\":2}") == std::string("{\"a\":\"}\\\"{\"}"));
    CHECK_FALSE(extract_first_object("{ unbalanced").has_value());
    CHECK(repair_json_object("Sure!\n```\n{\"k\": [1, 2]}\n```\nThanks") == json{{"k", {1, 2}}});
    CHECK_FALSE(repair_json_object("no json here").has_value());
}

TEST_CASE("ask_json_with_repair re-prompts once") {
    const auto parse_k = [](const json& j) { return j.at("k").get<int>(); };

    auto ok_after_repair = std::make_shared<MockBackend>(
        std::vector<MockBackend::Step>{MockBackend::text("not json"), MockBackend::text("{\"k\": 4}")});
    ChatGateway gw1(ok_after_repair, fast_options());
    const auto r1 = ask_json_with_repair(gw1, hello(), {}, parse_k);
    REQUIRE(std::holds_alternative<int>(r1));
    CHECK(std::get<int>(r1) == 4);
    const auto second = ok_after_repair->requests().at(1).messages;
    REQUIRE(second.size() == 3);
    CHECK(second[1].role == Role::Assistant);
    CHECK(second[1].content == "not json");
    CHECK(second[2].role == Role::User);

    auto always_bad = std::make_shared<MockBackend>(
        std::vector<MockBackend::Step>{MockBackend::text("{\"x\": 1}"), MockBackend::text("still {\"x\": 2}")});
    ChatGateway gw2(always_bad, fast_options());
    const auto r2 = ask_json_with_repair(gw2, hello(), {}, parse_k);
    REQUIRE(std::holds_alternative<RepairFailure>(r2));
    CHECK(std::get<RepairFailure>(r2).raw == "still {\"x\": 2}");
    CHECK(always_bad->requests().size() == 2);
}
