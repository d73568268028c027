// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace shopsim {

enum class Role { System, User, Assistant, Tool };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);

struct ToolCall {
    std::string id;
    std::string name;
    nlohmann::json arguments = nlohmann::json::object();

    friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

struct ChatMessage {
    Role role = Role::User;
    std::string content;
    std::optional<ToolCall> tool_call;  // assistant turns that invoked a tool
    std::string tool_call_id;           // tool turns: id of the call they answer

    static ChatMessage system(std::string text) { return {Role::System, std::move(text), {}, {}}; }
    static ChatMessage user(std::string text) { return {Role::User, std::move(text), {}, {}}; }
    static ChatMessage assistant(std::string text) { return {Role::Assistant, std::move(text), {}, {}}; }

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ToolParameter {
    std::string name;
    std::string type = "string";  // JSON-schema primitive type
    std::string description;
    bool required = true;
    std::vector<std::string> allowed_values;
};

struct ToolSpec {
    std::string name;
    std::string description;
    std::vector<ToolParameter> parameters;

    [[nodiscard]] nlohmann::json parameters_schema() const;
};

struct GenerationConfig {
    double temperature = 0.0;
    int max_tokens = 1024;
    std::optional<std::uint64_t> seed;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    std::vector<ToolSpec> tools;
    GenerationConfig config;
};

struct ChatReply {
    std::string text;
    std::vector<ToolCall> tool_calls;
};

/// A text-generation service. Implementations throw TransportError for
/// failures worth retrying and other BackendError subclasses otherwise.
class ChatBackend {
  public:
    virtual ~ChatBackend() = default;
    virtual ChatReply send(const ChatRequest& request, std::chrono::milliseconds timeout) = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

struct GatewayOptions {
    /// Retries after the first attempt; only TransportError is retried.
    int retry_budget = 3;
    std::chrono::milliseconds initial_backoff{500};
    std::size_t max_in_flight = 4;
    std::chrono::milliseconds timeout{60'000};
    /// When set, every request/response pair is appended to <dir>/llm_audit.jsonl.
    std::optional<std::filesystem::path> audit_dir;
    /// Injectable for tests; defaults to std::this_thread::sleep_for.
    std::function<void(std::chrono::milliseconds)> sleep;
};

/// Either a final assistant text or a single tool call.
using ToolTurn = std::variant<std::string, ToolCall>;

/// Thread-safe front door to a backend: retry with exponential backoff,
/// an in-flight cap and optional audit logging.
class ChatGateway {
  public:
    explicit ChatGateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options = {});

    /// Throws BackendUnavailable when retries run out and EmptyResponse for blank completions.
    std::string complete(const std::vector<ChatMessage>& messages, const GenerationConfig& config = {});

    /// Throws ProtocolViolation when the backend calls a tool that was not offered.
    ToolTurn complete_with_tools(const std::vector<ChatMessage>& messages, const std::vector<ToolSpec>& tools,
                                 const GenerationConfig& config = {});

    [[nodiscard]] std::size_t call_count() const noexcept { return calls_.load(); }
    [[nodiscard]] std::size_t peak_in_flight() const noexcept { return peak_in_flight_.load(); }
    [[nodiscard]] const ChatBackend& backend() const noexcept { return *backend_; }

  private:
    ChatReply send_with_retry(const ChatRequest& request);
    void audit(const ChatRequest& request, const ChatReply* reply, const std::string& error);

    std::shared_ptr<ChatBackend> backend_;
    GatewayOptions options_;

    std::mutex slots_mutex_;
    std::condition_variable slots_cv_;
    std::size_t in_flight_ = 0;
    std::atomic<std::size_t> peak_in_flight_{0};
    std::atomic<std::size_t> calls_{0};

    std::mutex audit_mutex_;
    std::uint64_t audit_seq_ = 0;
};

/// Scripted backend for hermetic runs. Script steps are consumed in order
/// under a lock; once exhausted the optional responder answers, and without
/// one the call fails with BackendUnavailable (never retried).
class MockBackend : public ChatBackend {
  public:
    using Responder = std::function<ChatReply(const ChatRequest&)>;

    struct Step {
        std::optional<ChatReply> reply;  // empty => transport failure
        std::string failure;
    };

    static Step text(std::string reply);
    static Step tool(std::string name, nlohmann::json arguments, std::string id = {});
    static Step transport_failure(std::string message = "simulated transport failure");

    MockBackend() = default;
    explicit MockBackend(std::vector<Step> script);
    explicit MockBackend(Responder responder);
    MockBackend(std::vector<Step> script, Responder responder);

    void push(Step step);

    ChatReply send(const ChatRequest& request, std::chrono::milliseconds timeout) override;
    [[nodiscard]] std::string name() const override { return "mock"; }

    [[nodiscard]] std::size_t remaining() const;
    [[nodiscard]] std::vector<ChatRequest> requests() const;

  private:
    mutable std::mutex mutex_;
    std::deque<Step> script_;
    Responder responder_;
    std::vector<ChatRequest> requests_;
};

/// Deterministic stand-in for a real model that recognises every prompt this
/// project sends (persona mining, query generation, item selection, shopping
/// sessions) and answers with plausible, well-formed output. Answers are a pure
/// function of (request, seed).
MockBackend::Responder heuristic_responder(std::uint64_t seed);

}  // namespace shopsim
