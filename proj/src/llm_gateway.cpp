// SPDX-License-Identifier: Apache-2.0
#include "shopsim/llm_gateway.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include <fmt/format.h>

#include "shopsim/errors.hpp"
#include "shopsim/http_backend.hpp"

namespace shopsim {

using nlohmann::json;

std::string_view to_string(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
        case Role::Tool: return "tool";
    }
    return "?";
}

Role parse_role(std::string_view text) {
    if (text == "system") return Role::System;
    if (text == "user") return Role::User;
    if (text == "assistant") return Role::Assistant;
    if (text == "tool") return Role::Tool;
    throw ValidationError(fmt::format("unknown chat role '{}'", text));
}

json ToolSpec::parameters_schema() const {
    json props = json::object();
    json required = json::array();
    for (const auto& p : parameters) {
        json prop{{"type", p.type}, {"description", p.description}};
        if (!p.allowed_values.empty()) prop["enum"] = p.allowed_values;
        props[p.name] = std::move(prop);
        if (p.required) required.push_back(p.name);
    }
    return json{{"type", "object"}, {"properties", props}, {"required", required}};
}

// --- ChatGateway ------------------------------------------------------------

namespace {

void validate_messages(const std::vector<ChatMessage>& messages) {
    if (messages.empty()) throw ValidationError("chat request has no messages");
    std::vector<std::string> call_ids;
    for (const auto& m : messages) {
        if (m.tool_call) call_ids.push_back(m.tool_call->id);
        if (m.role == Role::Tool &&
            std::find(call_ids.begin(), call_ids.end(), m.tool_call_id) == call_ids.end())
            throw ValidationError(fmt::format("tool message references unknown call id '{}'", m.tool_call_id));
    }
}

class SlotGuard {
  public:
    SlotGuard(std::mutex& m, std::condition_variable& cv, std::size_t& in_flight, std::size_t cap,
              std::atomic<std::size_t>& peak)
        : m_(m), cv_(cv), in_flight_(in_flight) {
        std::unique_lock lock(m_);
        cv_.wait(lock, [&] { return in_flight_ < std::max<std::size_t>(cap, 1); });
        ++in_flight_;
        auto prev = peak.load();
        while (prev < in_flight_ && !peak.compare_exchange_weak(prev, in_flight_)) {
        }
    }
    ~SlotGuard() {
        {
            std::lock_guard lock(m_);
            --in_flight_;
        }
        cv_.notify_one();
    }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

  private:
    std::mutex& m_;
    std::condition_variable& cv_;
    std::size_t& in_flight_;
};

}  // namespace

ChatGateway::ChatGateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options)
    : backend_(std::move(backend)), options_(std::move(options)) {
    if (!backend_) throw ValidationError("gateway needs a backend");
    if (options_.retry_budget < 0) throw ValidationError("retry budget must be >= 0");
    if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (options_.audit_dir) std::filesystem::create_directories(*options_.audit_dir);
}

ChatReply ChatGateway::send_with_retry(const ChatRequest& request) {
    validate_messages(request.messages);
    ++calls_;
    SlotGuard slot(slots_mutex_, slots_cv_, in_flight_, options_.max_in_flight, peak_in_flight_);

    auto backoff = options_.initial_backoff;
    std::string last_error;
    for (int attempt = 0; attempt <= options_.retry_budget; ++attempt) {
        if (attempt > 0) {
            options_.sleep(backoff);
            backoff *= 2;
        }
        try {
            ChatReply reply = backend_->send(request, options_.timeout);
            audit(request, &reply, {});
            return reply;
        } catch (const TransportError& e) {
            last_error = e.what();
            audit(request, nullptr, last_error);
        } catch (const std::exception& e) {
            audit(request, nullptr, e.what());
            throw;
        }
    }
    throw BackendUnavailable(fmt::format("backend '{}' unavailable after {} attempt(s): {}", backend_->name(),
                                         options_.retry_budget + 1, last_error));
}

std::string ChatGateway::complete(const std::vector<ChatMessage>& messages, const GenerationConfig& config) {
    ChatReply reply = send_with_retry(ChatRequest{messages, {}, config});
    if (reply.text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw EmptyResponse(fmt::format("backend '{}' returned an empty completion", backend_->name()));
    return std::move(reply.text);
}

ToolTurn ChatGateway::complete_with_tools(const std::vector<ChatMessage>& messages, const std::vector<ToolSpec>& tools,
                                          const GenerationConfig& config) {
    if (tools.empty()) throw ValidationError("complete_with_tools needs at least one tool");
    for (std::size_t i = 0; i < tools.size(); ++i) {
        for (std::size_t j = i + 1; j < tools.size(); ++j) {
            if (tools[i].name == tools[j].name)
                throw ValidationError(fmt::format("duplicate tool name '{}'", tools[i].name));
        }
    }
    ChatReply reply = send_with_retry(ChatRequest{messages, tools, config});
    if (!reply.tool_calls.empty()) {
        ToolCall call = std::move(reply.tool_calls.front());
        const bool offered = std::any_of(tools.begin(), tools.end(), [&](const ToolSpec& t) { return t.name == call.name; });
        if (!offered) throw ProtocolViolation(fmt::format("backend called unknown tool '{}'", call.name));
        if (!call.arguments.is_object()) throw ProtocolViolation(fmt::format("arguments of '{}' are not an object", call.name));
        return call;
    }
    if (reply.text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw EmptyResponse(fmt::format("backend '{}' returned neither text nor a tool call", backend_->name()));
    return std::move(reply.text);
}

void ChatGateway::audit(const ChatRequest& request, const ChatReply* reply, const std::string& error) {
    if (!options_.audit_dir) return;
    json entry{{"backend", backend_->name()}, {"request", request_to_wire(request, "")}};
    if (reply) {
        entry["reply"] = reply_to_wire(*reply);
    } else {
        entry["error"] = error;
    }
    std::lock_guard lock(audit_mutex_);
    entry["seq"] = audit_seq_++;
    std::ofstream out(*options_.audit_dir / "llm_audit.jsonl", std::ios::app);
    out << entry.dump() << '\n';
}

// --- MockBackend ------------------------------------------------------------

MockBackend::Step MockBackend::text(std::string reply) { return Step{ChatReply{std::move(reply), {}}, {}}; }

MockBackend::Step MockBackend::tool(std::string name, json arguments, std::string id) {
    if (id.empty()) id = "call_" + name;
    return Step{ChatReply{{}, {ToolCall{std::move(id), std::move(name), std::move(arguments)}}}, {}};
}

MockBackend::Step MockBackend::transport_failure(std::string message) { return Step{std::nullopt, std::move(message)}; }

MockBackend::MockBackend(std::vector<Step> script) : script_(script.begin(), script.end()) {}

MockBackend::MockBackend(Responder responder) : responder_(std::move(responder)) {}

MockBackend::MockBackend(std::vector<Step> script, Responder responder)
    : script_(script.begin(), script.end()), responder_(std::move(responder)) {}

void MockBackend::push(Step step) {
    std::lock_guard lock(mutex_);
    script_.push_back(std::move(step));
}

ChatReply MockBackend::send(const ChatRequest& request, std::chrono::milliseconds) {
    Responder responder;
    {
        std::lock_guard lock(mutex_);
        requests_.push_back(request);
        if (!script_.empty()) {
            Step step = std::move(script_.front());
            script_.pop_front();
            if (!step.reply) throw TransportError(step.failure);
            return std::move(*step.reply);
        }
        responder = responder_;
    }
    if (!responder) throw BackendUnavailable("mock script exhausted");
    return responder(request);
}

std::size_t MockBackend::remaining() const {
    std::lock_guard lock(mutex_);
    return script_.size();
}

std::vector<ChatRequest> MockBackend::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

}  // namespace shopsim
