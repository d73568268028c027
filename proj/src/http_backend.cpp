// SPDX-License-Identifier: Apache-2.0
#include "shopsim/http_backend.hpp"

#include <cstdlib>

#include <fmt/format.h>
#include <httplib.h>

#include "shopsim/errors.hpp"

namespace shopsim {

using nlohmann::json;

Endpoint Endpoint::parse(std::string_view url) {
    Endpoint ep;
    const auto sep = url.find("://");
    if (sep == std::string_view::npos) throw ValidationError(fmt::format("endpoint '{}' has no scheme", url));
    ep.scheme = std::string(url.substr(0, sep));
    if (ep.scheme != "http" && ep.scheme != "https")
        throw ValidationError(fmt::format("unsupported scheme '{}' in '{}'", ep.scheme, url));
    auto rest = url.substr(sep + 3);
    const auto slash = rest.find('/');
    auto authority = rest.substr(0, slash);
    ep.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
    const auto colon = authority.rfind(':');
    if (colon != std::string_view::npos) {
        ep.host = std::string(authority.substr(0, colon));
        try {
            ep.port = std::stoi(std::string(authority.substr(colon + 1)));
        } catch (const std::exception&) {
            throw ValidationError(fmt::format("bad port in '{}'", url));
        }
    } else {
        ep.host = std::string(authority);
        ep.port = ep.scheme == "https" ? 443 : 80;
    }
    if (ep.host.empty()) throw ValidationError(fmt::format("endpoint '{}' has no host", url));
    return ep;
}

std::string Endpoint::base() const { return fmt::format("{}://{}:{}", scheme, host, port); }

json post_json(const Endpoint& endpoint, const json& body, std::chrono::milliseconds timeout,
               const std::map<std::string, std::string>& headers) {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (endpoint.scheme == "https")
        throw BackendUnavailable("https endpoints need a build with SHOPSIM_WITH_TLS and OpenSSL");
#endif
    httplib::Client client(endpoint.base());
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);

    auto res = client.Post(endpoint.path, hdrs, body.dump(), "application/json");
    if (!res) throw TransportError(fmt::format("POST {}{} failed: {}", endpoint.base(), endpoint.path, httplib::to_string(res.error())));
    if (res->status == 429 || res->status >= 500)
        throw TransportError(fmt::format("POST {}{} returned HTTP {}", endpoint.base(), endpoint.path, res->status));
    if (res->status < 200 || res->status >= 300)
        throw BackendError(fmt::format("POST {}{} returned HTTP {}: {}", endpoint.base(), endpoint.path, res->status, res->body));
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw BackendError(fmt::format("response from {}{} is not JSON: {}", endpoint.base(), endpoint.path, e.what()));
    }
}

namespace {

json tool_call_to_wire(const ToolCall& call) {
    return json{{"id", call.id}, {"type", "function"}, {"function", {{"name", call.name}, {"arguments", call.arguments.dump()}}}};
}

ToolCall tool_call_from_wire(const json& j) {
    ToolCall call;
    call.id = j.value("id", std::string{});
    const json& fn = j.contains("function") ? j.at("function") : j;
    if (!fn.contains("name") || !fn.at("name").is_string()) throw ProtocolViolation("tool call without a name");
    call.name = fn.at("name").get<std::string>();
    if (fn.contains("arguments")) {
        const auto& args = fn.at("arguments");
        if (args.is_string()) {
            const auto& s = args.get_ref<const std::string&>();
            try {
                call.arguments = s.empty() ? json::object() : json::parse(s);
            } catch (const json::exception&) {
                throw ProtocolViolation(fmt::format("arguments of '{}' are not valid JSON", call.name));
            }
        } else {
            call.arguments = args;
        }
    }
    if (call.arguments.is_null()) call.arguments = json::object();
    if (call.id.empty()) call.id = "call_" + call.name;
    return call;
}

}  // namespace

json request_to_wire(const ChatRequest& request, const std::string& model) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        json jm{{"role", to_string(m.role)}, {"content", m.content}};
        if (m.tool_call) jm["tool_calls"] = json::array({tool_call_to_wire(*m.tool_call)});
        if (m.role == Role::Tool) jm["tool_call_id"] = m.tool_call_id;
        messages.push_back(std::move(jm));
    }
    json body{{"model", model},
              {"messages", messages},
              {"temperature", request.config.temperature},
              {"max_tokens", request.config.max_tokens}};
    if (request.config.seed) body["seed"] = *request.config.seed;
    if (!request.tools.empty()) {
        json tools = json::array();
        for (const auto& t : request.tools) {
            tools.push_back({{"type", "function"},
                             {"function", {{"name", t.name}, {"description", t.description}, {"parameters", t.parameters_schema()}}}});
        }
        body["tools"] = std::move(tools);
    }
    return body;
}

json reply_to_wire(const ChatReply& reply) {
    json message{{"role", "assistant"}, {"content", reply.text}};
    if (!reply.tool_calls.empty()) {
        json calls = json::array();
        for (const auto& c : reply.tool_calls) calls.push_back(tool_call_to_wire(c));
        message["tool_calls"] = std::move(calls);
    }
    return json{{"choices", json::array({{{"message", message}}})}};
}

ChatReply reply_from_wire(const json& response) {
    if (!response.is_object()) throw ProtocolViolation("chat response is not a JSON object");
    const json* message = &response;
    if (response.contains("choices")) {
        const auto& choices = response.at("choices");
        if (!choices.is_array() || choices.empty()) throw ProtocolViolation("chat response has no choices");
        message = &choices.at(0).at("message");
    } else if (response.contains("message")) {
        message = &response.at("message");
    }
    ChatReply reply;
    if (message->contains("content") && message->at("content").is_string())
        reply.text = message->at("content").get<std::string>();
    if (message->contains("tool_calls") && message->at("tool_calls").is_array()) {
        for (const auto& c : message->at("tool_calls")) reply.tool_calls.push_back(tool_call_from_wire(c));
    }
    return reply;
}

HttpBackendConfig HttpBackendConfig::from_env() {
    HttpBackendConfig cfg;
    const char* url = std::getenv("LLM_ENDPOINT_URL");
    if (!url || !*url)
        throw BackendUnavailable(
            "LLM_ENDPOINT_URL is not set: export it to the chat endpoint (e.g. https://host/v1/chat/completions) "
            "or pass --backend mock");
    cfg.url = url;
    if (const char* key = std::getenv("LLM_API_KEY")) cfg.api_key = key;
    if (const char* model = std::getenv("LLM_MODEL")) cfg.model = model;
    return cfg;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)), endpoint_(Endpoint::parse(config_.url)) {}

ChatReply HttpBackend::send(const ChatRequest& request, std::chrono::milliseconds timeout) {
    std::map<std::string, std::string> headers;
    if (!config_.api_key.empty()) headers["Authorization"] = "Bearer " + config_.api_key;
    const json response = post_json(endpoint_, request_to_wire(request, config_.model), timeout, headers);
    return reply_from_wire(response);
}

}  // namespace shopsim
