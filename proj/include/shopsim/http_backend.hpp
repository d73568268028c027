// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <map>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "shopsim/llm_gateway.hpp"

namespace shopsim {

/// scheme://host[:port]/path split into its parts.
struct Endpoint {
    std::string scheme;  // "http" or "https"
    std::string host;
    int port = 0;
    std::string path = "/";

    static Endpoint parse(std::string_view url);
    [[nodiscard]] std::string base() const;  // scheme://host:port
};

/// POSTs a JSON body and returns the parsed JSON response. Connection
/// failures, 429 and 5xx raise TransportError; other non-2xx statuses and
/// unparseable bodies raise BackendError.
nlohmann::json post_json(const Endpoint& endpoint, const nlohmann::json& body, std::chrono::milliseconds timeout,
                         const std::map<std::string, std::string>& headers = {});

// Wire format of the chat protocol:
//   request  {model, messages:[{role, content, tool_calls?, tool_call_id?}], tools?, temperature, max_tokens, seed?}
//   response {choices:[{message:{content, tool_calls}}]} | {message:{...}} | {content, tool_calls}
// Tool calls use {id, type:"function", function:{name, arguments}} where
// arguments may be an object or a JSON-encoded string.
nlohmann::json request_to_wire(const ChatRequest& request, const std::string& model);
nlohmann::json reply_to_wire(const ChatReply& reply);
ChatReply reply_from_wire(const nlohmann::json& response);

struct HttpBackendConfig {
    std::string url;
    std::string api_key;
    std::string model;

    /// Reads LLM_ENDPOINT_URL, LLM_API_KEY and LLM_MODEL. Throws
    /// BackendUnavailable with an actionable message if the URL is unset.
    static HttpBackendConfig from_env();
};

class HttpBackend : public ChatBackend {
  public:
    explicit HttpBackend(HttpBackendConfig config);

    ChatReply send(const ChatRequest& request, std::chrono::milliseconds timeout) override;
    [[nodiscard]] std::string name() const override { return "http:" + config_.model; }

  private:
    HttpBackendConfig config_;
    Endpoint endpoint_;
};

}  // namespace shopsim
