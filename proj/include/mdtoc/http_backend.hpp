#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include "httplib.h"
#include "json.hpp"
#include "mdtoc/chat.hpp"

namespace mdtoc {

// OpenAI-compatible chat-completions client. Works against any gateway that
// speaks the same wire format; the base URL, path, and key env var are all
// configuration.
class HttpBackend final : public Backend {
public:
  struct Options {
    std::string base_url;                        // e.g. "https://api.openai.com"
    std::string chat_path = "/v1/chat/completions";
    std::string api_key_env = "OPENAI_API_KEY";  // empty = send no auth header
    int timeout_seconds = 120;
  };

  explicit HttpBackend(Options options) : options_(std::move(options)) {
    if (options_.base_url.empty()) raise(Errc::ConfigError, "http backend needs a base_url");
  }

  SendResult send(const ChatRequest& request) override {
    nlohmann::json messages = nlohmann::json::array();
    for (const ChatMessage& m : request.messages)
      messages.push_back({{"role", m.speaker}, {"content", m.text}});
    nlohmann::json body{{"model", request.model},
                        {"messages", messages},
                        {"temperature", request.temperature},
                        {"max_tokens", request.max_output_tokens}};

    // httplib clients are not safe for concurrent requests; one per call.
    httplib::Client client(options_.base_url);
    client.set_connection_timeout(options_.timeout_seconds, 0);
    client.set_read_timeout(options_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!options_.api_key_env.empty()) {
      const char* key = std::getenv(options_.api_key_env.c_str());
      if (!key || !*key)
        return SendResult::auth("environment variable " + options_.api_key_env + " is not set");
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    auto res = client.Post(options_.chat_path, headers, body.dump(), "application/json");
    if (!res) return SendResult::transient("transport error: " + httplib::to_string(res.error()));
    if (res->status == 401 || res->status == 403)
      return SendResult::auth("HTTP " + std::to_string(res->status) + ": " + res->body);
    if (res->status == 429)
      return SendResult::rate_limited("HTTP 429: " + res->body);
    if (res->status >= 500)
      return SendResult::transient("HTTP " + std::to_string(res->status) + ": " + res->body);
    if (res->status != 200)
      return SendResult::fatal("HTTP " + std::to_string(res->status) + ": " + res->body);

    nlohmann::json doc = nlohmann::json::parse(res->body, nullptr, false);
    if (doc.is_discarded()) return SendResult::fatal("response body is not valid JSON");
    try {
      std::string text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
      Usage usage;
      if (doc.contains("usage")) {
        usage.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
        usage.completion_tokens = doc["usage"].value("completion_tokens", 0);
      }
      return SendResult::success(std::move(text), usage);
    } catch (const nlohmann::json::exception& e) {
      return SendResult::fatal(std::string("unexpected response shape: ") + e.what());
    }
  }

private:
  Options options_;
};

}  // namespace mdtoc
