#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "mdtoc/errors.hpp"
#include "mdtoc/prompts.hpp"

namespace mdtoc {

struct ChatMessage {
  std::string speaker;  // "system" | "user" | "assistant"
  std::string text;
};

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t total() const { return prompt_tokens + completion_tokens; }
};

// Per-role backend assignment: which backend instance, which model, and how
// to sample.
struct RoleBinding {
  std::string backend_id;
  std::string model;
  double temperature = 0.7;
  int max_output_tokens = 1024;
};

struct ChatRequest {
  Role role = Role::Planner;
  std::string model;
  double temperature = 0.7;
  int max_output_tokens = 1024;
  std::vector<ChatMessage> messages;
};

// One completed (or failed) backend exchange, as recorded in the trace and
// the ledger.
struct ChatExchange {
  Role role = Role::Planner;
  std::string model;
  std::vector<ChatMessage> messages;
  std::string response;
  Usage usage;
  std::chrono::milliseconds latency{0};
  int attempt = 1;
  bool ok = true;
  std::string error;  // set when !ok
};

// Transport outcome, before retry policy is applied.
struct SendResult {
  enum class Status { Ok, Transient, RateLimited, Auth, Fatal };
  Status status = Status::Ok;
  std::string text;
  Usage usage;
  std::string error;

  static SendResult success(std::string text, Usage usage) {
    return {Status::Ok, std::move(text), usage, {}};
  }
  static SendResult transient(std::string why) { return {Status::Transient, {}, {}, std::move(why)}; }
  static SendResult rate_limited(std::string why) {
    return {Status::RateLimited, {}, {}, std::move(why)};
  }
  static SendResult auth(std::string why) { return {Status::Auth, {}, {}, std::move(why)}; }
  static SendResult fatal(std::string why) { return {Status::Fatal, {}, {}, std::move(why)}; }
};

// Chat-completion transport. Implementations must tolerate concurrent send()
// calls from many chains.
class Backend {
public:
  virtual ~Backend() = default;
  virtual SendResult send(const ChatRequest& request) = 0;
};

// Stable request fingerprint used by script matching and trace replay.
// FNV-1a 64 over role, model and messages, with field separators.
inline std::uint64_t fnv1a64(const std::string& data, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string request_fingerprint(const ChatRequest& request) {
  std::uint64_t h = fnv1a64(role_name(request.role));
  h = fnv1a64("\x1f", h);
  h = fnv1a64(request.model, h);
  for (const ChatMessage& m : request.messages) {
    h = fnv1a64("\x1e", h);
    h = fnv1a64(m.speaker, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(m.text, h);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Flattened message text, the surface substring matchers run against.
inline std::string request_text(const ChatRequest& request) {
  std::string out;
  for (const ChatMessage& m : request.messages) {
    if (!out.empty()) out += "\n";
    out += m.text;
  }
  return out;
}

}  // namespace mdtoc
