#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mdtoc/chat.hpp"
#include "mdtoc/ledger.hpp"
#include "mdtoc/trace.hpp"

namespace mdtoc {

// Exponential backoff for transient transport failures. The sleeper is
// injectable so fault-injection tests run without wall-clock delays.
struct RetryPolicy {
  std::chrono::milliseconds base_delay{500};
  double factor = 2.0;
  int max_attempts = 5;
  std::function<void(std::chrono::milliseconds)> sleeper =
      [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };

  std::chrono::milliseconds delay_for(int attempt) const {  // attempt is 1-based
    double d = static_cast<double>(base_delay.count());
    for (int i = 1; i < attempt; ++i) d *= factor;
    return std::chrono::milliseconds(static_cast<long long>(d));
  }
};

// Caps in-flight requests per backend id.
class RateLimiter {
public:
  explicit RateLimiter(int max_in_flight) : slots_(max_in_flight < 1 ? 1 : max_in_flight) {}

  void acquire() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [this] { return in_flight_ < slots_; });
    ++in_flight_;
  }

  void release() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      --in_flight_;
    }
    cv_.notify_one();
  }

  struct Guard {
    RateLimiter& limiter;
    explicit Guard(RateLimiter& l) : limiter(l) { limiter.acquire(); }
    ~Guard() { limiter.release(); }
  };

private:
  int slots_;
  int in_flight_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
};

// Routes role-tagged completions to their bound backend, applying retries,
// rate limiting, and token/cost accounting. The ledger update and the trace
// append for an exchange happen under one lock, so the two records never
// drift apart.
class BackendHub {
public:
  BackendHub(PriceTable prices, RetryPolicy retry = {})
      : prices_(std::move(prices)), retry_(std::move(retry)) {}

  void add_backend(const std::string& id, std::shared_ptr<Backend> backend,
                   int max_concurrency = 8) {
    backends_[id] = std::move(backend);
    limiters_[id] = std::make_unique<RateLimiter>(max_concurrency);
  }

  void bind(Role role, RoleBinding binding) {
    if (binding.model.empty())
      raise(Errc::ConfigError, std::string("empty model for role ") + role_name(role));
    bindings_[static_cast<int>(role)] = std::move(binding);
    bound_[static_cast<int>(role)] = true;
  }

  const RoleBinding& binding(Role role) const {
    if (!bound_[static_cast<int>(role)])
      raise(Errc::ConfigError, std::string("role ") + role_name(role) + " is not bound");
    return bindings_[static_cast<int>(role)];
  }

  void require_all_roles_bound() const {
    for (int i = 0; i < kRoleCount; ++i) binding(static_cast<Role>(i));
  }

  TokenLedger& ledger() { return ledger_; }
  const TokenLedger& ledger() const { return ledger_; }
  const PriceTable& prices() const { return prices_; }

  // One logical completion: render already happened, the caller passes final
  // messages. Emits the prompt event, runs the retry loop, then records the
  // response event and the ledger entry together.
  ChatExchange complete(Role role, const std::vector<ChatMessage>& messages, Phase phase,
                        TraceStream& stream, TemplateId template_id) {
    const RoleBinding& b = binding(role);
    auto backend_it = backends_.find(b.backend_id);
    if (backend_it == backends_.end())
      raise(Errc::ConfigError, "no backend registered under id '" + b.backend_id + "'");

    ChatRequest request{role, b.model, b.temperature, b.max_output_tokens, messages};
    stream.emit_prompt(request, template_id);

    ChatExchange ex;
    ex.role = role;
    ex.model = b.model;
    ex.messages = messages;

    SendResult last;
    auto started = std::chrono::steady_clock::now();
    {
      RateLimiter::Guard guard(*limiters_.at(b.backend_id));
      for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
        ex.attempt = attempt;
        try {
          last = backend_it->second->send(request);
        } catch (Error&) {
          // Script faults and similar are not transport flakes; record the
          // failed exchange before propagating.
          ex.ok = false;
          ex.error = "backend exception";
          record_failure(ex, phase, stream);
          throw;
        }
        if (last.status == SendResult::Status::Ok) break;
        if (last.status == SendResult::Status::Auth || last.status == SendResult::Status::Fatal)
          break;
        if (attempt < retry_.max_attempts) retry_.sleeper(retry_.delay_for(attempt));
      }
    }
    ex.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);

    if (last.status == SendResult::Status::Ok) {
      ex.response = last.text;
      ex.usage = last.usage;
      std::lock_guard<std::mutex> lock(commit_mu_);
      ledger_.record(phase, role, b.model, ex.usage, prices_);
      stream.emit_response(ex);
      return ex;
    }

    ex.ok = false;
    ex.error = last.error;
    record_failure(ex, phase, stream);
    switch (last.status) {
      case SendResult::Status::Auth: raise(Errc::AuthError, last.error);
      case SendResult::Status::RateLimited: raise(Errc::RateLimited, last.error);
      default: raise(Errc::BackendError, last.error);
    }
  }

private:
  void record_failure(ChatExchange& ex, Phase phase, TraceStream& stream) {
    std::lock_guard<std::mutex> lock(commit_mu_);
    ledger_.record_failure(phase, ex.role, ex.model);
    stream.emit_response(ex);
  }

  PriceTable prices_;
  RetryPolicy retry_;
  TokenLedger ledger_;
  std::mutex commit_mu_;
  std::map<std::string, std::shared_ptr<Backend>> backends_;
  std::map<std::string, std::unique_ptr<RateLimiter>> limiters_;
  RoleBinding bindings_[kRoleCount];
  bool bound_[kRoleCount] = {false, false, false, false, false, false};
};

}  // namespace mdtoc
