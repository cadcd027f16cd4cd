#include <atomic>
#include <thread>

#include "doctest.h"
#include "helpers.hpp"
#include "mdtoc/backends.hpp"
#include "mdtoc/scripted.hpp"

using namespace mdtoc;
using mdtoc_test::CallbackBackend;

namespace {

std::vector<ChatMessage> msg(const std::string& text) { return {{"user", text}}; }

}  // namespace

TEST_CASE("transient failures retry with exponential backoff until success") {
  std::atomic<int> calls{0};
  std::vector<std::chrono::milliseconds> delays;
  auto flaky = std::make_shared<CallbackBackend>([&](const ChatRequest&) {
    int n = ++calls;
    if (n <= 2) return SendResult::rate_limited("HTTP 429");
    return SendResult::success("finally", {50, 10});
  });

  RetryPolicy retry;
  retry.max_attempts = 5;
  retry.sleeper = [&delays](std::chrono::milliseconds d) { delays.push_back(d); };
  BackendHub hub(mdtoc_test::test_prices(), retry);
  hub.add_backend("b", flaky);
  hub.bind(Role::Generator, {"b", "scripted", 0.7, 256});

  TraceStream stream(Phase::Monitoring, "t");
  ChatExchange ex = hub.complete(Role::Generator, msg("hello"), Phase::Monitoring, stream,
                                 TemplateId::P2);
  CHECK(ex.attempt == 3);  // 429, 429, 200
  CHECK(ex.response == "finally");
  REQUIRE(delays.size() == 2);
  CHECK(delays[0] == std::chrono::milliseconds(500));
  CHECK(delays[1] == std::chrono::milliseconds(1000));
}

TEST_CASE("rate limiting surfaces after the backoff cap; auth fails fast") {
  auto always429 = std::make_shared<CallbackBackend>(
      [](const ChatRequest&) { return SendResult::rate_limited("HTTP 429"); });
  BackendHub hub(mdtoc_test::test_prices(), mdtoc_test::fast_retry(3));
  hub.add_backend("b", always429);
  hub.bind(Role::Generator, {"b", "scripted", 0.7, 256});
  TraceStream stream(Phase::Monitoring, "t");
  try {
    hub.complete(Role::Generator, msg("x"), Phase::Monitoring, stream, TemplateId::P2);
    FAIL("expected RateLimited");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::RateLimited);
  }

  std::atomic<int> auth_calls{0};
  auto denied = std::make_shared<CallbackBackend>([&](const ChatRequest&) {
    ++auth_calls;
    return SendResult::auth("bad key");
  });
  BackendHub hub2(mdtoc_test::test_prices(), mdtoc_test::fast_retry(5));
  hub2.add_backend("b", denied);
  hub2.bind(Role::Generator, {"b", "scripted", 0.7, 256});
  TraceStream stream2(Phase::Monitoring, "t");
  CHECK_THROWS_AS(
      hub2.complete(Role::Generator, msg("x"), Phase::Monitoring, stream2, TemplateId::P2), Error);
  CHECK(auth_calls == 1);  // no retries on auth failures
}

TEST_CASE("failed exchanges are recorded in the trace with an error tag") {
  auto broken = std::make_shared<CallbackBackend>(
      [](const ChatRequest&) { return SendResult::fatal("boom"); });
  BackendHub hub(mdtoc_test::test_prices(), mdtoc_test::fast_retry(2));
  hub.add_backend("b", broken);
  hub.bind(Role::Solver, {"b", "scripted", 0.7, 256});
  TraceStream stream(Phase::Monitoring, "t");
  CHECK_THROWS_AS(hub.complete(Role::Solver, msg("x"), Phase::Monitoring, stream, TemplateId::P4),
                  Error);
  REQUIRE(stream.lines().size() == 2);  // prompt + failed response
  nlohmann::json response = nlohmann::json::parse(stream.lines()[1]);
  CHECK(response["event"] == "response");
  CHECK(response["error"] == "boom");
  CHECK(response["text"] == "");
  CHECK(response["usage"]["prompt_tokens"] == 0);
}

TEST_CASE("unknown models make costs unknown, never zero") {
  auto ok = std::make_shared<CallbackBackend>(
      [](const ChatRequest&) { return SendResult::success("hi", {100, 10}); });
  BackendHub hub(mdtoc_test::test_prices(), mdtoc_test::fast_retry());
  hub.add_backend("b", ok);
  hub.bind(Role::Planner, {"b", "mystery-model", 0.7, 256});
  TraceStream stream(Phase::Planning, "plan");
  hub.complete(Role::Planner, msg("x"), Phase::Planning, stream, TemplateId::P0);

  auto entries = hub.ledger().entries();
  REQUIRE(entries.size() == 1);
  const auto& entry = entries.begin()->second;
  CHECK(entry.prompt_tokens == 100);
  CHECK_FALSE(entry.cost_known);
  CHECK(hub.ledger().totals().cost_known == false);
}

TEST_CASE("ledger conservation under concurrent completions with faults") {
  std::atomic<int> counter{0};
  auto flaky = std::make_shared<CallbackBackend>([&](const ChatRequest&) {
    int n = counter.fetch_add(1);
    if (n % 7 == 3) return SendResult::transient("hiccup");
    return SendResult::success("ok", {n % 13 + 1, n % 5 + 1});
  });
  BackendHub hub(mdtoc_test::test_prices(), mdtoc_test::fast_retry(4));
  hub.add_backend("b", flaky, /*max_concurrency=*/6);
  for (int i = 0; i < kRoleCount; ++i)
    hub.bind(static_cast<Role>(i), {"b", "scripted", 0.7, 256});

  constexpr int kThreads = 8;
  constexpr int kCallsPerThread = 100;
  std::atomic<std::int64_t> sum_prompt{0}, sum_completion{0}, ok_calls{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] {
      TraceStream stream(Phase::Monitoring, "w" + std::to_string(t));
      for (int i = 0; i < kCallsPerThread; ++i) {
        Role role = static_cast<Role>(i % kRoleCount);
        ChatExchange ex =
            hub.complete(role, msg("call " + std::to_string(i)), Phase::Monitoring, stream,
                         TemplateId::P2);
        sum_prompt += ex.usage.prompt_tokens;
        sum_completion += ex.usage.completion_tokens;
        ++ok_calls;
      }
    });
  }
  for (auto& t : threads) t.join();

  TokenLedger::Totals totals = hub.ledger().totals();
  CHECK(totals.prompt_tokens == sum_prompt.load());
  CHECK(totals.completion_tokens == sum_completion.load());
  CHECK(totals.calls == ok_calls.load());

  // costs equal an exact-decimal recomputation from the price table
  Usd expected = Usd::per_token_cost(sum_prompt.load(), Usd::parse("0.001")) +
                 Usd::per_token_cost(sum_completion.load(), Usd::parse("0.002"));
  CHECK(totals.cost == expected);
}

TEST_CASE("attempt numbers per logical request are 1..n with no gaps") {
  std::vector<int> seen;
  std::atomic<int> n{0};
  auto flaky = std::make_shared<CallbackBackend>([&](const ChatRequest&) {
    seen.push_back(++n);
    if (n < 4) return SendResult::transient("flake");
    return SendResult::success("done", {1, 1});
  });
  BackendHub hub(mdtoc_test::test_prices(), mdtoc_test::fast_retry(5));
  hub.add_backend("b", flaky);
  hub.bind(Role::Fixer, {"b", "scripted", 0.7, 256});
  TraceStream stream(Phase::Monitoring, "t");
  ChatExchange ex = hub.complete(Role::Fixer, msg("x"), Phase::Monitoring, stream, TemplateId::P5);
  CHECK(ex.attempt == 4);
  CHECK(seen == std::vector<int>{1, 2, 3, 4});
}

TEST_CASE("record-mode wrapper emits a script that replays identically") {
  auto live = std::make_shared<ScriptedBackend>(mdtoc_test::clean_script_entries(2, 1, "7"));
  auto recorder = std::make_shared<RecordingBackend>(live);

  ChatRequest p0;
  p0.role = Role::Planner;
  p0.model = "scripted";
  p0.messages = {{"user", "please state the objective"}};
  ChatRequest gen;
  gen.role = Role::Generator;
  gen.model = "scripted";
  gen.messages = {{"user", "produce a step"}};

  SendResult a1 = recorder->send(p0);
  SendResult a2 = recorder->send(gen);

  ScriptedBackend replayed(ScriptedBackend::parse_script(recorder->script()));
  SendResult b1 = replayed.send(p0);
  SendResult b2 = replayed.send(gen);
  CHECK(a1.text == b1.text);
  CHECK(a2.text == b2.text);
  CHECK(a1.usage.prompt_tokens == b1.usage.prompt_tokens);
  CHECK(a2.usage.completion_tokens == b2.usage.completion_tokens);
}

TEST_CASE("the rate limiter caps in-flight sends per backend") {
  std::atomic<int> in_flight{0}, peak{0};
  auto slow = std::make_shared<CallbackBackend>([&](const ChatRequest&) {
    int now = ++in_flight;
    int old = peak.load();
    while (now > old && !peak.compare_exchange_weak(old, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    --in_flight;
    return SendResult::success("ok", {1, 1});
  });
  BackendHub hub(mdtoc_test::test_prices(), mdtoc_test::fast_retry());
  hub.add_backend("b", slow, /*max_concurrency=*/3);
  hub.bind(Role::Generator, {"b", "scripted", 0.7, 256});

  std::vector<std::thread> threads;
  for (int t = 0; t < 10; ++t) {
    threads.emplace_back([&, t] {
      TraceStream stream(Phase::Monitoring, "s" + std::to_string(t));
      hub.complete(Role::Generator, msg("x"), Phase::Monitoring, stream, TemplateId::P2);
    });
  }
  for (auto& t : threads) t.join();
  CHECK(peak.load() <= 3);
}
