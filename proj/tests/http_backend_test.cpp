#include <atomic>
#include <thread>

#include "doctest.h"
#include "helpers.hpp"
#include "httplib.h"
#include "mdtoc/backends.hpp"
#include "mdtoc/http_backend.hpp"

using namespace mdtoc;

namespace {

// In-process OpenAI-compatible endpoint with programmable behavior per call.
struct LocalServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> calls{0};

  explicit LocalServer(std::function<void(int, const httplib::Request&, httplib::Response&)> fn) {
    server.Post("/v1/chat/completions",
                [this, fn](const httplib::Request& req, httplib::Response& res) {
                  fn(calls.fetch_add(1), req, res);
                });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~LocalServer() {
    server.stop();
    thread.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

void reply_completion(httplib::Response& res, const std::string& text, int prompt_tokens,
                      int completion_tokens) {
  nlohmann::json body{
      {"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}},
      {"usage", {{"prompt_tokens", prompt_tokens}, {"completion_tokens", completion_tokens}}}};
  res.set_content(body.dump(), "application/json");
}

ChatRequest simple_request() {
  ChatRequest req;
  req.role = Role::Generator;
  req.model = "test-model";
  req.messages = {{"user", "say hi"}};
  return req;
}

}  // namespace

TEST_CASE("http backend round-trips an OpenAI-style completion") {
  LocalServer server([](int, const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body = nlohmann::json::parse(req.body);
    CHECK(body["model"] == "test-model");
    CHECK(body["messages"][0]["role"] == "user");
    reply_completion(res, "hello back", 21, 7);
  });

  HttpBackend backend({server.base_url(), "/v1/chat/completions", "", 10});
  SendResult r = backend.send(simple_request());
  REQUIRE(r.status == SendResult::Status::Ok);
  CHECK(r.text == "hello back");
  CHECK(r.usage.prompt_tokens == 21);
  CHECK(r.usage.completion_tokens == 7);
}

TEST_CASE("429 twice then 200 succeeds with attempt=3 through the hub") {
  LocalServer server([](int call, const httplib::Request&, httplib::Response& res) {
    if (call < 2) {
      res.status = 429;
      res.set_content("slow down", "text/plain");
      return;
    }
    reply_completion(res, "eventually", 10, 3);
  });

  BackendHub hub(mdtoc_test::test_prices(), mdtoc_test::fast_retry(5));
  hub.add_backend("live", std::make_shared<HttpBackend>(
                              HttpBackend::Options{server.base_url(), "/v1/chat/completions", "",
                                                   10}));
  hub.bind(Role::Generator, {"live", "test-model", 0.7, 128});
  TraceStream stream(Phase::Monitoring, "t");
  ChatExchange ex =
      hub.complete(Role::Generator, {{"user", "x"}}, Phase::Monitoring, stream, TemplateId::P2);
  CHECK(ex.attempt == 3);
  CHECK(ex.response == "eventually");
}

TEST_CASE("auth failures surface without retries") {
  LocalServer server([](int, const httplib::Request&, httplib::Response& res) {
    res.status = 401;
    res.set_content("{\"error\": \"bad key\"}", "application/json");
  });
  HttpBackend backend({server.base_url(), "/v1/chat/completions", "", 10});
  CHECK(backend.send(simple_request()).status == SendResult::Status::Auth);
  CHECK(server.calls == 1);

  // a configured-but-unset key env var is an auth failure before any request
  HttpBackend keyless({server.base_url(), "/v1/chat/completions",
                       "MDTOC_TEST_KEY_THAT_DOES_NOT_EXIST", 10});
  CHECK(keyless.send(simple_request()).status == SendResult::Status::Auth);
  CHECK(server.calls == 1);
}

TEST_CASE("server errors are transient; malformed bodies are fatal") {
  LocalServer server([](int call, const httplib::Request&, httplib::Response& res) {
    if (call == 0) {
      res.status = 503;
      res.set_content("down", "text/plain");
    } else if (call == 1) {
      res.set_content("not json", "application/json");
    } else {
      res.status = 418;
      res.set_content("teapot", "text/plain");
    }
  });
  HttpBackend backend({server.base_url(), "/v1/chat/completions", "", 10});
  CHECK(backend.send(simple_request()).status == SendResult::Status::Transient);
  CHECK(backend.send(simple_request()).status == SendResult::Status::Fatal);
  CHECK(backend.send(simple_request()).status == SendResult::Status::Fatal);
}

TEST_CASE("an unreachable host is a transient transport failure") {
  HttpBackend backend({"http://127.0.0.1:1", "/v1/chat/completions", "", 1});
  CHECK(backend.send(simple_request()).status == SendResult::Status::Transient);
}
