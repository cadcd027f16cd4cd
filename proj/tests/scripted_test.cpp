#include "doctest.h"
#include "helpers.hpp"
#include "mdtoc/scripted.hpp"

using namespace mdtoc;

namespace {

ChatRequest request_for(Role role, const std::string& text) {
  ChatRequest r;
  r.role = role;
  r.model = "scripted";
  r.messages = {{"user", text}};
  return r;
}

}  // namespace

TEST_CASE("ordered entries are consumed strictly in order") {
  std::vector<ScriptEntry> entries;
  for (int i = 0; i < 7; ++i) {
    ScriptEntry e;
    e.reply = "reply " + std::to_string(i);
    e.usage = {10, 5};
    entries.push_back(e);
  }
  ScriptedBackend backend(entries);
  for (int i = 0; i < 7; ++i) {
    SendResult r = backend.send(request_for(Role::Generator, "anything"));
    CHECK(r.status == SendResult::Status::Ok);
    CHECK(r.text == "reply " + std::to_string(i));
    CHECK(r.usage.prompt_tokens == 10);
  }
  // the 8th call exhausts the script
  try {
    backend.send(request_for(Role::Generator, "one too many"));
    FAIL("expected ScriptExhausted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ScriptExhausted);
    CHECK(std::string(e.what()).find("generator") != std::string::npos);
  }
}

TEST_CASE("hash-keyed entries answer exactly their request") {
  ChatRequest req = request_for(Role::Solver, "the one true prompt");
  ScriptEntry e;
  e.role = Role::Solver;
  e.match_hash = request_fingerprint(req);
  e.reply = "matched";
  ScriptedBackend backend({e});
  CHECK(backend.send(req).text == "matched");
  CHECK_THROWS_AS(backend.send(request_for(Role::Solver, "some other prompt")), Error);
}

TEST_CASE("substring and role filters narrow matching; repeat entries persist") {
  ScriptEntry gen;
  gen.role = Role::Generator;
  gen.match_substring = "step";
  gen.repeat = true;
  gen.reply = "a calculation";
  ScriptEntry eval;
  eval.role = Role::Evaluator;
  eval.repeat = true;
  eval.reply = "Yes";
  ScriptedBackend backend({gen, eval});

  for (int i = 0; i < 5; ++i) {
    CHECK(backend.send(request_for(Role::Generator, "produce the next step")).text ==
          "a calculation");
    CHECK(backend.send(request_for(Role::Evaluator, "judge this")).text == "Yes");
  }
  // generator request without the keyword falls through to nothing
  CHECK_THROWS_AS(backend.send(request_for(Role::Generator, "no keyword")), Error);
}

TEST_CASE("script files parse and reject malformed documents") {
  auto backend = ScriptedBackend::from_file(
      (mdtoc_test::fixtures_dir() / "fig4_script.json").string());
  SendResult r = backend->send(request_for(Role::Planner, "state the objective please"));
  CHECK(r.text.find("Objective:") != std::string::npos);

  mdtoc_test::TempDir tmp("script");
  std::ofstream(tmp.path / "bad.json") << "{\"entries\": [{\"no_reply\": 1}]}";
  CHECK_THROWS_AS(ScriptedBackend::from_file((tmp.path / "bad.json").string()), Error);
  std::ofstream(tmp.path / "notjson.json") << "nope";
  try {
    ScriptedBackend::from_file((tmp.path / "notjson.json").string());
    FAIL("expected ScriptParseError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ScriptParseError);
  }
}

TEST_CASE("scripted backend is referentially transparent") {
  auto run = [] {
    std::vector<std::string> replies;
    ScriptedBackend backend(mdtoc_test::clean_script_entries(2, 2));
    replies.push_back(backend.send(request_for(Role::Planner, "state the objective")).text);
    replies.push_back(backend.send(request_for(Role::Planner, "propose sub-concepts")).text);
    replies.push_back(backend.send(request_for(Role::Generator, "go")).text);
    replies.push_back(backend.send(request_for(Role::Evaluator, "judge")).text);
    return replies;
  };
  CHECK(run() == run());
}
