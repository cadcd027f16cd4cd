#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <random>
#include <string>
#include <vector>

#include "mdtoc/backends.hpp"
#include "mdtoc/chat.hpp"
#include "mdtoc/prompts.hpp"
#include "mdtoc/scripted.hpp"

namespace mdtoc_test {

inline std::filesystem::path repo_dir() { return MDTOC_REPO_DIR; }
inline std::filesystem::path templates_dir() { return repo_dir() / "templates"; }
inline std::filesystem::path fixtures_dir() { return repo_dir() / "fixtures"; }

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("mdtoc_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Deterministic function-of-request backend for property tests.
class CallbackBackend final : public mdtoc::Backend {
public:
  using Fn = std::function<mdtoc::SendResult(const mdtoc::ChatRequest&)>;
  explicit CallbackBackend(Fn fn) : fn_(std::move(fn)) {}
  mdtoc::SendResult send(const mdtoc::ChatRequest& request) override { return fn_(request); }

private:
  Fn fn_;
};

// Clean-run scripted entries: planner emits `n` concepts / `m` sub-concepts,
// generator+evaluator+solver+reviewer behave; everything repeats so any call
// volume is served.
inline std::vector<mdtoc::ScriptEntry> clean_script_entries(int n_concepts, int m_subconcepts,
                                                            const std::string& answer = "42") {
  using mdtoc::Role;
  std::vector<mdtoc::ScriptEntry> entries;
  auto entry = [](Role role, std::string substring, std::string reply,
                  mdtoc::Usage usage) {
    mdtoc::ScriptEntry e;
    e.role = role;
    if (!substring.empty()) e.match_substring = std::move(substring);
    e.reply = std::move(reply);
    e.usage = usage;
    e.repeat = true;
    return e;
  };

  std::string concepts = "Objective: compute the required quantity.\n";
  for (int i = 1; i <= n_concepts; ++i)
    concepts += std::to_string(i) + ". Concept " + std::to_string(i) +
                ": reduce the problem to a smaller calculation.\n";
  entries.push_back(entry(Role::Planner, "state the objective", concepts, {120, 60}));

  std::string subs;
  for (int j = 1; j <= m_subconcepts; ++j)
    subs += std::to_string(j) + ". Sub-concept " + std::to_string(j) +
            ": compute the pieces explicitly. Then combine them.\n";
  entries.push_back(entry(Role::Planner, "sub-concepts", subs, {140, 70}));

  entries.push_back(entry(Role::Generator, "", "Evaluate the next partial result.", {200, 30}));
  entries.push_back(entry(Role::Evaluator, "", "Yes", {220, 2}));
  entries.push_back(
      entry(Role::Solver, "", "Combining the steps.\nFinal answer: " + answer, {240, 20}));
  entries.push_back(entry(Role::Reviewer, "", "Final answer: " + answer, {100, 10}));
  return entries;
}

inline mdtoc::PriceTable test_prices() {
  mdtoc::PriceTable t;
  t.set("gpt-4o", mdtoc::Usd::parse("0.0025"), mdtoc::Usd::parse("0.01"));
  t.set("gpt-4o-mini", mdtoc::Usd::parse("0.00015"), mdtoc::Usd::parse("0.0006"));
  t.set("scripted", mdtoc::Usd::parse("0.001"), mdtoc::Usd::parse("0.002"));
  return t;
}

inline mdtoc::RetryPolicy fast_retry(int max_attempts = 5) {
  mdtoc::RetryPolicy p;
  p.max_attempts = max_attempts;
  p.sleeper = [](std::chrono::milliseconds) {};
  return p;
}

// Hub with every role routed to one backend under id "main".
inline std::unique_ptr<mdtoc::BackendHub> hub_for(std::shared_ptr<mdtoc::Backend> backend,
                                                  const std::string& model = "scripted",
                                                  int max_concurrency = 8) {
  auto hub = std::make_unique<mdtoc::BackendHub>(test_prices(), fast_retry());
  hub->add_backend("main", std::move(backend), max_concurrency);
  for (int i = 0; i < mdtoc::kRoleCount; ++i)
    hub->bind(static_cast<mdtoc::Role>(i), mdtoc::RoleBinding{"main", model, 0.7, 512});
  return hub;
}

}  // namespace mdtoc_test
