#pragma once

#include <atomic>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "mdtoc/config.hpp"
#include "mdtoc/datasets.hpp"
#include "mdtoc/engine.hpp"
#include "mdtoc/http_backend.hpp"
#include "mdtoc/scripted.hpp"
#include "mdtoc/trace.hpp"

namespace mdtoc {

struct ProblemRow {
  std::string id;
  std::string answer;
  bool correct = false;
  bool needs_manual_review = false;
  std::string topic;
  std::string error;  // non-empty when the pipeline failed for this problem
  std::string predicted;
  std::string gold;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t calls = 0;
  std::optional<Usd> cost;
  std::int64_t wall_ms = 0;
};

struct RunReport {
  std::vector<ProblemRow> rows;

  int problems() const { return static_cast<int>(rows.size()); }
  int correct() const {
    int n = 0;
    for (const auto& r : rows) n += r.correct ? 1 : 0;
    return n;
  }
  int failures() const {
    int n = 0;
    for (const auto& r : rows) n += r.error.empty() ? 0 : 1;
    return n;
  }
  double accuracy() const {
    return rows.empty() ? 0.0 : static_cast<double>(correct()) / static_cast<double>(rows.size());
  }

  nlohmann::json to_json() const {
    nlohmann::json jrows = nlohmann::json::array();
    std::int64_t tokens = 0, calls = 0;
    Usd total_cost;
    bool cost_known = true;
    std::map<std::string, std::pair<int, int>> per_topic;  // topic -> (problems, correct)
    int manual = 0;
    for (const ProblemRow& r : rows) {
      nlohmann::json jr{{"id", r.id},
                        {"answer", r.answer},
                        {"correct", r.correct},
                        {"needs_manual_review", r.needs_manual_review},
                        {"topic", r.topic},
                        {"error", r.error},
                        {"gold", r.gold},
                        {"prompt_tokens", r.prompt_tokens},
                        {"completion_tokens", r.completion_tokens},
                        {"calls", r.calls},
                        {"wall_ms", r.wall_ms}};
      jr["cost_usd"] = r.cost ? nlohmann::json(r.cost->str()) : nlohmann::json("unknown");
      jrows.push_back(jr);
      tokens += r.prompt_tokens + r.completion_tokens;
      calls += r.calls;
      if (r.cost)
        total_cost += *r.cost;
      else
        cost_known = false;
      auto& t = per_topic[r.topic.empty() ? "(none)" : r.topic];
      ++t.first;
      t.second += r.correct ? 1 : 0;
      manual += r.needs_manual_review ? 1 : 0;
    }
    nlohmann::json topics = nlohmann::json::object();
    for (const auto& [topic, pc] : per_topic)
      topics[topic] = {{"problems", pc.first},
                       {"correct", pc.second},
                       {"accuracy", pc.first == 0 ? 0.0
                                                  : static_cast<double>(pc.second) /
                                                        static_cast<double>(pc.first)}};
    nlohmann::json aggregates{
        {"problems", problems()},
        {"correct", correct()},
        {"accuracy", accuracy()},
        {"failures", failures()},
        {"needs_manual_review", manual},
        {"per_topic", topics},
        {"total_tokens", tokens},
        {"total_calls", calls},
        {"avg_tokens_per_response",
         calls == 0 ? 0.0 : static_cast<double>(tokens) / static_cast<double>(calls)}};
    aggregates["total_cost_usd"] =
        cost_known ? nlohmann::json(total_cost.str()) : nlohmann::json("unknown");
    aggregates["cost_per_case_usd"] =
        cost_known && !rows.empty()
            ? nlohmann::json(Usd::from_pico(total_cost.pico() / rows.size()).str())
            : nlohmann::json("unknown");
    return nlohmann::json{{"problems", jrows}, {"aggregates", aggregates}};
  }

  static RunReport from_json(const nlohmann::json& j) {
    RunReport report;
    try {
      for (const auto& jr : j.at("problems")) {
        ProblemRow r;
        r.id = jr.at("id").get<std::string>();
        r.answer = jr.at("answer").get<std::string>();
        r.correct = jr.at("correct").get<bool>();
        r.needs_manual_review = jr.value("needs_manual_review", false);
        r.topic = jr.value("topic", "");
        r.error = jr.value("error", "");
        r.gold = jr.value("gold", "");
        r.prompt_tokens = jr.value("prompt_tokens", 0);
        r.completion_tokens = jr.value("completion_tokens", 0);
        r.calls = jr.value("calls", 0);
        if (jr.contains("cost_usd") && jr["cost_usd"].is_string() &&
            jr["cost_usd"].get<std::string>() != "unknown")
          r.cost = Usd::parse(jr["cost_usd"].get<std::string>());
        r.wall_ms = jr.value("wall_ms", 0);
        report.rows.push_back(std::move(r));
      }
    } catch (const nlohmann::json::exception& e) {
      raise(Errc::SchemaError, std::string("malformed report: ") + e.what());
    }
    return report;
  }
};

namespace runner_detail {

inline std::string sanitize_id(const std::string& id) {
  std::string out;
  for (char c : id)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out.empty() ? "problem" : out;
}

inline std::shared_ptr<Backend> make_backend(const BackendSpec& spec) {
  if (spec.type == BackendSpec::Type::Http) {
    HttpBackend::Options opt;
    opt.base_url = spec.base_url;
    opt.chat_path = spec.chat_path;
    opt.api_key_env = spec.api_key_env;
    opt.timeout_seconds = spec.timeout_seconds;
    return std::make_shared<HttpBackend>(opt);
  }
  return ScriptedBackend::from_file(spec.script_path);
}

// Scripted consumption state is per problem, so every problem gets fresh
// backend instances.
inline std::unique_ptr<BackendHub> make_hub(const RunConfig& cfg, const PriceTable& prices,
                                            RetryPolicy retry) {
  auto hub = std::make_unique<BackendHub>(prices, std::move(retry));
  for (const auto& [id, spec] : cfg.backends)
    hub->add_backend(id, make_backend(spec), spec.max_concurrency);
  for (const auto& [name, binding] : cfg.roles) hub->bind(role_from_name(name), binding);
  return hub;
}

inline std::unique_ptr<BackendHub> make_replay_hub(const RunConfig& cfg, const PriceTable& prices,
                                                   std::vector<ScriptEntry> entries) {
  auto hub = std::make_unique<BackendHub>(prices, RetryPolicy{});
  auto scripted = std::make_shared<ScriptedBackend>(std::move(entries));
  for (const auto& [id, spec] : cfg.backends) hub->add_backend(id, scripted, spec.max_concurrency);
  for (const auto& [name, binding] : cfg.roles) hub->bind(role_from_name(name), binding);
  return hub;
}

struct OneRun {
  ProblemRow row;
  ConceptTree tree;
};

inline OneRun run_one(const RunConfig& cfg, const TemplateSet& templates,
                      const PriceTable& prices, const BenchProblem& problem, BackendHub& hub,
                      TraceWriter& writer, int chain_concurrency) {
  OneRun out;
  out.row.id = problem.id;
  out.row.topic = problem.topic.value_or("");
  out.row.gold = problem.gold_answer.value_or("");

  EngineOptions opt;
  opt.chain_concurrency = chain_concurrency;
  Engine engine(hub, templates, writer, opt);

  auto t0 = std::chrono::steady_clock::now();
  try {
    RunResult result = engine.run_pipeline(problem.id, problem.statement, cfg.planning,
                                           cfg.monitoring);
    out.row.answer = result.answer.answer;
    out.tree = std::move(result.tree);
    GradeRow g = grade(problem, out.row.answer);
    out.row.correct = g.correct;
    out.row.needs_manual_review = g.needs_manual_review;
    out.row.predicted = out.row.answer;
  } catch (const Error& e) {
    // A failed problem scores as incorrect; the sweep keeps going.
    out.row.error = (e.phase().empty() ? "" : "[" + e.phase() + "] ") + e.what();
  }
  out.row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();

  TokenLedger::Totals totals = hub.ledger().totals();
  out.row.prompt_tokens = totals.prompt_tokens;
  out.row.completion_tokens = totals.completion_tokens;
  out.row.calls = totals.calls;
  if (totals.cost_known) out.row.cost = totals.cost;
  return out;
}

}  // namespace runner_detail

// Executes the pipeline for every problem in the configured dataset, grades
// the answers, and writes traces, trees, a grades CSV, per-problem ledgers,
// and the run report under cfg.trace_dir.
inline RunReport cmd_run(const RunConfig& cfg, RetryPolicy retry = {}) {
  namespace fs = std::filesystem;
  std::vector<BenchProblem> problems =
      load_dataset(cfg.dataset_path, cfg.dataset_kind, cfg.first_index);
  TemplateSet templates = TemplateSet::load(cfg.templates_dir);
  PriceTable prices = PriceTable::from_file(cfg.price_table_path.string());

  fs::create_directories(cfg.trace_dir);
  {
    std::ofstream out(cfg.trace_dir / "run_config.json");
    out << cfg.to_json().dump(2) << '\n';
  }

  std::vector<runner_detail::OneRun> runs(problems.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < problems.size(); i = next.fetch_add(1)) {
      const BenchProblem& p = problems[i];
      auto hub = runner_detail::make_hub(cfg, prices, retry);
      FileTraceWriter writer(cfg.trace_dir /
                             (runner_detail::sanitize_id(p.id) + ".jsonl"));
      runs[i] = runner_detail::run_one(cfg, templates, prices, p, *hub, writer,
                                       cfg.concurrency);
    }
  };
  int workers = std::min<int>(cfg.concurrency, static_cast<int>(problems.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  RunReport report;
  std::vector<GradeRow> grade_rows;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    runner_detail::OneRun& r = runs[i];
    if (r.row.error.empty()) {
      std::ofstream tree_out(cfg.trace_dir /
                             (runner_detail::sanitize_id(r.row.id) + ".tree.json"));
      tree_out << r.tree.serialize() << '\n';
    }
    GradeRow g;
    g.problem_id = r.row.id;
    g.predicted = r.row.answer;
    g.gold = r.row.gold;
    g.correct = r.row.correct;
    g.topic = r.row.topic;
    grade_rows.push_back(g);
    report.rows.push_back(r.row);
  }
  write_grades_csv(cfg.trace_dir / "grades.csv", grade_rows);
  {
    std::ofstream out(cfg.trace_dir / "report.json");
    out << report.to_json().dump(2) << '\n';
  }
  return report;
}

struct ReplayOutcome {
  RunReport report;
  // ids whose replayed answer differs from the original report
  std::vector<std::string> diffs;
};

// Re-executes a recorded run against trace-derived scripted backends.
// Untouched traces reproduce the original answers; edited replies show up in
// the diff list. Replay is sequential so hash-keyed replies are consumed in
// recorded order.
inline ReplayOutcome cmd_replay(const std::filesystem::path& trace_dir,
                                const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  if (!fs::exists(trace_dir / "run_config.json"))
    raise(Errc::TraceCorrupt, "no run_config.json in " + trace_dir.string());
  RunConfig cfg = load_run_config(trace_dir / "run_config.json");
  RunReport original;
  {
    std::ifstream in(trace_dir / "report.json");
    if (!in) raise(Errc::TraceCorrupt, "no report.json in " + trace_dir.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) raise(Errc::TraceCorrupt, "report.json is not valid JSON");
    original = RunReport::from_json(j);
  }

  std::vector<BenchProblem> problems =
      load_dataset(cfg.dataset_path, cfg.dataset_kind, cfg.first_index);
  TemplateSet templates = TemplateSet::load(cfg.templates_dir);
  PriceTable prices = PriceTable::from_file(cfg.price_table_path.string());
  fs::create_directories(out_dir);

  ReplayOutcome outcome;
  std::map<std::string, std::string> original_answers;
  for (const ProblemRow& r : original.rows) original_answers[r.id] = r.answer;

  for (const BenchProblem& p : problems) {
    fs::path trace_file = trace_dir / (runner_detail::sanitize_id(p.id) + ".jsonl");
    std::vector<TraceRecord> records = TraceReader::read_file(trace_file);
    auto hub = runner_detail::make_replay_hub(cfg, prices, TraceReader::derive_script(records));
    FileTraceWriter writer(out_dir / (runner_detail::sanitize_id(p.id) + ".jsonl"));
    runner_detail::OneRun run =
        runner_detail::run_one(cfg, templates, prices, p, *hub, writer, /*chain_concurrency=*/1);
    outcome.report.rows.push_back(run.row);
    auto it = original_answers.find(p.id);
    if (it == original_answers.end() || it->second != run.row.answer)
      outcome.diffs.push_back(p.id);
  }

  {
    std::ofstream out(out_dir / "report.json");
    out << outcome.report.to_json().dump(2) << '\n';
  }
  {
    nlohmann::json diff{{"differing_ids", outcome.diffs},
                        {"identical", outcome.diffs.empty()}};
    std::ofstream out(out_dir / "replay_diff.json");
    out << diff.dump(2) << '\n';
  }
  return outcome;
}

// Side-by-side accuracy/cost/token comparison across report files, plus the
// per-topic breakdown.
inline std::string cmd_report(const std::vector<std::filesystem::path>& report_files) {
  if (report_files.empty()) raise(Errc::ConfigError, "cmd_report needs at least one report");
  std::vector<std::pair<std::string, nlohmann::json>> reports;
  for (const auto& f : report_files) {
    std::ifstream in(f);
    if (!in) raise(Errc::ConfigError, "cannot open report " + f.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) raise(Errc::ConfigError, "report is not valid JSON: " + f.string());
    reports.emplace_back(f.stem().string(), RunReport::from_json(j).to_json());
  }

  std::ostringstream out;
  auto row = [&out, &reports](const std::string& label, auto getter) {
    out << label;
    for (const auto& [name, j] : reports) out << '\t' << getter(j["aggregates"]);
    out << '\n';
  };
  out << "metric";
  for (const auto& [name, j] : reports) out << '\t' << name;
  out << '\n';
  char buf[32];
  auto pct = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.1f%%", v * 100.0);
    return std::string(buf);
  };
  row("problems", [](const nlohmann::json& a) { return std::to_string(a["problems"].get<int>()); });
  row("accuracy", [&pct](const nlohmann::json& a) { return pct(a["accuracy"].get<double>()); });
  row("failures", [](const nlohmann::json& a) { return std::to_string(a["failures"].get<int>()); });
  row("avg_tokens_per_response", [&buf](const nlohmann::json& a) {
    std::snprintf(buf, sizeof buf, "%.1f", a["avg_tokens_per_response"].get<double>());
    return std::string(buf);
  });
  row("cost_per_case_usd",
      [](const nlohmann::json& a) { return a["cost_per_case_usd"].get<std::string>(); });
  row("total_cost_usd",
      [](const nlohmann::json& a) { return a["total_cost_usd"].get<std::string>(); });

  // union of topics across reports
  std::set<std::string> topics;
  for (const auto& [name, j] : reports)
    for (auto it = j["aggregates"]["per_topic"].begin(); it != j["aggregates"]["per_topic"].end();
         ++it)
      topics.insert(it.key());
  for (const std::string& topic : topics) {
    out << "accuracy[" << topic << "]";
    for (const auto& [name, j] : reports) {
      const auto& pt = j["aggregates"]["per_topic"];
      if (pt.contains(topic)) {
        char b[32];
        std::snprintf(b, sizeof b, "%.1f%%", pt[topic]["accuracy"].get<double>() * 100.0);
        out << '\t' << b;
      } else {
        out << "\t-";
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace mdtoc
