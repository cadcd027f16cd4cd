#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdtoc/answers.hpp"
#include "mdtoc/game24.hpp"

namespace mdtoc {

struct BenchProblem {
  std::string id;
  std::string statement;
  std::optional<std::string> gold_answer;
  std::optional<std::string> topic;
  DatasetKind dataset = DatasetKind::G24;
};

inline const std::set<std::string>& champ_topics() {
  static const std::set<std::string> topics{"Combinatorics", "Inequality", "Number Theory",
                                            "Polynomial", "Sequence"};
  return topics;
}

inline const std::set<std::string>& math_topics() {
  static const std::set<std::string> topics{
      "algebra",        "counting_and_probability", "geometry", "intermediate_algebra",
      "number_theory",  "prealgebra",               "precalculus"};
  return topics;
}

inline std::string game24_statement(const Game24Puzzle& p) {
  std::ostringstream out;
  out << "Use the four numbers " << p.numbers[0] << ", " << p.numbers[1] << ", " << p.numbers[2]
      << " and " << p.numbers[3]
      << ", each exactly once, with the operations + - * / and parentheses, to build an "
         "arithmetic expression whose value is exactly 24. Work through concrete candidate "
         "calculations.";
  return out.str();
}

// Game-of-24 CSV: one puzzle per row, exactly 4 positive integer columns.
// Blank lines and '#' comments are skipped. `first_index` numbers the
// problems (901 reproduces the benchmark's 901-1000 slice).
inline std::vector<BenchProblem> load_game24_csv(const std::filesystem::path& path,
                                                 int first_index = 1) {
  std::ifstream in(path);
  if (!in) raise(Errc::SchemaError, "cannot open dataset file " + path.string());
  std::vector<BenchProblem> problems;
  std::string line;
  std::size_t row = 0;
  int index = first_index;
  while (std::getline(in, line)) {
    ++row;
    std::string trimmed = line;
    trimmed.erase(0, trimmed.find_first_not_of(" \t\r"));
    if (trimmed.empty() || trimmed[0] == '#') continue;
    std::vector<int> nums;
    std::string cell;
    std::istringstream cells(line);
    bool bad = false;
    while (std::getline(cells, cell, ',')) {
      try {
        std::size_t used = 0;
        int v = std::stoi(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) bad = true;
        nums.push_back(v);
      } catch (...) {
        bad = true;
      }
    }
    if (bad || nums.size() != 4)
      raise(Errc::SchemaError,
            "row " + std::to_string(row) + " of " + path.string() + ": expected 4 integers");
    Game24Puzzle p = Game24Puzzle::of(nums[0], nums[1], nums[2], nums[3]);
    BenchProblem bp;
    bp.id = std::to_string(index++);
    bp.statement = game24_statement(p);
    std::ostringstream gold;
    gold << p.numbers[0] << " " << p.numbers[1] << " " << p.numbers[2] << " " << p.numbers[3];
    bp.gold_answer = gold.str();
    bp.dataset = DatasetKind::G24;
    problems.push_back(std::move(bp));
  }
  return problems;
}

// MATH/CHAMP JSON-lines: one record per problem, {id, problem, answer, topic}.
inline std::vector<BenchProblem> load_jsonl(const std::filesystem::path& path, DatasetKind kind) {
  std::ifstream in(path);
  if (!in) raise(Errc::SchemaError, "cannot open dataset file " + path.string());
  const std::set<std::string>& topics =
      kind == DatasetKind::CHAMP ? champ_topics() : math_topics();
  std::vector<BenchProblem> problems;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++record;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      raise(Errc::SchemaError, "record " + std::to_string(record) + " is not a JSON object");
    BenchProblem bp;
    bp.dataset = kind;
    try {
      if (j.at("id").is_number())
        bp.id = std::to_string(j.at("id").get<std::int64_t>());
      else
        bp.id = j.at("id").get<std::string>();
      bp.statement = j.at("problem").get<std::string>();
      if (j.contains("answer") && !j.at("answer").is_null())
        bp.gold_answer = j.at("answer").get<std::string>();
      if (j.contains("topic") && !j.at("topic").is_null())
        bp.topic = j.at("topic").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      raise(Errc::SchemaError, "record " + std::to_string(record) + ": " + e.what());
    }
    if (bp.statement.empty())
      raise(Errc::SchemaError, "record " + std::to_string(record) + ": empty problem text");
    if (!seen_ids.insert(bp.id).second)
      raise(Errc::SchemaError, "record " + std::to_string(record) + ": duplicate id " + bp.id);
    if (bp.topic && !topics.count(*bp.topic))
      raise(Errc::SchemaError,
            "record " + std::to_string(record) + ": unknown topic '" + *bp.topic + "'");
    problems.push_back(std::move(bp));
  }
  return problems;
}

inline std::vector<BenchProblem> load_dataset(const std::filesystem::path& path, DatasetKind kind,
                                              int first_index = 1) {
  if (kind == DatasetKind::G24) return load_game24_csv(path, first_index);
  return load_jsonl(path, kind);
}

struct GradeRow {
  std::string problem_id;
  std::string predicted;
  std::string gold;
  bool correct = false;
  bool needs_manual_review = false;
  std::string topic;
};

inline GradeRow grade(const BenchProblem& problem, const std::string& predicted) {
  GradeRow row;
  row.problem_id = problem.id;
  row.predicted = predicted;
  row.gold = problem.gold_answer.value_or("");
  row.topic = problem.topic.value_or("");
  if (problem.gold_answer) {
    AnswerMatch m = answers_equal(predicted, *problem.gold_answer, problem.dataset);
    row.correct = m.equal;
    row.needs_manual_review = m.needs_manual_review;
  }
  return row;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_grades_csv(const std::filesystem::path& path,
                             const std::vector<GradeRow>& rows) {
  std::ofstream out(path);
  if (!out) raise(Errc::ConfigError, "cannot open " + path.string());
  out << "problem_id,predicted,gold,correct,topic\n";
  for (const GradeRow& r : rows)
    out << csv_escape(r.problem_id) << ',' << csv_escape(r.predicted) << ',' << csv_escape(r.gold)
        << ',' << (r.correct ? "true" : "false") << ',' << csv_escape(r.topic) << '\n';
}

}  // namespace mdtoc
