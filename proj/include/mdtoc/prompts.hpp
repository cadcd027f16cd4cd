#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mdtoc/errors.hpp"
#include "mdtoc/verdict.hpp"

namespace mdtoc {

// The six actors of the pipeline. Every backend call carries exactly one role.
enum class Role { Planner, Generator, Evaluator, Fixer, Solver, Reviewer };
constexpr int kRoleCount = 6;

inline const char* role_name(Role r) {
  switch (r) {
    case Role::Planner: return "planner";
    case Role::Generator: return "generator";
    case Role::Evaluator: return "evaluator";
    case Role::Fixer: return "fixer";
    case Role::Solver: return "solver";
    case Role::Reviewer: return "reviewer";
  }
  return "?";
}

inline Role role_from_name(const std::string& s) {
  for (int i = 0; i < kRoleCount; ++i)
    if (s == role_name(static_cast<Role>(i))) return static_cast<Role>(i);
  raise(Errc::ConfigError, "unknown role '" + s + "'");
}

enum class TemplateId { P0, P1, P2, P3, P4, P5, P6 };
constexpr int kTemplateCount = 7;

inline const char* template_name(TemplateId t) {
  switch (t) {
    case TemplateId::P0: return "P0";
    case TemplateId::P1: return "P1";
    case TemplateId::P2: return "P2";
    case TemplateId::P3: return "P3";
    case TemplateId::P4: return "P4";
    case TemplateId::P5: return "P5";
    case TemplateId::P6: return "P6";
  }
  return "?";
}

using Bindings = std::map<std::string, std::string>;

struct PromptTemplate {
  TemplateId id = TemplateId::P0;
  std::string body;
};

namespace detail {

inline bool is_placeholder_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

}  // namespace detail

// Substitutes {name} markers. Deterministic; unmatched braces pass through
// verbatim, a referenced but unbound placeholder raises MissingBinding.
inline std::string render(const PromptTemplate& tpl, const Bindings& bindings) {
  std::string out;
  out.reserve(tpl.body.size());
  const std::string& body = tpl.body;
  for (std::size_t i = 0; i < body.size();) {
    if (body[i] != '{') {
      out += body[i++];
      continue;
    }
    std::size_t j = i + 1;
    while (j < body.size() && detail::is_placeholder_char(body[j])) ++j;
    if (j > i + 1 && j < body.size() && body[j] == '}') {
      std::string name = body.substr(i + 1, j - i - 1);
      auto it = bindings.find(name);
      if (it == bindings.end())
        raise(Errc::MissingBinding, "placeholder '" + name + "' in template " +
                                        template_name(tpl.id) + " has no binding");
      out += it->second;
      i = j + 1;
    } else {
      out += body[i++];
    }
  }
  return out;
}

// Loads p0.txt .. p6.txt from one directory. The file set is a published
// interface; wording is a config concern, not code.
class TemplateSet {
public:
  static TemplateSet load(const std::filesystem::path& dir) {
    TemplateSet set;
    for (int i = 0; i < kTemplateCount; ++i) {
      std::filesystem::path file = dir / ("p" + std::to_string(i) + ".txt");
      std::ifstream in(file);
      if (!in) raise(Errc::ConfigError, "missing template file " + file.string());
      std::ostringstream buf;
      buf << in.rdbuf();
      set.templates_[i] = PromptTemplate{static_cast<TemplateId>(i), buf.str()};
    }
    return set;
  }

  const PromptTemplate& get(TemplateId id) const {
    return templates_[static_cast<int>(id)];
  }

  std::string render(TemplateId id, const Bindings& bindings) const {
    return mdtoc::render(get(id), bindings);
  }

private:
  PromptTemplate templates_[kTemplateCount];
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n\f\v");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  lines.push_back(cur);
  return lines;
}

// "3. item" / "12) item" / "- item" / "* item" -> item; nullopt otherwise.
inline std::optional<std::string> enumerated_item(const std::string& line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  if (i < line.size() && (line[i] == '-' || line[i] == '*')) {
    if (i + 1 < line.size() && line[i + 1] == ' ') return line.substr(i + 2);
    return std::nullopt;
  }
  std::size_t d = i;
  while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d]))) ++d;
  if (d == i || d >= line.size()) return std::nullopt;
  if (line[d] != '.' && line[d] != ')' && line[d] != ':') return std::nullopt;
  return line.substr(d + 1);
}

}  // namespace detail

// Parses an enumerated-list response into [min,max] trimmed items.
// Non-enumerated lines before the first item are ignored; later ones continue
// the current item. Counts outside the bounds are a ParseFailure, which the
// engine treats as retryable.
inline std::vector<std::string> parse_plan_response(const std::string& text, int min_items,
                                                    int max_items) {
  if (min_items < 1 || max_items < min_items)
    raise(Errc::ConfigError, "invalid item bounds [" + std::to_string(min_items) + "," +
                                 std::to_string(max_items) + "]");
  std::vector<std::string> items;
  for (const std::string& line : detail::split_lines(text)) {
    if (auto item = detail::enumerated_item(line)) {
      items.push_back(detail::trim(*item));
    } else if (!items.empty()) {
      std::string cont = detail::trim(line);
      if (!cont.empty()) items.back() += items.back().empty() ? cont : " " + cont;
    }
  }
  items.erase(std::remove_if(items.begin(), items.end(),
                             [](const std::string& s) { return s.empty(); }),
              items.end());
  if (static_cast<int>(items.size()) < min_items || static_cast<int>(items.size()) > max_items)
    raise(Errc::ParseFailure, "expected between " + std::to_string(min_items) + " and " +
                                  std::to_string(max_items) + " items, got " +
                                  std::to_string(items.size()));
  return items;
}

// Leading Yes/No token decides the verdict; the remainder becomes the reason
// on No. A failing verdict never has an empty reason.
inline EvalVerdict parse_verdict(const std::string& text) {
  std::size_t i = 0;
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  std::size_t j = i;
  while (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
  std::string token = text.substr(i, j - i);
  std::transform(token.begin(), token.end(), token.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (token == "yes") return EvalVerdict::passing();
  if (token == "no") {
    std::string rest = text.substr(j);
    std::size_t k = 0;
    while (k < rest.size() && (std::isspace(static_cast<unsigned char>(rest[k])) ||
                               rest[k] == '.' || rest[k] == ',' || rest[k] == ':' ||
                               rest[k] == ';' || rest[k] == '-'))
      ++k;
    std::string reason = detail::trim(rest.substr(k));
    if (reason.empty()) reason = "no explanation provided";
    return EvalVerdict::failing(reason);
  }
  raise(Errc::ParseFailure, "no leading Yes/No token in verdict: '" +
                                text.substr(0, std::min<std::size_t>(text.size(), 60)) + "'");
}

// Extracts the objective line ("Objective: ...") from a planner response.
inline std::string parse_objective(const std::string& text) {
  static const std::string kMarker = "objective";
  for (const std::string& raw : detail::split_lines(text)) {
    std::string line = detail::trim(raw);
    if (line.size() < kMarker.size()) continue;
    std::string head = line.substr(0, kMarker.size());
    std::transform(head.begin(), head.end(), head.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (head != kMarker) continue;
    std::string rest = detail::trim(line.substr(kMarker.size()));
    if (!rest.empty() && (rest[0] == ':' || rest[0] == '-')) rest = detail::trim(rest.substr(1));
    if (!rest.empty()) return rest;
  }
  raise(Errc::ParseFailure, "no 'Objective:' line in planner response");
}

// Parses reviewer normalization lines of the form "<index>: <text>".
// Returns the 1-based index -> text map; indexes outside [1, count] are
// ignored.
inline std::map<int, std::string> parse_numbered_map(const std::string& text, int count) {
  std::map<int, std::string> out;
  for (const std::string& raw : detail::split_lines(text)) {
    const std::string line = raw;
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t d = i;
    while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d]))) ++d;
    if (d == i || d >= line.size()) continue;
    if (line[d] != ':' && line[d] != '.' && line[d] != ')') continue;
    int idx = std::stoi(line.substr(i, d - i));
    if (idx < 1 || idx > count) continue;
    out[idx] = detail::trim(line.substr(d + 1));
  }
  return out;
}

// Extracts the last "Final answer: ..." value. A lone trailing period is
// treated as sentence punctuation, not answer content.
inline std::string parse_final_answer(const std::string& text) {
  static const std::string kMarker = "final answer";
  std::string lower = text;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  std::size_t pos = lower.rfind(kMarker);
  if (pos == std::string::npos) raise(Errc::EmptyAnswer, "no 'Final answer:' marker found");
  std::size_t i = pos + kMarker.size();
  while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
  if (i < text.size() && (text[i] == ':' || text[i] == '-')) ++i;
  std::size_t eol = text.find('\n', i);
  std::string value = detail::trim(text.substr(i, eol == std::string::npos ? eol : eol - i));
  if (value.size() > 1 && value.back() == '.') value.pop_back();
  if (value.empty() || value == ".")
    raise(Errc::EmptyAnswer, "empty value after 'Final answer:' marker");
  return value;
}

}  // namespace mdtoc
