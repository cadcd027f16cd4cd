#pragma once

#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "mdtoc/chat.hpp"
#include "mdtoc/decimal.hpp"

namespace mdtoc {

enum class Phase { Planning, Monitoring, Reviewing };

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Planning: return "planning";
    case Phase::Monitoring: return "monitoring";
    case Phase::Reviewing: return "reviewing";
  }
  return "?";
}

inline Phase phase_from_name(const std::string& s) {
  if (s == "planning") return Phase::Planning;
  if (s == "monitoring") return Phase::Monitoring;
  if (s == "reviewing") return Phase::Reviewing;
  raise(Errc::SchemaError, "unknown phase '" + s + "'");
}

// Per-1K-token prices in USD. A model missing from the table makes costs
// unknown, never zero.
class PriceTable {
public:
  struct ModelPrice {
    Usd input_per_1k;
    Usd output_per_1k;
  };

  PriceTable() = default;

  void set(const std::string& model, Usd input_per_1k, Usd output_per_1k) {
    if (input_per_1k < Usd{} || output_per_1k < Usd{})
      raise(Errc::ConfigError, "negative price for model " + model);
    prices_[model] = {input_per_1k, output_per_1k};
  }

  std::optional<ModelPrice> find(const std::string& model) const {
    auto it = prices_.find(model);
    if (it == prices_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<Usd> cost(const std::string& model, const Usage& usage) const {
    auto p = find(model);
    if (!p) return std::nullopt;
    return Usd::per_token_cost(usage.prompt_tokens, p->input_per_1k) +
           Usd::per_token_cost(usage.completion_tokens, p->output_per_1k);
  }

  // {"model": {"input": "0.0025", "output": "0.01"}, ...} — values may be
  // JSON strings or numbers; strings keep the decimal exact verbatim.
  static PriceTable from_json(const nlohmann::json& doc) {
    PriceTable t;
    if (!doc.is_object()) raise(Errc::ConfigError, "price table must be a JSON object");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      const auto& v = it.value();
      if (!v.is_object() || !v.contains("input") || !v.contains("output"))
        raise(Errc::ConfigError, "price entry for " + it.key() + " needs input/output");
      t.set(it.key(), parse_price(v["input"]), parse_price(v["output"]));
    }
    return t;
  }

  static PriceTable from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::ConfigError, "cannot open price table " + path);
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) raise(Errc::ConfigError, "price table is not valid JSON: " + path);
    return from_json(doc);
  }

private:
  static Usd parse_price(const nlohmann::json& v) {
    if (v.is_string()) return Usd::parse(v.get<std::string>());
    if (v.is_number()) return Usd::parse(v.dump());  // shortest round-trip text
    raise(Errc::ConfigError, "price must be a string or number");
  }

  std::map<std::string, ModelPrice> prices_;
};

// Token and cost tallies keyed by (phase, role, model). Totals always equal
// the multiset sum of the recorded usages, under any interleaving.
class TokenLedger {
public:
  struct Key {
    Phase phase;
    Role role;
    std::string model;
    friend bool operator<(const Key& a, const Key& b) {
      return std::tie(a.phase, a.role, a.model) < std::tie(b.phase, b.role, b.model);
    }
  };

  struct Entry {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::int64_t calls = 0;     // successful exchanges
    std::int64_t failures = 0;  // exchanges that exhausted retries
    Usd cost;
    bool cost_known = true;  // false once any usage lacked a price
  };

  void record(Phase phase, Role role, const std::string& model, const Usage& usage,
              const PriceTable& prices) {
    std::optional<Usd> c = prices.cost(model, usage);
    std::lock_guard<std::mutex> lock(mu_);
    Entry& e = entries_[Key{phase, role, model}];
    e.prompt_tokens += usage.prompt_tokens;
    e.completion_tokens += usage.completion_tokens;
    ++e.calls;
    if (c)
      e.cost += *c;
    else
      e.cost_known = false;
  }

  void record_failure(Phase phase, Role role, const std::string& model) {
    std::lock_guard<std::mutex> lock(mu_);
    ++entries_[Key{phase, role, model}].failures;
  }

  std::map<Key, Entry> entries() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_;
  }

  struct Totals {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::int64_t calls = 0;
    Usd cost;
    bool cost_known = true;
  };

  Totals totals() const {
    Totals t;
    for (const auto& [key, e] : entries()) {
      t.prompt_tokens += e.prompt_tokens;
      t.completion_tokens += e.completion_tokens;
      t.calls += e.calls;
      t.cost += e.cost;
      t.cost_known = t.cost_known && e.cost_known;
    }
    return t;
  }

private:
  std::map<Key, Entry> entries_;
  mutable std::mutex mu_;
};

// Report rows grouped the way the token-accounting table reads: planning,
// the generator/evaluator/solver block of monitoring, the fixer block, then
// reviewing.
struct LedgerRow {
  std::string phase_label;
  std::string model;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t calls = 0;
  std::optional<Usd> cost;  // nullopt = unknown

  std::int64_t total_tokens() const { return prompt_tokens + completion_tokens; }
  double avg_tokens_per_response() const {
    return calls == 0 ? 0.0 : static_cast<double>(total_tokens()) / static_cast<double>(calls);
  }
};

inline std::string ledger_phase_label(Phase phase, Role role) {
  switch (phase) {
    case Phase::Planning: return "planning";
    case Phase::Reviewing: return "reviewing";
    case Phase::Monitoring:
      return role == Role::Fixer ? "monitoring:fixer" : "monitoring:generator/evaluator/solver";
  }
  return "?";
}

inline std::vector<LedgerRow> ledger_report(const TokenLedger& ledger) {
  // (label rank, model) -> row
  auto rank = [](const std::string& label) {
    if (label == "planning") return 0;
    if (label == "monitoring:generator/evaluator/solver") return 1;
    if (label == "monitoring:fixer") return 2;
    return 3;  // reviewing
  };
  std::map<std::pair<int, std::string>, LedgerRow> grouped;
  std::map<std::pair<int, std::string>, bool> known;
  for (const auto& [key, e] : ledger.entries()) {
    std::string label = ledger_phase_label(key.phase, key.role);
    auto gk = std::make_pair(rank(label), key.model);
    LedgerRow& row = grouped[gk];
    if (row.phase_label.empty()) {
      row.phase_label = label;
      row.model = key.model;
      known[gk] = true;
    }
    row.prompt_tokens += e.prompt_tokens;
    row.completion_tokens += e.completion_tokens;
    row.calls += e.calls;
    if (!e.cost_known) known[gk] = false;
    row.cost = row.cost.value_or(Usd{}) + e.cost;
  }
  std::vector<LedgerRow> rows;
  for (auto& [gk, row] : grouped) {
    if (!known[gk]) row.cost = std::nullopt;
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json ledger_report_json(const TokenLedger& ledger) {
  nlohmann::json rows = nlohmann::json::array();
  std::int64_t tp = 0, tc = 0, calls = 0;
  Usd total_cost;
  bool total_known = true;
  for (const LedgerRow& r : ledger_report(ledger)) {
    nlohmann::json jr{{"phase", r.phase_label},
                      {"model", r.model},
                      {"prompt_tokens", r.prompt_tokens},
                      {"completion_tokens", r.completion_tokens},
                      {"total_tokens", r.total_tokens()},
                      {"calls", r.calls},
                      {"avg_tokens_per_response", r.avg_tokens_per_response()}};
    jr["cost_usd"] = r.cost ? nlohmann::json(r.cost->str()) : nlohmann::json("unknown");
    rows.push_back(jr);
    tp += r.prompt_tokens;
    tc += r.completion_tokens;
    calls += r.calls;
    if (r.cost)
      total_cost += *r.cost;
    else
      total_known = false;
  }
  nlohmann::json totals{{"prompt_tokens", tp},
                        {"completion_tokens", tc},
                        {"total_tokens", tp + tc},
                        {"calls", calls}};
  totals["cost_usd"] = total_known ? nlohmann::json(total_cost.str()) : nlohmann::json("unknown");
  return nlohmann::json{{"rows", rows}, {"totals", totals}};
}

inline std::string ledger_report_text(const TokenLedger& ledger) {
  std::ostringstream out;
  nlohmann::json rep = ledger_report_json(ledger);
  out << "phase                                    model             tokens      calls  avg/resp  cost ($)\n";
  auto line = [&out](const std::string& phase, const std::string& model, std::int64_t tokens,
                     std::int64_t calls, double avg, const std::string& cost) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-40s %-16s %9lld %10lld %9.1f  %s\n", phase.c_str(),
                  model.c_str(), static_cast<long long>(tokens), static_cast<long long>(calls),
                  avg, cost.c_str());
    out << buf;
  };
  for (const auto& r : rep["rows"])
    line(r["phase"], r["model"], r["total_tokens"], r["calls"], r["avg_tokens_per_response"],
         r["cost_usd"]);
  const auto& t = rep["totals"];
  double avg = t["calls"].get<std::int64_t>() == 0
                   ? 0.0
                   : static_cast<double>(t["total_tokens"].get<std::int64_t>()) /
                         static_cast<double>(t["calls"].get<std::int64_t>());
  line("total", "", t["total_tokens"], t["calls"], avg, t["cost_usd"]);
  return out.str();
}

}  // namespace mdtoc
