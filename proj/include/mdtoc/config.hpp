#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>

#include "json.hpp"
#include "mdtoc/answers.hpp"
#include "mdtoc/chat.hpp"
#include "mdtoc/engine.hpp"

namespace mdtoc {

struct PresetParams {
  PlanningParams planning;
  MonitoringParams monitoring;
};

// Named hyperparameter presets: the published per-dataset settings plus every
// row of the sensitivity sweep, so each combination is one flag.
inline const std::map<std::string, PresetParams>& presets() {
  static const std::map<std::string, PresetParams> table{
      {"champ-default", {{2, 3, 1, 2}, {2, 10, 2}}},
      {"math-default", {{2, 3, 1, 2}, {2, 10, 2}}},
      {"g24-default", {{1, 1, 1, 1}, {10, 4, 2}}},
      {"table5-2-4-1-2", {{2, 4, 1, 2}, {2, 10, 2}}},
      {"table5-3-5-1-2", {{3, 5, 1, 2}, {2, 10, 2}}},
      {"table5-3-5-2-4", {{3, 5, 2, 4}, {3, 15, 2}}},
      {"table5-1-1-1-1", {{1, 1, 1, 1}, {15, 5, 2}}},
      {"g24-table5", {{1, 1, 1, 1}, {15, 5, 2}}},
  };
  return table;
}

struct BackendSpec {
  enum class Type { Http, Scripted };
  Type type = Type::Scripted;
  // http
  std::string base_url;
  std::string chat_path = "/v1/chat/completions";
  std::string api_key_env = "OPENAI_API_KEY";
  int timeout_seconds = 120;
  // scripted
  std::string script_path;
  int max_concurrency = 8;
};

// Everything one run needs. A single JSON document with sections mirroring
// the domain types; environment variables carry only secrets.
struct RunConfig {
  std::filesystem::path dataset_path;
  DatasetKind dataset_kind = DatasetKind::G24;
  int first_index = 1;
  std::optional<std::string> preset;
  PlanningParams planning;
  MonitoringParams monitoring;
  std::map<std::string, BackendSpec> backends;
  std::map<std::string, RoleBinding> roles;  // keyed by role name
  std::filesystem::path price_table_path;
  std::filesystem::path templates_dir;
  std::filesystem::path trace_dir;
  int concurrency = 4;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    nlohmann::json roles_json = nlohmann::json::object();
    for (const auto& [name, b] : roles)
      roles_json[name] = {{"backend", b.backend_id},
                          {"model", b.model},
                          {"temperature", b.temperature},
                          {"max_output_tokens", b.max_output_tokens}};
    nlohmann::json backends_json = nlohmann::json::object();
    for (const auto& [id, s] : backends) {
      nlohmann::json js{{"type", s.type == BackendSpec::Type::Http ? "http" : "scripted"},
                        {"max_concurrency", s.max_concurrency}};
      if (s.type == BackendSpec::Type::Http) {
        js["base_url"] = s.base_url;
        js["chat_path"] = s.chat_path;
        js["api_key_env"] = s.api_key_env;
        js["timeout_seconds"] = s.timeout_seconds;
      } else {
        js["script"] = s.script_path;
      }
      backends_json[id] = js;
    }
    nlohmann::json j{
        {"dataset",
         {{"path", dataset_path.string()},
          {"kind", dataset_name(dataset_kind)},
          {"first_index", first_index}}},
        {"planning",
         {{"c_min", planning.c_min},
          {"c_max", planning.c_max},
          {"sc_min", planning.sc_min},
          {"sc_max", planning.sc_max}}},
        {"monitoring",
         {{"chains_per_subconcept", monitoring.chains_per_subconcept},
          {"iterations", monitoring.iterations},
          {"max_attempts", monitoring.max_attempts}}},
        {"roles", roles_json},
        {"backends", backends_json},
        {"price_table", price_table_path.string()},
        {"templates_dir", templates_dir.string()},
        {"trace_dir", trace_dir.string()},
        {"concurrency", concurrency},
        {"seed", seed}};
    if (preset) j["preset"] = *preset;
    return j;
  }
};

namespace config_detail {

inline void expect(bool cond, const std::string& what) {
  if (!cond) raise(Errc::ConfigError, what);
}

}  // namespace config_detail

// Parses and validates a config document. Preset expansion happens first;
// explicit planning/monitoring fields override the preset's values.
inline RunConfig parse_run_config(const nlohmann::json& doc,
                                  const std::filesystem::path& base_dir) {
  using config_detail::expect;
  expect(doc.is_object(), "config must be a JSON object");
  RunConfig cfg;

  auto resolve = [&base_dir](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };

  try {
    if (doc.contains("preset")) {
      cfg.preset = doc["preset"].get<std::string>();
      auto it = presets().find(*cfg.preset);
      expect(it != presets().end(), "unknown preset '" + *cfg.preset + "'");
      cfg.planning = it->second.planning;
      cfg.monitoring = it->second.monitoring;
    }
    if (doc.contains("planning")) {
      const auto& p = doc["planning"];
      cfg.planning.c_min = p.value("c_min", cfg.planning.c_min);
      cfg.planning.c_max = p.value("c_max", cfg.planning.c_max);
      cfg.planning.sc_min = p.value("sc_min", cfg.planning.sc_min);
      cfg.planning.sc_max = p.value("sc_max", cfg.planning.sc_max);
    }
    if (doc.contains("monitoring")) {
      const auto& m = doc["monitoring"];
      cfg.monitoring.chains_per_subconcept =
          m.value("chains_per_subconcept", cfg.monitoring.chains_per_subconcept);
      cfg.monitoring.iterations = m.value("iterations", cfg.monitoring.iterations);
      cfg.monitoring.max_attempts = m.value("max_attempts", cfg.monitoring.max_attempts);
    }
    cfg.planning.validate();
    cfg.monitoring.validate();

    expect(doc.contains("dataset"), "config needs a dataset section");
    const auto& ds = doc["dataset"];
    cfg.dataset_path = resolve(ds.at("path").get<std::string>());
    cfg.dataset_kind = dataset_from_name(ds.at("kind").get<std::string>());
    cfg.first_index = ds.value("first_index", 1);

    expect(doc.contains("backends") && doc["backends"].is_object(),
           "config needs a backends section");
    for (auto it = doc["backends"].begin(); it != doc["backends"].end(); ++it) {
      const auto& jb = it.value();
      BackendSpec spec;
      std::string type = jb.at("type").get<std::string>();
      spec.max_concurrency = jb.value("max_concurrency", 8);
      if (type == "http") {
        spec.type = BackendSpec::Type::Http;
        spec.base_url = jb.at("base_url").get<std::string>();
        spec.chat_path = jb.value("chat_path", spec.chat_path);
        spec.api_key_env = jb.value("api_key_env", spec.api_key_env);
        spec.timeout_seconds = jb.value("timeout_seconds", spec.timeout_seconds);
      } else if (type == "scripted") {
        spec.type = BackendSpec::Type::Scripted;
        spec.script_path = resolve(jb.at("script").get<std::string>()).string();
      } else {
        raise(Errc::ConfigError, "backend type must be 'http' or 'scripted', got '" + type + "'");
      }
      cfg.backends[it.key()] = std::move(spec);
    }

    expect(doc.contains("roles") && doc["roles"].is_object(), "config needs a roles section");
    for (int i = 0; i < kRoleCount; ++i) {
      std::string name = role_name(static_cast<Role>(i));
      expect(doc["roles"].contains(name), "roles section is missing '" + name + "'");
      const auto& jr = doc["roles"][name];
      RoleBinding b;
      b.backend_id = jr.at("backend").get<std::string>();
      b.model = jr.at("model").get<std::string>();
      b.temperature = jr.value("temperature", 0.7);
      b.max_output_tokens = jr.value("max_output_tokens", 1024);
      expect(!b.model.empty(), "empty model for role " + name);
      expect(cfg.backends.count(b.backend_id) != 0,
             "role " + name + " references unknown backend '" + b.backend_id + "'");
      cfg.roles[name] = std::move(b);
    }

    expect(doc.contains("price_table"), "config needs a price_table path");
    cfg.price_table_path = resolve(doc["price_table"].get<std::string>());
    expect(doc.contains("templates_dir"), "config needs a templates_dir");
    cfg.templates_dir = resolve(doc["templates_dir"].get<std::string>());
    cfg.trace_dir = resolve(doc.value("trace_dir", std::string("traces")));
    cfg.concurrency = doc.value("concurrency", 4);
    cfg.seed = doc.value("seed", 0ull);
    expect(cfg.concurrency >= 1, "concurrency must be >= 1");
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::ConfigError, std::string("malformed config: ") + e.what());
  }

  // Referenced paths must exist up front; a missing file mid-run is too late.
  config_detail::expect(std::filesystem::exists(cfg.dataset_path),
                        "dataset file not found: " + cfg.dataset_path.string());
  config_detail::expect(std::filesystem::exists(cfg.price_table_path),
                        "price table not found: " + cfg.price_table_path.string());
  config_detail::expect(std::filesystem::is_directory(cfg.templates_dir),
                        "templates dir not found: " + cfg.templates_dir.string());
  for (const auto& [id, spec] : cfg.backends)
    if (spec.type == BackendSpec::Type::Scripted)
      config_detail::expect(std::filesystem::exists(spec.script_path),
                            "script not found for backend '" + id + "': " + spec.script_path);
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) raise(Errc::ConfigError, "cannot open config file " + file.string());
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) raise(Errc::ConfigError, "config is not valid JSON: " + file.string());
  return parse_run_config(doc, file.parent_path());
}

}  // namespace mdtoc
