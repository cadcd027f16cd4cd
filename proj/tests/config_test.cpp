#include "doctest.h"
#include "helpers.hpp"
#include "mdtoc/config.hpp"

using namespace mdtoc;

TEST_CASE("the shipped configs load with resolved paths") {
  RunConfig cfg = load_run_config(mdtoc_test::fixtures_dir() / "configs" / "fig4.json");
  CHECK(cfg.planning.c_min == 1);
  CHECK(cfg.monitoring.iterations == 3);
  CHECK(cfg.roles.at("fixer").model == "gpt-4o-mini");
  CHECK(cfg.backends.at("mock").type == BackendSpec::Type::Scripted);
  CHECK(std::filesystem::exists(cfg.dataset_path));
  CHECK(std::filesystem::exists(cfg.backends.at("mock").script_path));
}

TEST_CASE("presets expand before validation and explicit fields override them") {
  nlohmann::json doc = load_run_config(mdtoc_test::fixtures_dir() / "configs" / "fig4.json")
                           .to_json();  // start from a valid document

  SUBCASE("champ-default carries the published parameters") {
    doc["preset"] = "champ-default";
    doc.erase("planning");
    doc.erase("monitoring");
    RunConfig cfg = parse_run_config(doc, mdtoc_test::fixtures_dir() / "configs");
    CHECK(cfg.planning.c_min == 2);
    CHECK(cfg.planning.c_max == 3);
    CHECK(cfg.planning.sc_min == 1);
    CHECK(cfg.planning.sc_max == 2);
    CHECK(cfg.monitoring.chains_per_subconcept == 2);
    CHECK(cfg.monitoring.iterations == 10);
  }

  SUBCASE("g24-table5 carries the sensitivity-sweep row") {
    doc["preset"] = "g24-table5";
    doc.erase("planning");
    doc.erase("monitoring");
    RunConfig cfg = parse_run_config(doc, mdtoc_test::fixtures_dir() / "configs");
    CHECK(cfg.planning.c_min == 1);
    CHECK(cfg.planning.c_max == 1);
    CHECK(cfg.monitoring.chains_per_subconcept == 15);
    CHECK(cfg.monitoring.iterations == 5);
  }

  SUBCASE("g24-default matches the per-dataset setting") {
    doc["preset"] = "g24-default";
    doc.erase("planning");
    doc.erase("monitoring");
    RunConfig cfg = parse_run_config(doc, mdtoc_test::fixtures_dir() / "configs");
    CHECK(cfg.monitoring.chains_per_subconcept == 10);
    CHECK(cfg.monitoring.iterations == 4);
  }

  SUBCASE("explicit fields override the preset") {
    doc["preset"] = "champ-default";
    doc["monitoring"] = {{"iterations", 3}};
    RunConfig cfg = parse_run_config(doc, mdtoc_test::fixtures_dir() / "configs");
    CHECK(cfg.monitoring.iterations == 3);
    CHECK(cfg.monitoring.chains_per_subconcept == 2);  // still from the preset
  }

  SUBCASE("unknown presets are a ConfigError") {
    doc["preset"] = "not-a-preset";
    CHECK_THROWS_AS(parse_run_config(doc, mdtoc_test::fixtures_dir() / "configs"), Error);
  }
}

TEST_CASE("config validation catches the usual mistakes") {
  nlohmann::json doc =
      load_run_config(mdtoc_test::fixtures_dir() / "configs" / "fig4.json").to_json();
  auto base = mdtoc_test::fixtures_dir() / "configs";

  SUBCASE("missing role") {
    doc["roles"].erase("fixer");
    CHECK_THROWS_AS(parse_run_config(doc, base), Error);
  }
  SUBCASE("role referencing an unknown backend") {
    doc["roles"]["fixer"]["backend"] = "nope";
    CHECK_THROWS_AS(parse_run_config(doc, base), Error);
  }
  SUBCASE("nonexistent dataset path") {
    doc["dataset"]["path"] = "missing.csv";
    try {
      parse_run_config(doc, base);
      FAIL("expected ConfigError");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ConfigError);
    }
  }
  SUBCASE("invalid parameter ranges") {
    doc["planning"] = {{"c_min", 3}, {"c_max", 2}};
    CHECK_THROWS_AS(parse_run_config(doc, base), Error);
    doc["planning"] = {{"c_min", 1}, {"c_max", 2}};
    doc["monitoring"] = {{"iterations", 0}};
    CHECK_THROWS_AS(parse_run_config(doc, base), Error);
  }
  SUBCASE("bad backend type") {
    doc["backends"]["mock"]["type"] = "carrier-pigeon";
    CHECK_THROWS_AS(parse_run_config(doc, base), Error);
  }
}

TEST_CASE("config serialization round-trips") {
  RunConfig cfg = load_run_config(mdtoc_test::fixtures_dir() / "configs" / "fig4.json");
  RunConfig back = parse_run_config(cfg.to_json(), mdtoc_test::fixtures_dir() / "configs");
  CHECK(back.planning.c_max == cfg.planning.c_max);
  CHECK(back.monitoring.max_attempts == cfg.monitoring.max_attempts);
  CHECK(back.roles.at("planner").model == cfg.roles.at("planner").model);
  CHECK(back.dataset_path == cfg.dataset_path);
  CHECK(back.to_json() == cfg.to_json());
}
