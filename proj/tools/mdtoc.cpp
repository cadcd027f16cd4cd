// mdtoc — metacognitive planner/monitor/reviewer pipeline over chat models,
// with exact Game-of-24 tooling. Subcommands: run, replay, report, solve24,
// check24. Exit codes: 0 success, 1 partial failures, 2 config error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mdtoc/config.hpp"
#include "mdtoc/game24.hpp"
#include "mdtoc/runner.hpp"

namespace {

int run_command(const std::string& config_path, const std::string& preset,
                const std::string& trace_dir, int concurrency) {
  mdtoc::RunConfig cfg = mdtoc::load_run_config(config_path);
  if (!preset.empty()) {
    auto it = mdtoc::presets().find(preset);
    if (it == mdtoc::presets().end()) mdtoc::raise(mdtoc::Errc::ConfigError, "unknown preset " + preset);
    cfg.preset = preset;
    cfg.planning = it->second.planning;
    cfg.monitoring = it->second.monitoring;
  }
  if (!trace_dir.empty()) cfg.trace_dir = trace_dir;
  if (concurrency > 0) cfg.concurrency = concurrency;

  mdtoc::RunReport report = mdtoc::cmd_run(cfg);
  std::printf("problems: %d  correct: %d  accuracy: %.1f%%  failures: %d\n", report.problems(),
              report.correct(), report.accuracy() * 100.0, report.failures());
  std::printf("report: %s\n", (cfg.trace_dir / "report.json").string().c_str());
  return report.failures() == 0 ? 0 : 1;
}

int replay_command(const std::string& trace_dir, const std::string& out_dir) {
  mdtoc::ReplayOutcome outcome = mdtoc::cmd_replay(trace_dir, out_dir);
  if (outcome.diffs.empty()) {
    std::printf("replay identical: %d problems\n", outcome.report.problems());
    return outcome.report.failures() == 0 ? 0 : 1;
  }
  std::printf("replay DIFFERS for %zu problem(s):\n", outcome.diffs.size());
  for (const std::string& id : outcome.diffs) std::printf("  %s\n", id.c_str());
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MDToC pipeline runner"};
  app.require_subcommand(1);

  // run
  std::string config_path, preset, trace_dir;
  int concurrency = 0;
  CLI::App* run = app.add_subcommand("run", "execute the pipeline over a dataset");
  run->add_option("--config", config_path, "run config JSON")->required();
  run->add_option("--preset", preset, "hyperparameter preset overriding the config");
  run->add_option("--trace-dir", trace_dir, "trace/report output directory override");
  run->add_option("--concurrency", concurrency, "concurrency ceiling override");

  // replay
  std::string replay_dir, replay_out;
  CLI::App* replay = app.add_subcommand("replay", "re-execute a recorded run from its traces");
  replay->add_option("trace_dir", replay_dir, "directory produced by 'run'")->required();
  replay->add_option("--out", replay_out, "output directory")->required();

  // report
  std::vector<std::string> report_files;
  CLI::App* report = app.add_subcommand("report", "compare one or more run reports");
  report->add_option("reports", report_files, "report.json files")->required();

  // solve24
  std::vector<int> nums;
  CLI::App* solve24 = app.add_subcommand("solve24", "brute-force a Game-of-24 puzzle");
  solve24->add_option("numbers", nums, "four positive integers")->expected(4);

  // check24
  std::vector<std::string> check_args;
  CLI::App* check24 = app.add_subcommand("check24", "check an expression against a puzzle");
  check24->add_option("args", check_args, "four positive integers, then the expression")
      ->expected(5);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(config_path, preset, trace_dir, concurrency);
    if (replay->parsed()) return replay_command(replay_dir, replay_out);
    if (report->parsed()) {
      std::vector<std::filesystem::path> files(report_files.begin(), report_files.end());
      std::cout << mdtoc::cmd_report(files);
      return 0;
    }
    if (solve24->parsed()) {
      auto witness = mdtoc::solve_game24_bruteforce(
          mdtoc::Game24Puzzle::of(nums[0], nums[1], nums[2], nums[3]));
      if (witness) {
        std::printf("%s\n", witness->c_str());
        return 0;
      }
      std::printf("no solution\n");
      return 1;
    }
    if (check24->parsed()) {
      mdtoc::Game24Puzzle puzzle =
          mdtoc::Game24Puzzle::of(check_nums[0], check_nums[1], check_nums[2], check_nums[3]);
      mdtoc::Game24Check result = mdtoc::check_game24(puzzle, expression);
      std::printf("%s: %s\n", result.ok ? "valid" : "invalid", result.diagnostic.c_str());
      return result.ok ? 0 : 1;
    }
  } catch (const mdtoc::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    switch (e.code()) {
      case mdtoc::Errc::ConfigError:
      case mdtoc::Errc::SchemaError:
      case mdtoc::Errc::ScriptParseError: return 2;
      case mdtoc::Errc::ParseError: return 2;
      default: return 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
