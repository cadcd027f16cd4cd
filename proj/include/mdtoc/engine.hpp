#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mdtoc/backends.hpp"
#include "mdtoc/concept_tree.hpp"
#include "mdtoc/prompts.hpp"
#include "mdtoc/trace.hpp"

namespace mdtoc {

// Planning bounds: how many concepts and sub-concepts the planner may emit.
struct PlanningParams {
  int c_min = 2;
  int c_max = 3;
  int sc_min = 1;
  int sc_max = 2;

  void validate() const {
    if (c_min < 1 || c_max < c_min || sc_min < 1 || sc_max < sc_min)
      raise(Errc::ConfigError, "planning params must satisfy 1 <= min <= max");
  }
};

// Monitoring breadth/depth: chains per sub-concept, iterations per chain,
// and the evaluator rejection cap per calculation.
struct MonitoringParams {
  int chains_per_subconcept = 2;  // c_s
  int iterations = 10;            // t
  int max_attempts = 2;

  void validate() const {
    if (chains_per_subconcept < 1 || iterations < 1 || max_attempts < 1)
      raise(Errc::ConfigError, "monitoring params must be positive");
  }
};

struct FinalAnswer {
  std::string answer;
  std::map<std::string, int> vote_counts;
  int total_chains = 0;
  int empty_filtered = 0;
};

// Mode of the non-empty answers; ties break to the lexicographically
// smallest answer so replays are stable.
inline FinalAnswer majority_vote(const std::vector<std::string>& answers) {
  FinalAnswer result;
  result.total_chains = static_cast<int>(answers.size());
  for (const std::string& a : answers) {
    if (a.empty())
      ++result.empty_filtered;
    else
      ++result.vote_counts[a];
  }
  if (result.vote_counts.empty()) raise(Errc::NoValidAnswers, "all answers were empty");
  int best = 0;
  for (const auto& [answer, count] : result.vote_counts) {
    if (count > best) {  // map order is lexicographic, first wins ties
      best = count;
      result.answer = answer;
    }
  }
  return result;
}

// One generation/evaluation cycle's product.
struct StepOutcome {
  std::string content;
  std::vector<EvalVerdict> verdicts;
  int attempts = 0;
  bool ready = false;  // generator signalled completion
};

// A calculation chain under one sub-concept. Chains are linear: one new
// calculation per iteration, each conditioned on the chain's own history.
struct Chain {
  NodeId concept_id;
  NodeId subconcept;
  NodeId leaf;  // deepest calculation, or the sub-concept while empty
  bool fix_done = false;
  bool ready = false;
};

struct RunResult {
  FinalAnswer answer;
  ConceptTree tree;
};

struct EngineOptions {
  int chain_concurrency = 1;
  std::string completion_marker = "ANSWER READY";
  int plan_parse_retries = 1;
  int verdict_parse_retries = 1;
};

// The three-phase state machine. All backend traffic flows through the hub;
// all events land in per-stream trace buffers flushed in deterministic order,
// so a scripted run is a pure function of (problem, params, scripts).
class Engine {
public:
  Engine(BackendHub& hub, const TemplateSet& templates, TraceWriter& trace,
         EngineOptions options = {})
      : hub_(hub), templates_(templates), trace_(trace), options_(std::move(options)) {}

  // --- planning ---

  ConceptTree plan(const std::string& problem_id, const std::string& problem,
                   const PlanningParams& params) {
    params.validate();
    if (problem.empty()) raise(Errc::ConfigError, "problem statement is empty");
    TraceStream stream(Phase::Planning, "plan");
    ConceptTree tree(problem_id, static_cast<std::size_t>(params.c_max),
                     static_cast<std::size_t>(params.sc_max));

    Bindings p0{{"question", problem},
                {"C_min", std::to_string(params.c_min)},
                {"C_max", std::to_string(params.c_max)}};
    auto [objective, concepts] = plan_call_p0(p0, params, stream);
    tree.set_objective(objective);
    for (const std::string& c : concepts) tree.add_concept(c);

    for (NodeId concept_id : tree.concepts()) {
      Bindings p1{{"question", problem},
                  {"objective", tree.objective()},
                  {"concept", tree.node(concept_id).content},
                  {"SC_min", std::to_string(params.sc_min)},
                  {"SC_max", std::to_string(params.sc_max)}};
      std::vector<std::string> subs = plan_call_list(TemplateId::P1, Role::Planner, p1,
                                                     params.sc_min, params.sc_max, stream);
      for (const std::string& s : subs) tree.add_subconcept(concept_id, s);
    }

    trace_.flush_stream(stream);
    tree.validate();
    return tree;
  }

  // --- monitoring ---

  Chain make_chain(const ConceptTree& tree, NodeId subconcept) const {
    const TreeNode& sc = tree.node(subconcept);
    if (sc.kind != NodeKind::SubConcept)
      raise(Errc::InvalidParent, "chains hang off sub-concept nodes");
    return Chain{*sc.parent, subconcept, subconcept, false, false};
  }

  // Generate-evaluate one calculation and append it to the chain.
  NodeId step_chain(ConceptTree& tree, Chain& chain, const MonitoringParams& params,
                    TraceStream& stream) {
    if (chain.ready || tree.has_finished_child(chain.leaf))
      raise(Errc::ChainTerminated, "chain is already terminated");
    ChainContext ctx = context_from_tree(tree, chain);
    StepOutcome out = generate_step(ctx, params, stream);
    NodeId node = tree.append_calculation(chain.leaf, out.content);
    tree.record_verdicts(node, out.verdicts, out.attempts);
    chain.leaf = node;
    chain.ready = out.ready;
    return node;
  }

  // One fixer sweep over the chain's still-failing calculations. A chain
  // gets exactly one such pass per run.
  void fix_pass(ConceptTree& tree, Chain& chain, TraceStream& stream) {
    if (chain.fix_done) raise(Errc::SecondFixPass, "fix pass already ran for this chain");
    ChainContext ctx = context_from_tree(tree, chain);
    std::vector<NodeId> path = tree.path_from_root(chain.leaf);
    std::size_t step_idx = 0;
    for (NodeId id : path) {
      if (tree.node(id).kind != NodeKind::Calculation) continue;
      if (ctx.steps[step_idx].failing) {
        std::string fixed = fix_step(ctx, step_idx, stream);
        tree.apply_fix(id, fixed);
        ctx.steps[step_idx].content = fixed;
        ctx.steps[step_idx].failing = false;
      }
      ++step_idx;
    }
    chain.fix_done = true;
  }

  // Runs every chain to completion: t iterations (or early completion
  // marker), the fixer sweep, then one solver call that closes the chain
  // with a finished leaf. Chains run independently — possibly on several
  // threads — and merge into the tree in chain order, so the result is
  // independent of scheduling.
  void monitor(ConceptTree& tree, const MonitoringParams& params) {
    params.validate();
    std::vector<ChainTask> tasks = enumerate_chains(tree, params);
    if (tasks.empty()) raise(Errc::MonitoringFailed, "planning output has no sub-concepts");

    std::vector<ChainResult> results(tasks.size());
    run_tasks(tree, tasks, params, results);

    std::size_t errored = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      ChainResult& r = results[i];
      trace_.flush_stream(*r.stream);
      NodeId parent = tasks[i].subconcept;
      for (std::size_t s = 0; s < r.steps.size(); ++s) {
        NodeId node = tree.append_calculation(parent, r.steps[s].content);
        tree.record_verdicts(node, r.steps[s].verdicts, r.steps[s].attempts);
        if (r.fixes[s]) tree.apply_fix(node, *r.fixes[s]);
        parent = node;
      }
      if (r.errored) {
        ++errored;
        continue;
      }
      tree.mark_finished(parent, r.answer);
    }
    if (errored == tasks.size())
      raise(Errc::MonitoringFailed, "every chain errored terminally");
    tree.validate();
  }

  // --- reviewing ---

  FinalAnswer review(ConceptTree& tree) {
    std::vector<std::string> all = tree.collect_answers();
    std::vector<std::string> kept;
    for (const std::string& a : all)
      if (!detail::trim(a).empty()) kept.push_back(detail::trim(a));
    if (kept.empty())
      raise(Errc::NoValidAnswers, all.empty() ? "tree has no finished leaves"
                                              : "all finished answers are empty");

    TraceStream stream(Phase::Reviewing, "review");
    std::string listing;
    for (std::size_t i = 0; i < kept.size(); ++i)
      listing += std::to_string(i + 1) + ". " + kept[i] + "\n";
    Bindings p6{{"objective", tree.objective()}, {"answers", listing}};
    ChatExchange ex = hub_.complete(Role::Reviewer, render_messages(TemplateId::P6, p6),
                                    Phase::Reviewing, stream, TemplateId::P6);

    // The reviewer normalizes; the count is arithmetic, done here. Lines the
    // reviewer failed to produce fall back to the raw answer.
    std::map<int, std::string> normalized = parse_numbered_map(ex.response, (int)kept.size());
    std::vector<std::string> votes;
    votes.reserve(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
      auto it = normalized.find(static_cast<int>(i) + 1);
      std::string v = it == normalized.end() ? kept[i] : it->second;
      votes.push_back(v.empty() ? kept[i] : v);
    }

    FinalAnswer result = majority_vote(votes);
    result.total_chains = static_cast<int>(all.size());
    result.empty_filtered = static_cast<int>(all.size() - kept.size());

    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [a, c] : result.vote_counts) counts[a] = c;
    stream.emit("vote", {{"answer", result.answer},
                         {"counts", counts},
                         {"total_chains", result.total_chains},
                         {"empty_filtered", result.empty_filtered}});
    trace_.flush_stream(stream);
    return result;
  }

  // --- full pipeline ---

  RunResult run_pipeline(const std::string& problem_id, const std::string& problem,
                         const PlanningParams& pp, const MonitoringParams& mp) {
    hub_.require_all_roles_bound();
    ConceptTree tree;
    try {
      tree = plan(problem_id, problem, pp);
    } catch (Error& e) {
      e.set_phase("planning");
      throw;
    }
    try {
      monitor(tree, mp);
    } catch (Error& e) {
      e.set_phase("monitoring");
      throw;
    }
    try {
      FinalAnswer answer = review(tree);
      return RunResult{std::move(answer), std::move(tree)};
    } catch (Error& e) {
      e.set_phase("reviewing");
      throw;
    }
  }

private:
  struct StepInfo {
    std::string content;
    bool failing = false;
    std::string fail_reason;
  };

  struct ChainContext {
    std::string objective;
    std::string concept_text;
    std::string subconcept_text;
    std::vector<StepInfo> steps;
  };

  struct ChainTask {
    NodeId concept_id;
    NodeId subconcept;
    std::string stream_id;
  };

  struct ChainResult {
    std::vector<StepOutcome> steps;
    std::vector<std::optional<std::string>> fixes;  // parallel to steps
    std::string answer;
    bool errored = false;
    std::string error;
    std::unique_ptr<TraceStream> stream;
  };

  std::vector<ChatMessage> render_messages(TemplateId id, const Bindings& bindings) const {
    return {ChatMessage{"user", templates_.render(id, bindings)}};
  }

  static std::string render_steps(const std::vector<StepInfo>& steps) {
    if (steps.empty()) return "(none yet)";
    std::string out;
    for (std::size_t i = 0; i < steps.size(); ++i)
      out += std::to_string(i + 1) + ". " + steps[i].content + "\n";
    return out;
  }

  ChainContext context_from_tree(const ConceptTree& tree, const Chain& chain) const {
    ChainContext ctx;
    ctx.objective = tree.objective();
    ctx.concept_text = tree.node(chain.concept_id).content;
    ctx.subconcept_text = tree.node(chain.subconcept).content;
    for (NodeId id : tree.path_from_root(chain.leaf)) {
      const TreeNode& n = tree.node(id);
      if (n.kind != NodeKind::Calculation) continue;
      StepInfo info;
      info.content = n.content;
      if (!n.fixed && !n.verdicts.empty() && !n.verdicts.back().pass) {
        info.failing = true;
        info.fail_reason = *n.verdicts.back().reason;
      }
      ctx.steps.push_back(std::move(info));
    }
    return ctx;
  }

  // P0: objective + concept list, with one parse retry before PlanningFailed.
  std::pair<std::string, std::vector<std::string>> plan_call_p0(const Bindings& bindings,
                                                                const PlanningParams& params,
                                                                TraceStream& stream) {
    std::string last_error;
    for (int attempt = 0; attempt <= options_.plan_parse_retries; ++attempt) {
      ChatExchange ex = hub_.complete(Role::Planner, render_messages(TemplateId::P0, bindings),
                                      Phase::Planning, stream, TemplateId::P0);
      try {
        std::string objective = parse_objective(ex.response);
        std::vector<std::string> concepts =
            parse_plan_response(ex.response, params.c_min, params.c_max);
        return {objective, concepts};
      } catch (const Error& e) {
        if (e.code() != Errc::ParseFailure) throw;
        last_error = e.what();
      }
    }
    raise(Errc::PlanningFailed, "planner response unusable after retry: " + last_error);
  }

  std::vector<std::string> plan_call_list(TemplateId id, Role role, const Bindings& bindings,
                                          int min_items, int max_items, TraceStream& stream) {
    std::string last_error;
    for (int attempt = 0; attempt <= options_.plan_parse_retries; ++attempt) {
      ChatExchange ex =
          hub_.complete(role, render_messages(id, bindings), Phase::Planning, stream, id);
      try {
        return parse_plan_response(ex.response, min_items, max_items);
      } catch (const Error& e) {
        if (e.code() != Errc::ParseFailure) throw;
        last_error = e.what();
      }
    }
    raise(Errc::PlanningFailed, "planner response unusable after retry: " + last_error);
  }

  // The generate/evaluate loop for one calculation. On a failing verdict the
  // generator regenerates conditioned on the rejection reason, up to
  // max_attempts rejections; the last candidate is kept either way.
  StepOutcome generate_step(const ChainContext& ctx, const MonitoringParams& params,
                            TraceStream& stream) {
    StepOutcome out;
    std::string base_prior = render_steps(ctx.steps);
    std::string prior = base_prior;
    int step_no = static_cast<int>(ctx.steps.size()) + 1;

    while (true) {
      Bindings p2{{"objective", ctx.objective},
                  {"concept", ctx.concept_text},
                  {"subconcept", ctx.subconcept_text},
                  {"prior_calculations", prior}};
      ChatExchange gen = hub_.complete(Role::Generator, render_messages(TemplateId::P2, p2),
                                       Phase::Monitoring, stream, TemplateId::P2);
      out.content = detail::trim(gen.response);

      EvalVerdict verdict = evaluate_step(ctx, out.content, base_prior, stream);
      out.verdicts.push_back(verdict);
      stream.emit("verdict", verdict.pass
                                 ? nlohmann::json{{"step", step_no}, {"pass", true}}
                                 : nlohmann::json{{"step", step_no},
                                                  {"pass", false},
                                                  {"reason", *verdict.reason}});
      if (verdict.pass) break;
      ++out.attempts;
      if (out.attempts >= params.max_attempts) break;
      prior = base_prior + "\nPreviously rejected attempt:\n" + out.content +
              "\nRejection reason: " + *verdict.reason +
              "\nProvide a corrected calculation instead.";
    }
    out.ready = out.content.find(options_.completion_marker) != std::string::npos;
    return out;
  }

  EvalVerdict evaluate_step(const ChainContext& ctx, const std::string& candidate,
                            const std::string& prior, TraceStream& stream) {
    Bindings p3{{"objective", ctx.objective},
                {"concept", ctx.concept_text},
                {"subconcept", ctx.subconcept_text},
                {"prior_calculations", prior},
                {"calculation", candidate}};
    for (int attempt = 0; attempt <= options_.verdict_parse_retries; ++attempt) {
      ChatExchange ev = hub_.complete(Role::Evaluator, render_messages(TemplateId::P3, p3),
                                      Phase::Monitoring, stream, TemplateId::P3);
      try {
        return parse_verdict(ev.response);
      } catch (const Error& e) {
        if (e.code() != Errc::ParseFailure) throw;
      }
    }
    // A silent pass would defeat the accuracy check; coerce to a failure.
    return EvalVerdict::failing("unparseable verdict");
  }

  std::string fix_step(const ChainContext& ctx, std::size_t idx, TraceStream& stream) {
    std::vector<StepInfo> before(ctx.steps.begin(), ctx.steps.begin() + idx);
    Bindings p5{{"objective", ctx.objective},
                {"concept", ctx.concept_text},
                {"subconcept", ctx.subconcept_text},
                {"prior_calculations", render_steps(before)},
                {"calculation", ctx.steps[idx].content},
                {"reason", ctx.steps[idx].fail_reason}};
    ChatExchange fx = hub_.complete(Role::Fixer, render_messages(TemplateId::P5, p5),
                                    Phase::Monitoring, stream, TemplateId::P5);
    std::string fixed = detail::trim(fx.response);
    stream.emit("repair", {{"step", idx + 1}, {"content", fixed}});
    return fixed.empty() ? ctx.steps[idx].content : fixed;
  }

  // Solver turns the chain's partial solution into a candidate final answer;
  // an unextractable answer becomes the empty string and is filtered by the
  // review phase.
  std::string solve_chain(const ChainContext& ctx, TraceStream& stream) {
    Bindings p4{{"objective", ctx.objective},
                {"concept", ctx.concept_text},
                {"subconcept", ctx.subconcept_text},
                {"prior_calculations", render_steps(ctx.steps)}};
    ChatExchange sv = hub_.complete(Role::Solver, render_messages(TemplateId::P4, p4),
                                    Phase::Monitoring, stream, TemplateId::P4);
    std::string answer;
    try {
      answer = parse_final_answer(sv.response);
    } catch (const Error& e) {
      if (e.code() != Errc::EmptyAnswer) throw;
    }
    stream.emit("finish", {{"answer", answer}, {"steps", ctx.steps.size()}});
    return answer;
  }

  std::vector<ChainTask> enumerate_chains(const ConceptTree& tree,
                                          const MonitoringParams& params) const {
    std::vector<ChainTask> tasks;
    int ci = 0;
    for (NodeId concept_id : tree.concepts()) {
      ++ci;
      int sj = 0;
      for (NodeId sub_id : tree.children_of(concept_id)) {
        if (tree.node(sub_id).kind != NodeKind::SubConcept) continue;
        ++sj;
        for (int k = 1; k <= params.chains_per_subconcept; ++k) {
          tasks.push_back(ChainTask{concept_id, sub_id,
                                    "c" + std::to_string(ci) + ".s" + std::to_string(sj) + ".k" +
                                        std::to_string(k)});
        }
      }
    }
    return tasks;
  }

  void run_tasks(const ConceptTree& tree, const std::vector<ChainTask>& tasks,
                 const MonitoringParams& params, std::vector<ChainResult>& results) {
    auto worker_body = [&](std::size_t i) {
      const ChainTask& task = tasks[i];
      ChainResult& r = results[i];
      r.stream = std::make_unique<TraceStream>(Phase::Monitoring, task.stream_id);
      ChainContext ctx;
      ctx.objective = tree.objective();
      ctx.concept_text = tree.node(task.concept_id).content;
      ctx.subconcept_text = tree.node(task.subconcept).content;
      try {
        for (int iter = 0; iter < params.iterations; ++iter) {
          StepOutcome out = generate_step(ctx, params, *r.stream);
          StepInfo info;
          info.content = out.content;
          if (!out.verdicts.back().pass) {
            info.failing = true;
            info.fail_reason = *out.verdicts.back().reason;
          }
          ctx.steps.push_back(std::move(info));
          bool ready = out.ready;
          r.steps.push_back(std::move(out));
          r.fixes.emplace_back(std::nullopt);
          if (ready) break;
        }
        for (std::size_t s = 0; s < ctx.steps.size(); ++s) {
          if (!ctx.steps[s].failing) continue;
          std::string fixed = fix_step(ctx, s, *r.stream);
          ctx.steps[s].content = fixed;
          ctx.steps[s].failing = false;
          r.fixes[s] = fixed;
        }
        r.answer = solve_chain(ctx, *r.stream);
      } catch (const Error& e) {
        r.errored = true;
        r.error = e.what();
      }
    };

    int workers = std::min<int>(options_.chain_concurrency, static_cast<int>(tasks.size()));
    if (workers <= 1) {
      for (std::size_t i = 0; i < tasks.size(); ++i) worker_body(i);
      return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1))
          worker_body(i);
      });
    }
    for (std::thread& t : pool) t.join();
  }

  BackendHub& hub_;
  const TemplateSet& templates_;
  TraceWriter& trace_;
  EngineOptions options_;
};

}  // namespace mdtoc
