#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "mdtoc/errors.hpp"
#include "mdtoc/verdict.hpp"

namespace mdtoc {

// Node identifier, unique within one tree and stable across serialization.
struct NodeId {
  std::uint64_t value = 0;
  friend bool operator==(NodeId a, NodeId b) { return a.value == b.value; }
  friend bool operator!=(NodeId a, NodeId b) { return a.value != b.value; }
  friend bool operator<(NodeId a, NodeId b) { return a.value < b.value; }
};

enum class NodeKind { Concept, SubConcept, Calculation, Finished };

inline const char* node_kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Concept: return "concept";
    case NodeKind::SubConcept: return "subconcept";
    case NodeKind::Calculation: return "calculation";
    case NodeKind::Finished: return "finished";
  }
  return "?";
}

inline NodeKind node_kind_from_name(const std::string& s) {
  if (s == "concept") return NodeKind::Concept;
  if (s == "subconcept") return NodeKind::SubConcept;
  if (s == "calculation") return NodeKind::Calculation;
  if (s == "finished") return NodeKind::Finished;
  raise(Errc::SchemaError, "unknown node kind '" + s + "'");
}

struct TreeNode {
  NodeId id;
  NodeKind kind = NodeKind::Concept;
  int depth = 1;
  std::string content;
  std::optional<NodeId> parent;
  // Evaluator rejection count; only calculation nodes accumulate these.
  int attempts = 0;
  std::vector<EvalVerdict> verdicts;
  bool fixed = false;
};

// The dynamic tree: concepts at depth 1, sub-concepts at depth 2, calculation
// chains below, each chain closed by at most one finished leaf. Child order is
// insertion order so replays are stable.
class ConceptTree {
public:
  ConceptTree() = default;
  explicit ConceptTree(std::string problem_id, std::size_t concept_cap = kUnbounded,
                       std::size_t subconcept_cap = kUnbounded)
      : problem_id_(std::move(problem_id)),
        concept_cap_(concept_cap),
        subconcept_cap_(subconcept_cap) {}

  static constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

  const std::string& problem_id() const { return problem_id_; }
  const std::string& objective() const { return objective_; }
  void set_objective(std::string q) { objective_ = std::move(q); }

  NodeId add_concept(const std::string& content) {
    if (concept_count_ >= concept_cap_)
      raise(Errc::CapacityExceeded,
            "concept count would exceed " + std::to_string(concept_cap_));
    ++concept_count_;
    return push_node(NodeKind::Concept, 1, content, std::nullopt);
  }

  NodeId add_subconcept(NodeId parent, const std::string& content) {
    const TreeNode& p = node(parent);
    if (p.kind != NodeKind::Concept)
      raise(Errc::InvalidParent, "sub-concept parent must be a concept node");
    if (children_of(parent).size() >= subconcept_cap_)
      raise(Errc::CapacityExceeded,
            "sub-concept count would exceed " + std::to_string(subconcept_cap_));
    return push_node(NodeKind::SubConcept, 2, content, parent);
  }

  NodeId append_calculation(NodeId parent, const std::string& content) {
    const TreeNode& p = node(parent);
    if (p.kind != NodeKind::SubConcept && p.kind != NodeKind::Calculation)
      raise(Errc::InvalidParent, "calculation parent must be a sub-concept or calculation");
    if (has_finished_child(parent))
      raise(Errc::ChainTerminated, "chain below node " + std::to_string(parent.value) +
                                       " is already terminated");
    return push_node(NodeKind::Calculation, p.depth + 1, content, parent);
  }

  NodeId mark_finished(NodeId parent, const std::string& answer) {
    const TreeNode& p = node(parent);
    if (p.kind != NodeKind::SubConcept && p.kind != NodeKind::Calculation)
      raise(Errc::InvalidParent, "finished parent must be a sub-concept or calculation");
    if (has_finished_child(parent))
      raise(Errc::ChainTerminated, "chain below node " + std::to_string(parent.value) +
                                       " is already terminated");
    return push_node(NodeKind::Finished, p.depth + 1, answer, parent);
  }

  // Contents of all finished leaves, in tree-insertion order.
  std::vector<std::string> collect_answers() const {
    std::vector<std::string> out;
    for (const TreeNode& n : nodes_)
      if (n.kind == NodeKind::Finished) out.push_back(n.content);
    return out;
  }

  // Fixer rewrite of a calculation node.
  void apply_fix(NodeId id, const std::string& new_content) {
    TreeNode& n = mutable_node(id);
    if (n.kind != NodeKind::Calculation)
      raise(Errc::InvalidParent, "only calculation nodes can be fixed");
    n.content = new_content;
    n.fixed = true;
  }

  void record_verdicts(NodeId id, std::vector<EvalVerdict> verdicts, int attempts) {
    TreeNode& n = mutable_node(id);
    if (n.kind != NodeKind::Calculation)
      raise(Errc::InvalidParent, "verdicts belong to calculation nodes");
    n.verdicts = std::move(verdicts);
    n.attempts = attempts;
  }

  bool contains(NodeId id) const { return index_.count(id.value) != 0; }

  const TreeNode& node(NodeId id) const {
    auto it = index_.find(id.value);
    if (it == index_.end())
      raise(Errc::UnknownNode, "no node with id " + std::to_string(id.value));
    return nodes_[it->second];
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }

  std::vector<NodeId> children_of(NodeId id) const {
    std::vector<NodeId> out;
    for (const TreeNode& n : nodes_)
      if (n.parent && *n.parent == id) out.push_back(n.id);
    return out;
  }

  std::vector<NodeId> concepts() const {
    std::vector<NodeId> out;
    for (const TreeNode& n : nodes_)
      if (n.kind == NodeKind::Concept) out.push_back(n.id);
    return out;
  }

  bool has_finished_child(NodeId id) const {
    for (const TreeNode& n : nodes_)
      if (n.parent && *n.parent == id && n.kind == NodeKind::Finished) return true;
    return false;
  }

  // Path from a concept-layer ancestor down to `id`, inclusive.
  std::vector<NodeId> path_from_root(NodeId id) const {
    std::vector<NodeId> rev;
    std::optional<NodeId> cur = id;
    while (cur) {
      rev.push_back(*cur);
      cur = node(*cur).parent;
    }
    return {rev.rbegin(), rev.rend()};
  }

  // Structural invariants: depth arithmetic, kind/depth pairing, single parent
  // kind rules, one finished leaf per chain. Throws on the first violation.
  void validate() const {
    std::size_t finished_ok = 0;
    for (const TreeNode& n : nodes_) {
      switch (n.kind) {
        case NodeKind::Concept:
          if (n.depth != 1 || n.parent) raise(Errc::SchemaError, "concept must be a depth-1 root");
          break;
        case NodeKind::SubConcept:
          if (n.depth != 2 || !n.parent || node(*n.parent).kind != NodeKind::Concept)
            raise(Errc::SchemaError, "sub-concept must sit at depth 2 under a concept");
          break;
        case NodeKind::Calculation: {
          if (n.depth < 3 || !n.parent) raise(Errc::SchemaError, "calculation must be at depth >= 3");
          NodeKind pk = node(*n.parent).kind;
          if (pk != NodeKind::SubConcept && pk != NodeKind::Calculation)
            raise(Errc::SchemaError, "calculation parent must be sub-concept or calculation");
          break;
        }
        case NodeKind::Finished: {
          if (!n.parent) raise(Errc::SchemaError, "finished leaf needs a parent");
          NodeKind pk = node(*n.parent).kind;
          if (pk != NodeKind::Calculation && pk != NodeKind::SubConcept)
            raise(Errc::SchemaError, "finished parent must be calculation or sub-concept");
          if (!children_of(n.id).empty()) raise(Errc::SchemaError, "finished node must be a leaf");
          ++finished_ok;
          break;
        }
      }
      if (n.parent && n.depth != node(*n.parent).depth + 1)
        raise(Errc::SchemaError, "depth must be parent depth + 1");
      if (n.kind != NodeKind::Calculation && (n.attempts != 0 || !n.verdicts.empty()))
        raise(Errc::SchemaError, "only calculation nodes carry attempts/verdicts");
    }
    (void)finished_ok;
  }

  // --- serialization (field names are part of the trace contract) ---

  nlohmann::json to_json() const {
    nlohmann::json nodes = nlohmann::json::array();
    for (const TreeNode& n : nodes_) {
      nlohmann::json verdicts = nlohmann::json::array();
      for (const EvalVerdict& v : n.verdicts) {
        nlohmann::json jv{{"pass", v.pass}};
        if (v.reason) jv["reason"] = *v.reason;
        verdicts.push_back(jv);
      }
      nlohmann::json jn{{"id", n.id.value},
                        {"kind", node_kind_name(n.kind)},
                        {"depth", n.depth},
                        {"content", n.content},
                        {"attempts", n.attempts},
                        {"verdicts", verdicts},
                        {"fixed", n.fixed}};
      if (n.parent)
        jn["parent"] = n.parent->value;
      else
        jn["parent"] = nullptr;
      nodes.push_back(jn);
    }
    return nlohmann::json{
        {"problem_id", problem_id_}, {"objective", objective_}, {"nodes", nodes}};
  }

  static ConceptTree from_json(const nlohmann::json& j) {
    try {
      ConceptTree t(j.at("problem_id").get<std::string>());
      t.objective_ = j.at("objective").get<std::string>();
      for (const auto& jn : j.at("nodes")) {
        TreeNode n;
        n.id = NodeId{jn.at("id").get<std::uint64_t>()};
        n.kind = node_kind_from_name(jn.at("kind").get<std::string>());
        n.depth = jn.at("depth").get<int>();
        n.content = jn.at("content").get<std::string>();
        if (!jn.at("parent").is_null()) n.parent = NodeId{jn.at("parent").get<std::uint64_t>()};
        n.attempts = jn.at("attempts").get<int>();
        n.fixed = jn.at("fixed").get<bool>();
        for (const auto& jv : jn.at("verdicts")) {
          if (jv.at("pass").get<bool>())
            n.verdicts.push_back(EvalVerdict::passing());
          else
            n.verdicts.push_back(EvalVerdict::failing(jv.at("reason").get<std::string>()));
        }
        if (t.index_.count(n.id.value)) raise(Errc::SchemaError, "duplicate node id");
        t.index_[n.id.value] = t.nodes_.size();
        t.next_id_ = std::max(t.next_id_, n.id.value + 1);
        if (n.kind == NodeKind::Concept) ++t.concept_count_;
        t.nodes_.push_back(std::move(n));
      }
      t.validate();
      return t;
    } catch (const nlohmann::json::exception& e) {
      raise(Errc::SchemaError, std::string("malformed tree document: ") + e.what());
    }
  }

  std::string serialize() const { return to_json().dump(); }
  static ConceptTree deserialize(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) raise(Errc::SchemaError, "tree document is not valid JSON");
    return from_json(j);
  }

private:
  NodeId push_node(NodeKind kind, int depth, const std::string& content,
                   std::optional<NodeId> parent) {
    TreeNode n;
    n.id = NodeId{next_id_++};
    n.kind = kind;
    n.depth = depth;
    n.content = content;
    n.parent = parent;
    index_[n.id.value] = nodes_.size();
    nodes_.push_back(std::move(n));
    return nodes_.back().id;
  }

  TreeNode& mutable_node(NodeId id) {
    auto it = index_.find(id.value);
    if (it == index_.end())
      raise(Errc::UnknownNode, "no node with id " + std::to_string(id.value));
    return nodes_[it->second];
  }

  std::string problem_id_;
  std::string objective_;
  std::size_t concept_cap_ = kUnbounded;
  std::size_t subconcept_cap_ = kUnbounded;
  std::size_t concept_count_ = 0;
  std::uint64_t next_id_ = 1;
  std::vector<TreeNode> nodes_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

}  // namespace mdtoc
