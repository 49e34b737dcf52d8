#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "fibrelab/errors.hpp"
#include "fibrelab/feedforward.hpp"

namespace fibrelab {

using NodeId = std::string;
using EdgeKey = std::pair<NodeId, NodeId>;  // (parent, child)

/// Layer of the parent into which a child's output is spliced, and where.
struct EdgeLabel {
  std::size_t layer = 0;
  std::vector<std::size_t> positions;  // sorted, distinct

  friend bool operator==(const EdgeLabel&, const EdgeLabel&) = default;
};

struct FibringEdge {
  NodeId parent;
  NodeId child;
  EdgeLabel label;

  friend bool operator==(const FibringEdge&, const FibringEdge&) = default;
};

/// A tree of neural architectures whose edges say where children splice in.
class FibringArchitecture {
 public:
  FibringArchitecture() = default;
  FibringArchitecture(NodeId root, std::map<NodeId, NeuralArchitecture> nodes, std::vector<FibringEdge> edges);

  const NodeId& root() const { return root_; }
  const std::map<NodeId, NeuralArchitecture>& nodes() const { return nodes_; }
  const std::vector<FibringEdge>& edges() const { return edges_; }
  const NeuralArchitecture& arch(const NodeId& node) const;
  bool contains(const NodeId& node) const { return nodes_.count(node) != 0; }

  /// Outgoing edges of `node`, ordered by layer and then lexicographically by positions.
  const std::vector<FibringEdge>& children(const NodeId& node) const;
  std::optional<NodeId> parent(const NodeId& node) const;
  const FibringEdge& edge(const NodeId& parent, const NodeId& child) const;

  /// Nodes in breadth-first order from the root, children in canonical order.
  std::vector<NodeId> bfs_order() const;

  /// The subtree rooted at `node`.
  FibringArchitecture subtree(const NodeId& node) const;
  /// A copy with `node` and all its descendants removed (node must not be the root).
  FibringArchitecture without_subtree(const NodeId& node) const;

  std::size_t height() const;

  friend bool operator==(const FibringArchitecture&, const FibringArchitecture&) = default;

 private:
  NodeId root_;
  std::map<NodeId, NeuralArchitecture> nodes_;
  std::vector<FibringEdge> edges_;
  std::map<NodeId, std::vector<FibringEdge>> children_;
  std::map<NodeId, NodeId> parent_;
};

struct TableEntry {
  RVector key;
  NetworkInstance instance;
  RVector input;
};

/// Explicit finite fibring function, keyed by the canonical serialization of the parent vector.
struct TableRule {
  std::map<std::string, TableEntry> entries;

  void insert(const RVector& key, NetworkInstance instance, RVector input);
};

/// Ignores the parent vector.
struct ConstantRule {
  NetworkInstance instance;
  RVector input;
};

/// Hands the parent vector to the child unchanged.
struct SelfFibreRule {
  NetworkInstance instance;
};

/// Self-fibring into a two-layer attention gadget: an identity layer with the
/// AttentionCombine activation, then a projection onto the first block.
class GatGadgetRule {
 public:
  GatGadgetRule(std::size_t block_count, std::size_t block_dim, RVector attention_vector, RVector bias);

  std::size_t block_count() const { return block_count_; }
  std::size_t block_dim() const { return block_dim_; }
  const RVector& attention_vector() const { return attention_vector_; }
  const RVector& bias() const { return bias_; }
  const NetworkInstance& instance() const { return instance_; }

 private:
  std::size_t block_count_;
  std::size_t block_dim_;
  RVector attention_vector_;
  RVector bias_;
  NetworkInstance instance_;
};

using FibringRule = std::variant<TableRule, ConstantRule, SelfFibreRule, GatGadgetRule>;

/// Raised when a table rule has no entry for the vector it was given.
class RuleDomainError : public Error {
 public:
  RuleDomainError(EdgeKey edge, RVector vector, const std::string& path);

  const EdgeKey& edge() const { return edge_; }
  const RVector& vector() const { return vector_; }

 private:
  EdgeKey edge_;
  RVector vector_;
};

/// The child instance and child input the rule produces for parent vector x.
std::pair<NetworkInstance, RVector> apply_rule(const FibringRule& rule, const RVector& x);

std::string rule_kind_name(const FibringRule& rule);

struct FibredNetwork {
  NetworkInstance root_instance;
  FibringArchitecture architecture;
  std::map<EdgeKey, FibringRule> rules;

  const FibringRule& rule(const NodeId& parent, const NodeId& child) const;
  /// Throws StructureError on a missing rule or a root-instance/architecture mismatch.
  void validate() const;
};

struct EvalStage {
  NodeId child;
  EdgeLabel label;
  RVector x;  // parent pre-activation at label.layer before splicing
  NetworkInstance instance;
  RVector y;  // child input
  RVector h;  // x with label.positions overwritten by the child's output
};

struct NodeTrace {
  RVector input;
  NetworkInstance instance;
  std::vector<EvalStage> stages;
  RVector output;
};

struct EvalTrace {
  std::map<NodeId, NodeTrace> nodes;
};

/// How stage i > 1 obtains its parent vector. `SplicedVector` continues from h_{i-1};
/// `ChildInput` continues from y_{i-1}, which only typechecks in special cases.
enum class StageChaining { SplicedVector, ChildInput };

/// Memoized subtree outputs keyed by node, instance storage and input.
/// Only valid while the network and the instances it saw stay alive and unchanged.
class SubtreeCache {
 public:
  const RVector* find(const NodeId& node, const NetworkInstance& instance, const std::string& input_key) const;
  void store(const NodeId& node, const NetworkInstance& instance, std::string input_key, RVector output);
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::tuple<NodeId, const void*, std::string>, RVector> entries_;
};

struct EvalOptions {
  StageChaining chaining = StageChaining::SplicedVector;
  SubtreeCache* cache = nullptr;  // consulted for untraced child subtrees
};

/// Output of the fibred network on x, with the full per-node trace.
std::pair<RVector, EvalTrace> evaluate_fibred(const FibredNetwork& net, const RVector& x, EvalOptions options = {});

/// Evaluates the fibred sub-network rooted at `node` with the given instance.
/// When `trace` is non-null, the node and all descendants are recorded.
RVector evaluate_subtree(const FibredNetwork& net, const NodeId& node, const NetworkInstance& instance,
                         const RVector& input, EvalTrace* trace = nullptr, EvalOptions options = {});

/// Stage tuples of a single node (children evaluated fully, not traced).
NodeTrace evaluate_node(const FibredNetwork& net, const NodeId& node, const NetworkInstance& instance,
                        const RVector& input, EvalOptions options = {});

bool classify_fibred(const FibredNetwork& net, const RVector& x);

struct ValidationIssue {
  std::string kind;  // "disjointness", "positions", "dimension", "layer"
  std::string detail;
};

struct ValidationReport {
  bool is_tree = false;
  bool disjoint = true;
  bool dimensions_consistent = true;
  bool in_class_F = false;
  std::vector<ValidationIssue> issues;

  bool valid() const { return is_tree && disjoint && dimensions_consistent; }
};

/// Checks disjointness and dimension constraints and the root class condition.
/// Cycles, unknown endpoints and multiple parents raise StructureError.
ValidationReport validate_architecture(const FibringArchitecture& arch);

/// Graphviz rendering of the tree; edges are labeled "(l, {s1,s2})".
std::string to_dot(const FibringArchitecture& arch);

}  // namespace fibrelab
