#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fibrelab/fibred_net.hpp"
#include "fibrelab/formula.hpp"
#include "fibrelab/graph_nets.hpp"

namespace fibrelab {

enum class CompileMode { Gnn, Gat, Transformer };

std::string mode_name(CompileMode mode);

struct UnravelNode {
  NodeId id;
  std::vector<Vertex> walk;  // lazy walk from the root vertex; empty for attention nodes
  Vertex vertex = 0;         // last walk element (the owner's vertex for attention nodes)
  std::size_t depth = 0;
  bool attention = false;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;  // walk children (self first, then neighbours ascending), then the attention child
};

/// The lazy unravelling of a vertex: one node per lazy walk of length <= depth.
struct UnravelTree {
  NodeId root;
  std::size_t depth = 0;
  std::map<NodeId, UnravelNode> nodes;
  std::vector<NodeId> order;  // breadth first

  const UnravelNode& node(const NodeId& id) const { return nodes.at(id); }
  std::size_t size() const { return nodes.size(); }
};

/// Node ids are "w" followed by the walk joined with '.', e.g. "w0.2.2";
/// attention nodes prefix their owner's id with "a:".
UnravelTree lazy_unravel(const Graph& graph, Vertex u, std::size_t depth, CompileMode mode);

std::string to_dot(const UnravelTree& tree);

/// A compiled fibring: architecture and root instance depend only on the
/// network, the graph and the vertex; node features enter through the rules.
struct CompiledFibring {
  CompileMode mode = CompileMode::Gnn;
  UnravelTree tree;
  NetworkInstance root_instance = NetworkInstance::identity(1);
  FibringArchitecture architecture;
  std::map<EdgeKey, FibringRule> fixed_rules;  // rules that do not read features
  std::map<EdgeKey, Vertex> leaf_edges;        // edges whose constant rule injects a vertex's feature
  std::map<EdgeKey, NetworkInstance> leaf_instances;
  RVector root_offset;  // root input cube offset (positional encoding in transformer mode)

  /// The rules for the given per-vertex features (the encoded features in transformer mode).
  std::map<EdgeKey, FibringRule> rule_family(const std::vector<RVector>& features) const;
  FibredNetwork network(const std::vector<RVector>& features) const;
  Vertex root_vertex() const { return tree.node(tree.root).vertex; }
};

CompiledFibring compile(const GnnInstance& inst, const Graph& graph, Vertex u);
CompiledFibring compile(const GatInstance& inst, const Graph& graph, Vertex u);
/// Compiles token `t` of a length-`s` sequence over the complete graph; `offset` is pos(t, s).
CompiledFibring compile_transformer(const GatInstance& inst, std::size_t s, std::size_t t, const RVector& offset);

struct CharacteristicPredicate {
  NetworkInstance instance;
  std::size_t n = 0;
  std::optional<RVector> offset;  // cube {offset_i, offset_i + 1}^n; zeros when absent
  std::optional<Formula> formula;
};

/// Largest cube dimension materialized by default; FIBRELAB_MAX_CUBE raises it.
std::size_t max_cube_bits();

/// DNF with one disjunct per accepted cube vertex, literals in proposition order.
/// Throws GuardError when n exceeds `max_bits`.
Formula characteristic_formula(const CharacteristicPredicate& p, std::size_t max_bits = max_cube_bits());

/// The box-nested formula that follows the fibring tree down to its leaves.
Formula psi_formula(const Formula& phi, const FibringArchitecture& arch);

Formula extract_theorem3_formula(const CompiledFibring& compiled, std::size_t max_bits = max_cube_bits());

}  // namespace fibrelab
