#include "fibrelab/fibred_net.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

namespace fibrelab {

namespace {

bool edge_order(const FibringEdge& a, const FibringEdge& b) {
  if (a.label.layer != b.label.layer) return a.label.layer < b.label.layer;
  if (a.label.positions != b.label.positions) return a.label.positions < b.label.positions;
  return a.child < b.child;
}

std::string positions_str(const std::vector<std::size_t>& positions) {
  std::string s = "{";
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(positions[i]);
  }
  return s + "}";
}

const std::vector<FibringEdge> kNoEdges;

}  // namespace

FibringArchitecture::FibringArchitecture(NodeId root, std::map<NodeId, NeuralArchitecture> nodes,
                                         std::vector<FibringEdge> edges)
    : root_(std::move(root)), nodes_(std::move(nodes)), edges_(std::move(edges)) {
  for (auto& e : edges_) std::sort(e.label.positions.begin(), e.label.positions.end());
  std::sort(edges_.begin(), edges_.end(), [](const FibringEdge& a, const FibringEdge& b) {
    return a.parent != b.parent ? a.parent < b.parent : edge_order(a, b);
  });
  for (const auto& e : edges_) {
    children_[e.parent].push_back(e);
    parent_.emplace(e.child, e.parent);
  }
}

const NeuralArchitecture& FibringArchitecture::arch(const NodeId& node) const {
  const auto it = nodes_.find(node);
  if (it == nodes_.end()) throw StructureError("unknown fibring node '" + node + "'");
  return it->second;
}

const std::vector<FibringEdge>& FibringArchitecture::children(const NodeId& node) const {
  const auto it = children_.find(node);
  return it == children_.end() ? kNoEdges : it->second;
}

std::optional<NodeId> FibringArchitecture::parent(const NodeId& node) const {
  const auto it = parent_.find(node);
  if (it == parent_.end()) return std::nullopt;
  return it->second;
}

const FibringEdge& FibringArchitecture::edge(const NodeId& parent, const NodeId& child) const {
  for (const auto& e : children(parent)) {
    if (e.child == child) return e;
  }
  throw StructureError("no edge " + parent + " -> " + child);
}

std::vector<NodeId> FibringArchitecture::bfs_order() const {
  std::vector<NodeId> order;
  if (root_.empty()) return order;
  std::deque<NodeId> queue{root_};
  std::set<NodeId> seen{root_};
  while (!queue.empty()) {
    NodeId n = queue.front();
    queue.pop_front();
    order.push_back(n);
    for (const auto& e : children(n)) {
      if (seen.insert(e.child).second) queue.push_back(e.child);
    }
  }
  return order;
}

FibringArchitecture FibringArchitecture::subtree(const NodeId& node) const {
  std::map<NodeId, NeuralArchitecture> nodes;
  std::vector<FibringEdge> edges;
  std::deque<NodeId> queue{node};
  while (!queue.empty()) {
    NodeId n = queue.front();
    queue.pop_front();
    nodes.emplace(n, arch(n));
    for (const auto& e : children(n)) {
      edges.push_back(e);
      queue.push_back(e.child);
    }
  }
  return FibringArchitecture(node, std::move(nodes), std::move(edges));
}

FibringArchitecture FibringArchitecture::without_subtree(const NodeId& node) const {
  if (node == root_) throw StructureError("cannot remove the root of a fibring architecture");
  const FibringArchitecture removed = subtree(node);
  std::map<NodeId, NeuralArchitecture> nodes;
  for (const auto& [id, a] : nodes_) {
    if (!removed.contains(id)) nodes.emplace(id, a);
  }
  std::vector<FibringEdge> edges;
  for (const auto& e : edges_) {
    if (!removed.contains(e.child)) edges.push_back(e);
  }
  return FibringArchitecture(root_, std::move(nodes), std::move(edges));
}

std::size_t FibringArchitecture::height() const {
  std::size_t best = 0;
  std::map<NodeId, std::size_t> depth{{root_, 0}};
  for (const auto& n : bfs_order()) {
    for (const auto& e : children(n)) {
      depth[e.child] = depth[n] + 1;
      best = std::max(best, depth[e.child]);
    }
  }
  return best;
}

void TableRule::insert(const RVector& key, NetworkInstance instance, RVector input) {
  entries.insert_or_assign(key.key(), TableEntry{key, std::move(instance), std::move(input)});
}

GatGadgetRule::GatGadgetRule(std::size_t block_count, std::size_t block_dim, RVector attention_vector, RVector bias)
    : block_count_(block_count),
      block_dim_(block_dim),
      attention_vector_(std::move(attention_vector)),
      bias_(std::move(bias)),
      instance_([&] {
        const std::size_t width = block_count * block_dim;
        AttentionCombineKind kind{block_count, block_dim, attention_vector_, bias_};
        NeuralArchitecture arch{{width, width, block_dim}, {ActivationSpec::attention_combine(kind)}};
        RMatrix project(block_dim, width);
        project.set_block(0, 0, RMatrix::identity(block_dim));
        return NetworkInstance(std::move(arch), {DenseLayer{RMatrix::identity(width), RVector::zeros(width)},
                                                 DenseLayer{std::move(project), RVector::zeros(block_dim)}});
      }()) {}

RuleDomainError::RuleDomainError(EdgeKey edge, RVector vector, const std::string& path)
    : Error("fibring rule " + edge.first + " -> " + edge.second + " undefined on " + vector.key() +
            (path.empty() ? "" : " (path " + path + ")")),
      edge_(std::move(edge)),
      vector_(std::move(vector)) {}

std::pair<NetworkInstance, RVector> apply_rule(const FibringRule& rule, const RVector& x) {
  return std::visit(
      [&x](const auto& r) -> std::pair<NetworkInstance, RVector> {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, TableRule>) {
          const auto it = r.entries.find(x.key());
          if (it == r.entries.end()) throw RuleDomainError({}, x, "");
          return {it->second.instance, it->second.input};
        } else if constexpr (std::is_same_v<R, ConstantRule>) {
          return {r.instance, r.input};
        } else if constexpr (std::is_same_v<R, SelfFibreRule>) {
          return {r.instance, x};
        } else {
          return {r.instance(), x};
        }
      },
      rule);
}

std::string rule_kind_name(const FibringRule& rule) {
  switch (rule.index()) {
    case 0: return "table";
    case 1: return "constant";
    case 2: return "self_fibre";
    default: return "gat_gadget";
  }
}

const FibringRule& FibredNetwork::rule(const NodeId& parent, const NodeId& child) const {
  const auto it = rules.find({parent, child});
  if (it == rules.end()) throw StructureError("no fibring rule for edge " + parent + " -> " + child);
  return it->second;
}

void FibredNetwork::validate() const {
  if (!(root_instance.architecture() == architecture.arch(architecture.root()))) {
    throw StructureError("root instance does not match the root architecture");
  }
  for (const auto& e : architecture.edges()) rule(e.parent, e.child);
}

const RVector* SubtreeCache::find(const NodeId& node, const NetworkInstance& instance,
                                  const std::string& input_key) const {
  const auto it = entries_.find({node, instance.storage_id(), input_key});
  return it == entries_.end() ? nullptr : &it->second;
}

void SubtreeCache::store(const NodeId& node, const NetworkInstance& instance, std::string input_key, RVector output) {
  entries_.insert_or_assign({node, instance.storage_id(), std::move(input_key)}, std::move(output));
}

namespace {

std::string node_path(const FibringArchitecture& arch, const NodeId& node) {
  std::vector<NodeId> chain{node};
  for (auto p = arch.parent(node); p; p = arch.parent(*p)) chain.push_back(*p);
  std::string s;
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    if (!s.empty()) s += "/";
    s += *it;
  }
  return s;
}

RVector eval_node(const FibredNetwork& net, const NodeId& node, const NetworkInstance& instance, const RVector& input,
                  EvalTrace* trace, NodeTrace* local, EvalOptions options) {
  const auto& arch = net.architecture;
  if (!(instance.architecture() == arch.arch(node))) {
    throw StructureError("instance at " + node_path(arch, node) + " does not match the node architecture");
  }
  const bool cacheable = options.cache && !trace && !local;
  std::string input_key;
  if (cacheable) {
    input_key = input.key();
    if (const RVector* hit = options.cache->find(node, instance, input_key)) return *hit;
  }
  const auto& edges = arch.children(node);
  NodeTrace record{input, instance, {}, {}};
  RVector output;
  try {
    if (edges.empty()) {
      output = run_network(instance, input);
    } else {
      std::size_t prev_layer = 0;
      RVector prev = input;
      for (const auto& e : edges) {
        RVector x = run_span(instance, LayerSpan{prev_layer, e.label.layer}, prev);
        std::pair<NetworkInstance, RVector> produced = [&] {
          try {
            return apply_rule(net.rule(node, e.child), x);
          } catch (const RuleDomainError& err) {
            throw RuleDomainError({node, e.child}, err.vector(), node_path(arch, e.child));
          }
        }();
        RVector child_out = eval_node(net, e.child, produced.first, produced.second, trace, nullptr, options);
        if (child_out.dim() != e.label.positions.size()) {
          throw DimensionError("child " + e.child + " produced dim " + std::to_string(child_out.dim()) + " for " +
                               std::to_string(e.label.positions.size()) + " positions");
        }
        RVector h = x;
        for (std::size_t j = 0; j < e.label.positions.size(); ++j) {
          const std::size_t pos = e.label.positions[j];
          if (pos >= h.dim()) throw DimensionError("splice position " + std::to_string(pos) + " out of range");
          h[pos] = child_out[j];
        }
        prev_layer = e.label.layer;
        prev = options.chaining == StageChaining::SplicedVector ? h : produced.second;
        record.stages.push_back(
            EvalStage{e.child, e.label, std::move(x), std::move(produced.first), std::move(produced.second), std::move(h)});
      }
      output = run_span(instance, LayerSpan{edges.back().label.layer, instance.depth()}, record.stages.back().h);
    }
  } catch (const DimensionError& err) {
    const std::string what = err.what();
    if (what.rfind("at ", 0) == 0) throw;
    throw DimensionError("at " + node_path(arch, node) + ": " + what);
  }
  if (cacheable) options.cache->store(node, instance, std::move(input_key), output);
  record.output = output;
  if (local) *local = record;
  if (trace) trace->nodes.insert_or_assign(node, std::move(record));
  return output;
}

}  // namespace

std::pair<RVector, EvalTrace> evaluate_fibred(const FibredNetwork& net, const RVector& x, EvalOptions options) {
  EvalTrace trace;
  RVector out = eval_node(net, net.architecture.root(), net.root_instance, x, &trace, nullptr, options);
  return {std::move(out), std::move(trace)};
}

RVector evaluate_subtree(const FibredNetwork& net, const NodeId& node, const NetworkInstance& instance,
                         const RVector& input, EvalTrace* trace, EvalOptions options) {
  return eval_node(net, node, instance, input, trace, nullptr, options);
}

NodeTrace evaluate_node(const FibredNetwork& net, const NodeId& node, const NetworkInstance& instance,
                        const RVector& input, EvalOptions options) {
  NodeTrace local{input, instance, {}, {}};
  eval_node(net, node, instance, input, nullptr, &local, options);
  return local;
}

bool classify_fibred(const FibredNetwork& net, const RVector& x) {
  if (net.root_instance.output_dim() != 1) {
    throw ShapeError("fibred classification needs a scalar root output, got dim " +
                     std::to_string(net.root_instance.output_dim()));
  }
  return evaluate_fibred(net, x).first[0].sign() > 0;
}

ValidationReport validate_architecture(const FibringArchitecture& arch) {
  ValidationReport report;
  if (!arch.contains(arch.root())) throw StructureError("root '" + arch.root() + "' is not a node");
  std::map<NodeId, std::size_t> indegree;
  for (const auto& e : arch.edges()) {
    if (!arch.contains(e.parent) || !arch.contains(e.child)) {
      throw StructureError("orphan edge " + e.parent + " -> " + e.child);
    }
    if (++indegree[e.child] > 1) throw StructureError("node '" + e.child + "' has more than one parent");
  }
  if (indegree.count(arch.root())) throw StructureError("root '" + arch.root() + "' has a parent");
  const auto order = arch.bfs_order();
  if (order.size() != arch.nodes().size()) {
    throw StructureError("fibring graph is not a tree: " + std::to_string(arch.nodes().size() - order.size()) +
                         " node(s) unreachable from the root (cycle or detached component)");
  }
  report.is_tree = true;

  for (const auto& [id, a] : arch.nodes()) {
    try {
      a.validate();
    } catch (const DimensionError& err) {
      report.dimensions_consistent = false;
      report.issues.push_back({"dimension", id + ": " + err.what()});
    }
  }

  for (const auto& [id, a] : arch.nodes()) {
    std::map<std::size_t, std::set<std::size_t>> used;
    for (const auto& e : arch.children(id)) {
      const auto& lbl = e.label;
      if (lbl.layer < 1 || lbl.layer > a.depth()) {
        report.dimensions_consistent = false;
        report.issues.push_back({"layer", e.parent + "->" + e.child + ": layer " + std::to_string(lbl.layer) +
                                              " outside 1.." + std::to_string(a.depth())});
        continue;
      }
      const std::set<std::size_t> distinct(lbl.positions.begin(), lbl.positions.end());
      if (distinct.size() != lbl.positions.size()) {
        report.dimensions_consistent = false;
        report.issues.push_back({"positions", e.parent + "->" + e.child + ": repeated position"});
      }
      for (auto p : lbl.positions) {
        if (p >= a.dims[lbl.layer]) {
          report.dimensions_consistent = false;
          report.issues.push_back({"positions", e.parent + "->" + e.child + ": position " + std::to_string(p) +
                                                    " >= d_" + std::to_string(lbl.layer) + " = " +
                                                    std::to_string(a.dims[lbl.layer])});
        }
      }
      const auto& child = arch.arch(e.child);
      if (!child.dims.empty() && child.output_dim() != lbl.positions.size()) {
        report.dimensions_consistent = false;
        report.issues.push_back({"dimension", e.parent + "->" + e.child + ": child output dim " +
                                                  std::to_string(child.output_dim()) + " != " +
                                                  std::to_string(lbl.positions.size()) + " positions"});
      }
      auto& seen = used[lbl.layer];
      for (auto p : distinct) {
        if (!seen.insert(p).second) {
          report.disjoint = false;
          report.issues.push_back({"disjointness", e.parent + "->" + e.child + ": position " + std::to_string(p) +
                                                       " at layer " + std::to_string(lbl.layer) +
                                                       " already used by a sibling"});
        }
      }
    }
  }

  const auto& root = arch.arch(arch.root());
  bool uniform = true;
  const auto& root_edges = arch.children(arch.root());
  for (const auto& e : root_edges) uniform = uniform && e.label.layer == root_edges.front().label.layer;
  report.in_class_F = root.depth() == 2 && root.output_dim() == 1 && root.activations.size() == 1 &&
                      root.activations.front().is_identity() && uniform;
  return report;
}

std::string to_dot(const FibringArchitecture& arch) {
  std::ostringstream os;
  os << "digraph fibring {\n";
  for (const auto& id : arch.bfs_order()) {
    const auto& a = arch.arch(id);
    os << "  \"" << id << "\" [label=\"" << id << "\\n";
    for (std::size_t i = 0; i < a.dims.size(); ++i) os << (i ? "-" : "") << a.dims[i];
    os << "\"" << (id == arch.root() ? ", shape=doublecircle" : "") << "];\n";
  }
  for (const auto& e : arch.edges()) {
    os << "  \"" << e.parent << "\" -> \"" << e.child << "\" [label=\"(" << e.label.layer << ", "
       << positions_str(e.label.positions) << ")\"];\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace fibrelab
