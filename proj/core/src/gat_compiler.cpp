#include "fibrelab/gat_compiler.hpp"

#include <cstdlib>
#include <deque>
#include <sstream>

namespace fibrelab {

std::string mode_name(CompileMode mode) {
  switch (mode) {
    case CompileMode::Gnn: return "gnn";
    case CompileMode::Gat: return "gat";
    case CompileMode::Transformer: return "transformer";
  }
  return "gnn";
}

UnravelTree lazy_unravel(const Graph& graph, Vertex u, std::size_t depth, CompileMode mode) {
  if (u >= graph.num_vertices()) throw StructureError("unknown vertex " + std::to_string(u));
  UnravelTree tree;
  tree.depth = depth;
  tree.root = "w" + std::to_string(u);
  tree.nodes.emplace(tree.root, UnravelNode{tree.root, {u}, u, 0, false, std::nullopt, {}});
  std::deque<NodeId> queue{tree.root};
  while (!queue.empty()) {
    const NodeId id = queue.front();
    queue.pop_front();
    tree.order.push_back(id);
    UnravelNode& node = tree.nodes.at(id);
    if (node.attention || node.depth == depth) continue;
    std::vector<Vertex> next{node.vertex};
    for (auto w : graph.neighbours(node.vertex)) next.push_back(w);
    std::vector<UnravelNode> created;
    for (auto w : next) {
      UnravelNode child{id + "." + std::to_string(w), node.walk, w, node.depth + 1, false, id, {}};
      child.walk.push_back(w);
      created.push_back(std::move(child));
    }
    if (mode != CompileMode::Gnn) {
      created.push_back(UnravelNode{"a:" + id, {}, node.vertex, node.depth + 1, true, id, {}});
    }
    for (auto& child : created) {
      node.children.push_back(child.id);
      queue.push_back(child.id);
      tree.nodes.emplace(child.id, std::move(child));
    }
  }
  return tree;
}

std::string to_dot(const UnravelTree& tree) {
  std::ostringstream os;
  os << "digraph unravel {\n";
  for (const auto& id : tree.order) {
    const UnravelNode& n = tree.node(id);
    os << "  \"" << id << "\" [label=\"" << id << "\"" << (n.attention ? ", shape=diamond" : "") << "];\n";
  }
  for (const auto& id : tree.order) {
    for (const auto& c : tree.node(id).children) os << "  \"" << id << "\" -> \"" << c << "\";\n";
  }
  os << "}\n";
  return os.str();
}

namespace {

struct LayerParams {
  const RMatrix& A;
  const RMatrix& B;
  const RVector& b;
  const RVector* attention;
};

// [B | A | ... | A] with `k` column blocks.
RMatrix aggregate_matrix(const LayerParams& p, std::size_t k) {
  const std::size_t dp = p.A.cols();
  RMatrix m(p.A.rows(), k * dp);
  m.set_block(0, 0, p.B);
  for (std::size_t j = 1; j < k; ++j) m.set_block(0, j * dp, p.A);
  return m;
}

// Rows [B x_0 | A x_0 | A x_1 | ... | A x_{k-1}] over column blocks x_0..x_{k-1}.
RMatrix block_map(const LayerParams& p, std::size_t k) {
  const std::size_t dt = p.A.rows(), dp = p.A.cols();
  RMatrix m((k + 1) * dt, k * dp);
  m.set_block(0, 0, p.B);
  m.set_block(dt, 0, p.A);
  for (std::size_t j = 1; j < k; ++j) m.set_block((j + 1) * dt, j * dp, p.A);
  return m;
}

RMatrix projection(std::size_t rows, std::size_t cols) {
  RMatrix m(rows, cols);
  m.set_block(0, 0, RMatrix::identity(rows));
  return m;
}

// Copies the root input into every block when the dimensions allow it.
RMatrix root_input_map(std::size_t d0, std::size_t dp, std::size_t k) {
  RMatrix m(k * dp, d0);
  if (dp == d0) {
    for (std::size_t j = 0; j < k; ++j) m.set_block(j * dp, 0, RMatrix::identity(d0));
  }
  return m;
}

NetworkInstance node_instance(bool gat, bool root, const LayerParams& p, std::size_t d0, std::size_t k) {
  const std::size_t dt = p.A.rows(), dp = p.A.cols(), width = k * dp;
  const std::size_t in = root ? d0 : width;
  DenseLayer first{root ? root_input_map(d0, dp, k) : RMatrix::identity(width), RVector::zeros(width)};
  if (!gat) {
    if (root) {
      return NetworkInstance(NeuralArchitecture{{in, width, dt}, {ActivationSpec::identity(width)}},
                             {first, DenseLayer{aggregate_matrix(p, k), p.b}});
    }
    return NetworkInstance(
        NeuralArchitecture{{in, width, dt, dt}, {ActivationSpec::identity(width), ActivationSpec::truncated_relu(dt)}},
        {first, DenseLayer{aggregate_matrix(p, k), p.b}, DenseLayer{RMatrix::identity(dt), RVector::zeros(dt)}});
  }
  const std::size_t blocks = (k + 1) * dt;
  DenseLayer spread{block_map(p, k), RVector::zeros(blocks)};
  DenseLayer project{projection(dt, blocks), RVector::zeros(dt)};
  if (root) {
    return NetworkInstance(
        NeuralArchitecture{{in, width, blocks, dt}, {ActivationSpec::identity(width), ActivationSpec::identity(blocks)}},
        {first, spread, project});
  }
  return NetworkInstance(NeuralArchitecture{{in, width, blocks, dt, dt},
                                            {ActivationSpec::identity(width), ActivationSpec::identity(blocks),
                                             ActivationSpec::truncated_relu(dt)}},
                         {first, spread, project, DenseLayer{RMatrix::identity(dt), RVector::zeros(dt)}});
}

std::vector<std::size_t> range(std::size_t from, std::size_t length) {
  std::vector<std::size_t> out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = from + i;
  return out;
}

CompiledFibring compile_impl(CompileMode mode, const GnnInstance& gnn, const std::vector<RVector>* attention,
                             const Graph& graph, Vertex u, RVector offset) {
  const std::size_t L = gnn.depth();
  const std::size_t d0 = gnn.dims.front();
  const bool gat = mode != CompileMode::Gnn;
  CompiledFibring out;
  out.mode = mode;
  out.tree = lazy_unravel(graph, u, L, mode);
  out.root_offset = std::move(offset);

  std::map<NodeId, NetworkInstance> instances;
  std::map<NodeId, NeuralArchitecture> archs;
  for (const auto& id : out.tree.order) {
    const UnravelNode& node = out.tree.node(id);
    if (node.attention) continue;
    const std::size_t t = L - node.depth;
    if (t == 0) {
      instances.emplace(id, NetworkInstance::identity(d0));
    } else {
      const GnnLayer& g = gnn.layer(t);
      const LayerParams p{g.A, g.B, g.b, attention ? &attention->at(t - 1) : nullptr};
      const std::size_t k = node.children.size() - (gat ? 1 : 0);
      instances.emplace(id, node_instance(gat, node.depth == 0, p, d0, k));
    }
    archs.emplace(id, instances.at(id).architecture());
  }

  std::vector<FibringEdge> edges;
  for (const auto& id : out.tree.order) {
    const UnravelNode& node = out.tree.node(id);
    if (node.attention || node.children.empty()) continue;
    const std::size_t t = L - node.depth;
    const GnnLayer& g = gnn.layer(t);
    const std::size_t dp = gnn.dims[t - 1], dt = gnn.dims[t];
    std::size_t j = 0;
    for (const auto& cid : node.children) {
      const UnravelNode& child = out.tree.node(cid);
      const EdgeKey key{id, cid};
      if (child.attention) {
        const std::size_t k = node.children.size() - 1;
        GatGadgetRule gadget(k + 1, dt, attention->at(t - 1), g.b);
        archs.emplace(cid, gadget.instance().architecture());
        edges.push_back({id, cid, EdgeLabel{2, range(0, dt)}});
        out.fixed_rules.emplace(key, std::move(gadget));
        continue;
      }
      edges.push_back({id, cid, EdgeLabel{1, range(j * dp, dp)}});
      ++j;
      const NetworkInstance& child_inst = instances.at(cid);
      if (child.depth == L) {
        out.leaf_edges.emplace(key, child.vertex);
        out.leaf_instances.emplace(key, child_inst);
      } else {
        out.fixed_rules.emplace(key, ConstantRule{child_inst, RVector::zeros(child_inst.input_dim())});
      }
    }
  }
  out.root_instance = instances.at(out.tree.root);
  out.architecture = FibringArchitecture(out.tree.root, std::move(archs), std::move(edges));
  return out;
}

}  // namespace

std::map<EdgeKey, FibringRule> CompiledFibring::rule_family(const std::vector<RVector>& features) const {
  std::map<EdgeKey, FibringRule> rules = fixed_rules;
  for (const auto& [key, v] : leaf_edges) {
    if (v >= features.size()) throw DimensionError("no feature for vertex " + std::to_string(v));
    const NetworkInstance& inst = leaf_instances.at(key);
    if (features[v].dim() != inst.input_dim()) {
      throw DimensionError("feature of vertex " + std::to_string(v) + " has dimension " +
                           std::to_string(features[v].dim()) + ", expected " + std::to_string(inst.input_dim()));
    }
    rules.emplace(key, ConstantRule{inst, features[v]});
  }
  return rules;
}

FibredNetwork CompiledFibring::network(const std::vector<RVector>& features) const {
  return FibredNetwork{root_instance, architecture, rule_family(features)};
}

CompiledFibring compile(const GnnInstance& inst, const Graph& graph, Vertex u) {
  inst.validate();
  return compile_impl(CompileMode::Gnn, inst, nullptr, graph, u, RVector::zeros(inst.dims.front()));
}

CompiledFibring compile(const GatInstance& inst, const Graph& graph, Vertex u) {
  inst.validate();
  return compile_impl(CompileMode::Gat, inst.gnn, &inst.attention, graph, u, RVector::zeros(inst.gnn.dims.front()));
}

CompiledFibring compile_transformer(const GatInstance& inst, std::size_t s, std::size_t t, const RVector& offset) {
  inst.validate();
  if (t >= s) throw StructureError("token position " + std::to_string(t) + " outside a sequence of length " +
                                   std::to_string(s));
  if (offset.dim() != inst.gnn.dims.front()) throw DimensionError("positional offset has the wrong dimension");
  return compile_impl(CompileMode::Transformer, inst.gnn, &inst.attention, Graph::complete(s), t, offset);
}

std::size_t max_cube_bits() {
  if (const char* env = std::getenv("FIBRELAB_MAX_CUBE")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v < 64) return static_cast<std::size_t>(v);
  }
  return 16;
}

Formula characteristic_formula(const CharacteristicPredicate& p, std::size_t max_bits) {
  if (p.formula) return *p.formula;
  if (p.n > max_bits) {
    throw GuardError("characteristic formula over " + std::to_string(p.n) + " bits exceeds the limit of " +
                     std::to_string(max_bits) + " (set FIBRELAB_MAX_CUBE to raise it)");
  }
  if (p.instance.input_dim() != p.n) throw DimensionError("predicate arity differs from the instance input");
  const RVector offset = p.offset.value_or(RVector::zeros(p.n));
  std::vector<Formula> disjuncts;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << p.n); ++bits) {
    if (!classify(p.instance, offset + RVector::from_bits(bits, p.n))) continue;
    std::vector<Formula> literals;
    for (std::size_t k = 0; k < p.n; ++k) {
      Formula lit = Formula::prop(k + 1);
      literals.push_back((bits >> k) & 1u ? lit : Formula::neg(lit));
    }
    disjuncts.push_back(Formula::big_conj(std::move(literals)));
  }
  return Formula::big_disj(std::move(disjuncts));
}

namespace {

Formula psi_at(const Formula& phi, const FibringArchitecture& arch, const NodeId& node) {
  const auto& edges = arch.children(node);
  if (edges.empty()) return phi;
  std::vector<Formula> parts;
  for (const auto& e : edges) {
    const auto& below = arch.children(e.child);
    std::optional<std::size_t> largest;
    for (const auto& g : below) largest = std::max(largest.value_or(0), g.label.layer);
    parts.push_back(Formula::box(ComponentId{e.child, largest}, psi_at(phi, arch, e.child)));
  }
  return Formula::big_conj(std::move(parts));
}

}  // namespace

Formula psi_formula(const Formula& phi, const FibringArchitecture& arch) { return psi_at(phi, arch, arch.root()); }

Formula extract_theorem3_formula(const CompiledFibring& compiled, std::size_t max_bits) {
  if (compiled.root_instance.output_dim() != 1) throw ShapeError("formula extraction needs a scalar root output");
  const CharacteristicPredicate p{compiled.root_instance, compiled.root_instance.input_dim(), compiled.root_offset,
                                  std::nullopt};
  return psi_formula(characteristic_formula(p, max_bits), compiled.architecture);
}

}  // namespace fibrelab
