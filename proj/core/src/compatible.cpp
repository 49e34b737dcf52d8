#include "fibrelab/compatible.hpp"

#include <algorithm>
#include <set>

namespace fibrelab {

void WorldVectorMap::insert(WorldId w, RVector v) {
  if (to_vector_.count(w)) throw StructureError("world " + std::to_string(w.value) + " is already mapped");
  std::string key = v.key();
  if (by_key_.count(key)) throw StructureError("vector " + key + " is already mapped in [" + component_.str() + "]");
  by_key_.emplace(std::move(key), w);
  to_vector_.emplace(w, std::move(v));
}

const RVector& WorldVectorMap::vector(WorldId w) const {
  const auto it = to_vector_.find(w);
  if (it == to_vector_.end()) {
    throw StructureError("world " + std::to_string(w.value) + " has no vector in [" + component_.str() + "]");
  }
  return it->second;
}

std::optional<WorldId> WorldVectorMap::world(const RVector& v) const {
  const auto it = by_key_.find(v.key());
  if (it == by_key_.end()) return std::nullopt;
  return it->second;
}

WorldVectorMap WorldVectorMap::relabeled(const std::map<WorldId, WorldId>& relabel) const {
  WorldVectorMap out(component_);
  for (const auto& [w, v] : to_vector_) {
    const auto it = relabel.find(w);
    out.insert(it == relabel.end() ? w : it->second, v);
  }
  return out;
}

WorldId CompatibleModel::root_world(const RVector& v) const {
  const auto it = maps.find(ComponentId::input(root));
  if (it == maps.end()) throw StructureError("model has no root input map");
  auto w = it->second.world(v);
  if (!w) throw StructureError("no root input world for " + v.key());
  return *w;
}

namespace {

LayerSpan span_of(const ComponentId& id, const NetworkInstance& net) {
  return LayerSpan{id.layer.value_or(0), net.depth()};
}

std::string world_str(WorldId w) { return "w" + std::to_string(w.value); }

}  // namespace

std::optional<std::string> admissibility_witness(const KripkeComponent& m, const NetworkInstance& net, LayerSpan span,
                                                 const WorldVectorMap& pi) {
  std::set<std::string> keys;
  std::map<WorldId, std::string> out;
  for (auto w : m.worlds) {
    if (!pi.has_world(w)) return world_str(w) + " has no vector";
    const RVector& v = pi.vector(w);
    if (!keys.insert(v.key()).second) return "vector " + v.key() + " assigned to two worlds";
    out.emplace(w, run_span(net, span, v).key());
  }
  for (auto a : m.worlds) {
    for (auto b : m.worlds) {
      const bool related = m.related(a, b);
      const bool equal = out[a] == out[b];
      if (related != equal) {
        return world_str(a) + "=" + pi.vector(a).key() + " and " + world_str(b) + "=" + pi.vector(b).key() +
               (related ? " are related but the outputs " + out[a] + " and " + out[b] + " differ"
                        : " are unrelated but both map to " + out[a]);
      }
    }
  }
  return std::nullopt;
}

bool check_admissible(const KripkeComponent& m, const NetworkInstance& net, LayerSpan span, const WorldVectorMap& pi) {
  return !admissibility_witness(m, net, span, pi).has_value();
}

std::vector<ComponentId> builder_components(const FibringArchitecture& arch) {
  std::vector<ComponentId> out;
  for (const auto& node : arch.bfs_order()) {
    out.push_back(ComponentId::input(node));
    std::set<std::size_t> layers;
    for (const auto& e : arch.children(node)) layers.insert(e.label.layer);
    for (auto l : layers) out.push_back(ComponentId::at_layer(node, l));
  }
  return out;
}

std::vector<RVector> input_cube(const RVector& offset) {
  const std::size_t n = offset.dim();
  std::vector<RVector> out;
  out.reserve(std::size_t{1} << n);
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
    out.push_back(offset + RVector::from_bits(bits, n));
  }
  return out;
}

PropSet cube_valuation(const RVector& v, const RVector& offset) {
  if (v.dim() != offset.dim()) throw DimensionError("cube vector and offset differ in dimension");
  PropSet props;
  for (std::size_t i = 0; i < v.dim(); ++i) {
    if (v[i] == offset[i] + Rational(1)) props.insert(i + 1);
  }
  return props;
}

namespace {

bool in_cube(const RVector& v, const RVector& offset) {
  if (v.dim() != offset.dim()) return false;
  for (std::size_t i = 0; i < v.dim(); ++i) {
    if (v[i] != offset[i] && v[i] != offset[i] + Rational(1)) return false;
  }
  return true;
}

void relate_by_output(KripkeComponent& comp, const WorldVectorMap& pi, const NetworkInstance& net, LayerSpan span) {
  std::map<std::string, std::vector<WorldId>> classes;
  for (auto w : comp.worlds) classes[run_span(net, span, pi.vector(w)).key()].push_back(w);
  for (const auto& [_, members] : classes) {
    for (auto a : members) {
      for (auto b : members) comp.add_edge(a, b);
    }
  }
}

class Builder {
 public:
  Builder(const FibredNetwork& net, const RVector& x, const BuildOptions& options)
      : net_(net), arch_(net.architecture), x_(x), policy_(options.policy) {
    const std::size_t n = net.root_instance.input_dim();
    if (n > options.max_cube_bits) {
      throw GuardError("root input dimension " + std::to_string(n) + " exceeds the cube limit of " +
                       std::to_string(options.max_cube_bits));
    }
    offset_ = options.offset.value_or(RVector::zeros(n));
    if (offset_.dim() != n) throw DimensionError("cube offset has dimension " + std::to_string(offset_.dim()));
    if (!in_cube(x, offset_)) throw DimensionError("input " + x.key() + " is not a vertex of the input cube");
    net.validate();
  }

  CompatibleModel run() {
    auto [_, trace] = evaluate_fibred(net_, x_);
    out_.model = FibredModel(net_.root_instance.input_dim());
    out_.root = arch_.root();
    out_.input = x_;
    out_.offset = offset_;
    for (const auto& [node, t] : trace.nodes) out_.instances.emplace(node, t.instance);
    for (const auto& e : arch_.edges()) out_.model.set_tree_parent(e.child, e.parent);
    for (const auto& id : builder_components(arch_)) {
      out_.model.add_component(id);
      out_.maps.emplace(id, WorldVectorMap(id));
    }

    const ComponentId root_in = ComponentId::input(arch_.root());
    for (const auto& z : input_cube(offset_)) {
      const WorldId w = world_for(root_in, z);
      out_.model.component(root_in).valuation[w] = cube_valuation(z, offset_);
      source_[w] = z;
    }
    anchor_[arch_.root()] = out_.root_world(x_);

    for (const auto& node : arch_.bfs_order()) expand(node);

    for (const auto& [id, pi] : out_.maps) {
      const NetworkInstance& inst = out_.instances.at(id.node);
      relate_by_output(out_.model.component(id), pi, inst, span_of(id, inst));
    }
    return std::move(out_);
  }

 private:
  WorldId world_for(const ComponentId& id, const RVector& v) {
    WorldVectorMap& pi = out_.maps.at(id);
    if (auto w = pi.world(v)) return *w;
    const WorldId w{next_++};
    out_.model.add_world(id, w);
    pi.insert(w, v);
    return w;
  }

  void expand(const NodeId& node) {
    const auto& edges = arch_.children(node);
    if (edges.empty()) return;
    const ComponentId in = ComponentId::input(node);
    const NetworkInstance& inst = out_.instances.at(node);
    const WorldId anchor = anchor_.at(node);

    std::map<WorldId, std::vector<WorldId>> generators;  // attained world -> In worlds it came from
    const std::size_t last_layer = edges.back().label.layer;
    const ComponentId last = ComponentId::at_layer(node, last_layer);

    for (const auto& [w, v] : std::map<WorldId, RVector>(out_.maps.at(in).pairs())) {
      std::optional<NodeTrace> trace;
      try {
        trace = evaluate_node(net_, node, inst, v, EvalOptions{StageChaining::SplicedVector, &cache_});
      } catch (const RuleDomainError& err) {
        throw RuleDomainError(err.edge(), err.vector(), "at " + node + " from cube point " + source_[w].key());
      }
      const NodeTrace& t = *trace;
      std::map<std::size_t, const RVector*> layer_h;
      for (const auto& stage : t.stages) {
        const ComponentId child_in = ComponentId::input(stage.child);
        const WorldId yw = world_for(child_in, stage.y);
        out_.model.set_jump(w, child_in, yw);
        generators[yw].push_back(w);
        source_.emplace(yw, source_[w]);
        layer_h[stage.label.layer] = &stage.h;
      }
      for (const auto& [layer, h] : layer_h) {
        const ComponentId id = ComponentId::at_layer(node, layer);
        const WorldId hw = world_for(id, *h);
        out_.model.set_jump(w, id, hw);
        generators[hw].push_back(w);
      }
    }

    const KripkeComponent& in_comp = out_.model.component(in);
    const auto& in_map = out_.maps.at(in);
    std::set<ComponentId> layer_ids;
    for (const auto& e : edges) layer_ids.insert(ComponentId::at_layer(node, e.label.layer));

    for (const auto& id : layer_ids) {
      const WorldId pinned = *out_.model.stored_jump(anchor, id);
      for (auto& [hw, gens] : generators) {
        if (!out_.maps.at(id).has_world(hw)) continue;
        std::sort(gens.begin(), gens.end(), [&](WorldId a, WorldId b) {
          return in_map.vector(a).key() < in_map.vector(b).key();
        });
        PropSet props;
        if (policy_ == ValuationPolicy::AnchorPinned && hw == pinned) {
          props = in_comp.props(anchor);
        } else {
          for (auto g : gens) props |= in_comp.props(g);
        }
        out_.model.component(id).valuation[hw] = props;
        out_.model.set_provenance(hw, gens);
      }
    }

    const KripkeComponent& last_comp = out_.model.component(last);
    for (const auto& e : edges) {
      const ComponentId child_in = ComponentId::input(e.child);
      const WorldId pinned = *out_.model.stored_jump(anchor, child_in);
      anchor_[e.child] = pinned;
      for (const auto& [yw, _] : out_.maps.at(child_in).pairs()) {
        PropSet props;
        if (policy_ == ValuationPolicy::AnchorPinned && yw == pinned) {
          props = last_comp.props(*out_.model.stored_jump(anchor, last));
        } else {
          for (auto g : generators.at(yw)) props |= last_comp.props(*out_.model.stored_jump(g, last));
        }
        out_.model.component(child_in).valuation[yw] = props;
      }
    }
  }

  const FibredNetwork& net_;
  const FibringArchitecture& arch_;
  RVector x_;
  RVector offset_;
  ValuationPolicy policy_;
  CompatibleModel out_;
  std::uint32_t next_ = 0;
  std::map<NodeId, WorldId> anchor_;
  std::map<WorldId, RVector> source_;
  SubtreeCache cache_;
};

}  // namespace

CompatibleModel build_compatible(const FibredNetwork& net, const RVector& x, const BuildOptions& options) {
  return Builder(net, x, options).run();
}

bool CompatibilityReport::passed() const { return failures() == 0; }

std::size_t CompatibilityReport::failures() const {
  return static_cast<std::size_t>(std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.pass; }));
}

std::vector<ConditionResult> CompatibilityReport::failed() const {
  std::vector<ConditionResult> out;
  for (const auto& r : results) {
    if (!r.pass) out.push_back(r);
  }
  return out;
}

namespace {

class Checker {
 public:
  Checker(const CompatibleModel& c, const FibredNetwork& net, const RVector& x) : c_(c), net_(net), x_(x) {}

  CompatibilityReport run() {
    check_c0();
    check_c1();
    check_c2();
    return std::move(report_);
  }

 private:
  void record(std::string condition, std::string scope, std::optional<std::string> witness) {
    report_.results.push_back({std::move(condition), std::move(scope), !witness.has_value(), witness.value_or("")});
  }

  const WorldVectorMap* map_of(const ComponentId& id) const {
    const auto it = c_.maps.find(id);
    return it == c_.maps.end() ? nullptr : &it->second;
  }

  const NetworkInstance* instance_of(const NodeId& node) const {
    const auto it = c_.instances.find(node);
    return it == c_.instances.end() ? nullptr : &it->second;
  }

  void check_c0() {
    const NodeId& root = net_.architecture.root();
    const ComponentId root_in = ComponentId::input(root);
    const NetworkInstance* inst = instance_of(root);
    if (!inst || !(*inst == net_.root_instance)) {
      record("C0", root_in.str(), "root instance differs from the network's root instance");
      return;
    }
    const WorldVectorMap* pi = map_of(root_in);
    if (!pi || !c_.model.has_component(root_in)) {
      record("C0", root_in.str(), "missing root input component or map");
      return;
    }
    const RVector offset = c_.offset.dim() == x_.dim() ? c_.offset : RVector::zeros(x_.dim());
    std::optional<std::string> witness;
    const KripkeComponent& comp = c_.model.component(root_in);
    for (auto w : comp.worlds) {
      if (!pi->has_world(w)) {
        witness = world_str(w) + " has no vector";
        break;
      }
      const RVector& v = pi->vector(w);
      if (!in_cube(v, offset)) {
        witness = world_str(w) + " maps to " + v.key() + ", outside the input cube";
        break;
      }
      const PropSet expected = cube_valuation(v, offset);
      if (comp.props(w) != expected) {
        witness = world_str(w) + " maps to " + v.key() + " but has valuation " + comp.props(w).str(v.dim());
        break;
      }
    }
    if (!witness && !pi->world(x_)) witness = "no world maps to x = " + x_.key();
    record("C0", root_in.str(), witness);
  }

  void check_c1() {
    for (const auto& [id, comp] : c_.model.components()) {
      const WorldVectorMap* pi = map_of(id);
      const NetworkInstance* inst = instance_of(id.node);
      if (!pi || !inst) {
        record("C1", id.str(), "missing world-vector map or instance");
        continue;
      }
      if (pi->size() != comp.worlds.size()) {
        record("C1", id.str(), "map covers " + std::to_string(pi->size()) + " vectors for " +
                                   std::to_string(comp.worlds.size()) + " worlds");
        continue;
      }
      try {
        record("C1", id.str(), admissibility_witness(comp, *inst, span_of(id, *inst), *pi));
      } catch (const Error& err) {
        record("C1", id.str(), err.what());
      }
    }
    for (const auto& [id, _] : c_.maps) {
      if (!c_.model.has_component(id)) record("C1", id.str(), "map for a component the model lacks");
    }
  }

  // Looks up the world of `id` whose vector is v, with a witness on failure.
  std::optional<WorldId> lookup(const ComponentId& id, const RVector& v) const {
    const WorldVectorMap* pi = map_of(id);
    return pi ? pi->world(v) : std::nullopt;
  }

  void check_c2() {
    const FibringArchitecture& arch = net_.architecture;
    const ComponentId root_in = ComponentId::input(arch.root());
    const WorldVectorMap* root_map = map_of(root_in);
    if (!root_map || !root_map->world(x_)) return;  // already reported under C0
    std::map<NodeId, WorldId> anchors{{arch.root(), *root_map->world(x_)}};

    for (const auto& node : arch.bfs_order()) {
      const auto& edges = arch.children(node);
      if (edges.empty()) continue;
      const auto anchor_it = anchors.find(node);
      if (anchor_it == anchors.end()) continue;  // reported at the parent
      const WorldId anchor = anchor_it->second;
      const ComponentId in = ComponentId::input(node);
      const WorldVectorMap* in_map = map_of(in);
      const NetworkInstance* inst = instance_of(node);
      if (!in_map || !inst || !in_map->has_world(anchor)) {
        record("C2.1", node, "no input vector or instance at the anchor");
        continue;
      }

      std::optional<NodeTrace> trace;
      try {
        trace = evaluate_node(net_, node, *inst, in_map->vector(anchor));
      } catch (const Error& err) {
        record("C2.1", node, std::string("running the node failed: ") + err.what());
        continue;
      }
      const NodeTrace& t = *trace;

      for (const auto& stage : t.stages) {
        const ComponentId child_in = ComponentId::input(stage.child);
        const std::string scope = node + "->" + stage.child;
        std::optional<std::string> witness;
        const NetworkInstance* child_inst = instance_of(stage.child);
        const auto jumped = c_.model.stored_jump(anchor, child_in);
        const WorldVectorMap* child_map = map_of(child_in);
        if (!child_inst || !(*child_inst == stage.instance)) {
          witness = "assigned child instance differs from the one the rule produces";
        } else if (!jumped || !child_map || !child_map->has_world(*jumped)) {
          witness = "no jump from the anchor " + world_str(anchor) + " into [" + child_in.str() + "]";
        } else if (!(child_map->vector(*jumped) == stage.y)) {
          witness = "jump lands on " + child_map->vector(*jumped).key() + " but the rule gives y = " + stage.y.key();
        }
        if (jumped) anchors[stage.child] = *jumped;
        record("C2.1", scope, witness);
      }

      std::map<std::size_t, const EvalStage*> last_stage;
      for (const auto& stage : t.stages) last_stage[stage.label.layer] = &stage;
      for (const auto& [layer, stage] : last_stage) {
        const ComponentId id = ComponentId::at_layer(node, layer);
        const auto jumped = c_.model.stored_jump(anchor, id);
        const WorldVectorMap* pi = map_of(id);
        std::optional<std::string> witness;
        if (!jumped || !pi || !pi->has_world(*jumped)) {
          witness = "no jump from the anchor " + world_str(anchor) + " into [" + id.str() + "]";
        } else if (!(pi->vector(*jumped) == stage->h)) {
          witness = "jump lands on " + pi->vector(*jumped).key() + " but the run gives h = " + stage->h.key();
        }
        record("C2.2", id.str(), witness);
      }

      const std::size_t last_layer = edges.back().label.layer;
      const ComponentId last = ComponentId::at_layer(node, last_layer);
      const auto hk_world = lookup(last, t.stages.back().h);
      for (const auto& stage : t.stages) {
        const ComponentId child_in = ComponentId::input(stage.child);
        const auto y_world = lookup(child_in, stage.y);
        std::optional<std::string> witness;
        if (!hk_world || !y_world) {
          witness = "h_k or y_i has no world";
        } else {
          const PropSet a = c_.model.component(last).props(*hk_world);
          const PropSet b = c_.model.component(child_in).props(*y_world);
          if (a != b) {
            const std::size_t n = c_.model.num_props();
            witness = world_str(*hk_world) + " in [" + last.str() + "] has " + a.str(n) + " but " +
                      world_str(*y_world) + " in [" + child_in.str() + "] has " + b.str(n);
          }
        }
        record("C2.3", node + "->" + stage.child, witness);
      }

      count_off_anchor(node, anchor, last, edges);
    }
  }

  void count_off_anchor(const NodeId& node, WorldId anchor, const ComponentId& last,
                        const std::vector<FibringEdge>& edges) {
    if (!c_.model.has_component(last)) return;
    const ComponentId in = ComponentId::input(node);
    for (auto w : c_.model.component(in).worlds) {
      if (w == anchor) continue;
      const auto hk = c_.model.stored_jump(w, last);
      if (!hk) continue;
      for (const auto& e : edges) {
        const ComponentId child_in = ComponentId::input(e.child);
        const auto y = c_.model.stored_jump(w, child_in);
        if (y && c_.model.component(last).props(*hk) != c_.model.component(child_in).props(*y)) {
          ++report_.off_anchor_valuation_disagreements;
        }
      }
    }
  }

  const CompatibleModel& c_;
  const FibredNetwork& net_;
  const RVector& x_;
  CompatibilityReport report_;
};

}  // namespace

CompatibilityReport check_compatibility(const CompatibleModel& c, const FibredNetwork& net, const RVector& x) {
  return Checker(c, net, x).run();
}

CompatibleModel transport_iso(const CompatibleModel& c, const ComponentId& comp,
                              const std::map<WorldId, WorldId>& relabel) {
  CompatibleModel out = c;
  out.model.relabel_component(comp, relabel);
  const auto it = out.maps.find(comp);
  if (it != out.maps.end()) it->second = it->second.relabeled(relabel);
  return out;
}

}  // namespace fibrelab
