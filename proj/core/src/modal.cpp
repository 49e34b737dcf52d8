#include "fibrelab/modal.hpp"

#include <algorithm>
#include <sstream>

namespace fibrelab {

void PropSet::insert(std::size_t prop) {
  if (prop < 1 || prop > kMaxProps) throw DimensionError("proposition index " + std::to_string(prop) + " out of range");
  bits_ |= std::uint64_t{1} << (prop - 1);
}

std::string PropSet::str(std::size_t num_props) const {
  std::string s(num_props, '0');
  for (std::size_t i = 0; i < num_props; ++i) {
    if (contains(i + 1)) s[i] = '1';
  }
  return s;
}

PropSet PropSet::parse(std::string_view text) {
  PropSet p;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '1') {
      p.insert(i + 1);
    } else if (text[i] != '0') {
      throw ParseError("valuation bitsets contain only 0 and 1", i);
    }
  }
  return p;
}

bool KripkeComponent::has_world(WorldId w) const { return std::binary_search(worlds.begin(), worlds.end(), w); }

bool KripkeComponent::related(WorldId a, WorldId b) const {
  const auto it = successors.find(a);
  return it != successors.end() && std::binary_search(it->second.begin(), it->second.end(), b);
}

void KripkeComponent::add_world(WorldId w, PropSet props) {
  const auto it = std::lower_bound(worlds.begin(), worlds.end(), w);
  if (it != worlds.end() && *it == w) return;
  worlds.insert(it, w);
  successors[w];
  valuation[w] = props;
}

void KripkeComponent::add_edge(WorldId a, WorldId b) {
  if (!has_world(a) || !has_world(b)) throw StructureError("relation edge between worlds outside the component");
  auto& succ = successors[a];
  const auto it = std::lower_bound(succ.begin(), succ.end(), b);
  if (it == succ.end() || *it != b) succ.insert(it, b);
}

void KripkeComponent::remove_edge(WorldId a, WorldId b) {
  auto& succ = successors[a];
  const auto it = std::lower_bound(succ.begin(), succ.end(), b);
  if (it != succ.end() && *it == b) succ.erase(it);
}

std::vector<std::pair<WorldId, WorldId>> KripkeComponent::relation() const {
  std::vector<std::pair<WorldId, WorldId>> out;
  for (const auto& [a, succ] : successors) {
    for (auto b : succ) out.emplace_back(a, b);
  }
  return out;
}

PropSet KripkeComponent::props(WorldId w) const {
  const auto it = valuation.find(w);
  return it == valuation.end() ? PropSet{} : it->second;
}

FibredModel::FibredModel(std::size_t num_props) : num_props_(num_props) {
  if (num_props > PropSet::kMaxProps) {
    throw DimensionError("at most " + std::to_string(PropSet::kMaxProps) + " propositions are supported");
  }
}

KripkeComponent& FibredModel::add_component(const ComponentId& id) { return components_[id]; }

const KripkeComponent& FibredModel::component(const ComponentId& id) const {
  const auto it = components_.find(id);
  if (it == components_.end()) throw StructureError("no component [" + id.str() + "]");
  return it->second;
}

KripkeComponent& FibredModel::component(const ComponentId& id) {
  const auto it = components_.find(id);
  if (it == components_.end()) throw StructureError("no component [" + id.str() + "]");
  return it->second;
}

void FibredModel::add_world(const ComponentId& id, WorldId w, PropSet props) {
  const auto [it, inserted] = home_.emplace(w, id);
  if (!inserted) {
    throw StructureError("world " + std::to_string(w.value) + " already belongs to [" + it->second.str() + "]");
  }
  components_[id].add_world(w, props);
}

const ComponentId& FibredModel::home(WorldId w) const {
  const auto it = home_.find(w);
  if (it == home_.end()) throw StructureError("unknown world " + std::to_string(w.value));
  return it->second;
}

WorldId FibredModel::next_free_world() const {
  return home_.empty() ? WorldId{0} : WorldId{home_.rbegin()->first.value + 1};
}

void FibredModel::set_jump(WorldId from, const ComponentId& target, WorldId to) {
  if (!component(target).has_world(to)) {
    throw StructureError("jump target " + std::to_string(to.value) + " is not a world of [" + target.str() + "]");
  }
  jumps_[{from, target}] = to;
}

std::optional<WorldId> FibredModel::stored_jump(WorldId from, const ComponentId& target) const {
  const auto it = jumps_.find({from, target});
  if (it == jumps_.end()) return std::nullopt;
  return it->second;
}

void FibredModel::set_provenance(WorldId w, std::vector<WorldId> generators) {
  provenance_[w] = std::move(generators);
}

const std::vector<WorldId>& FibredModel::provenance(WorldId w) const {
  static const std::vector<WorldId> kNone;
  const auto it = provenance_.find(w);
  return it == provenance_.end() ? kNone : it->second;
}

std::optional<NodeId> FibredModel::tree_parent(const NodeId& node) const {
  const auto it = tree_parent_.find(node);
  if (it == tree_parent_.end()) return std::nullopt;
  return it->second;
}

void FibredModel::relabel_component(const ComponentId& id, const std::map<WorldId, WorldId>& relabel) {
  KripkeComponent& comp = component(id);
  if (relabel.size() != comp.worlds.size()) {
    throw StructureError("relabeling of [" + id.str() + "] must cover exactly its " +
                         std::to_string(comp.worlds.size()) + " worlds");
  }
  std::set<WorldId> images;
  for (const auto& [from, to] : relabel) {
    if (!comp.has_world(from)) throw StructureError("relabeling names a world outside [" + id.str() + "]");
    if (!images.insert(to).second) throw StructureError("relabeling is not injective");
    const auto it = home_.find(to);
    if (it != home_.end() && !(it->second == id)) {
      throw StructureError("relabeled world " + std::to_string(to.value) + " collides with [" + it->second.str() + "]");
    }
  }
  auto map = [&relabel](WorldId w) {
    const auto it = relabel.find(w);
    return it == relabel.end() ? w : it->second;
  };

  KripkeComponent next;
  for (auto w : comp.worlds) next.add_world(map(w), comp.props(w));
  for (const auto& [a, b] : comp.relation()) next.add_edge(map(a), map(b));
  comp = std::move(next);

  for (const auto& [from, _] : relabel) home_.erase(from);
  for (const auto& [_, to] : relabel) home_.emplace(to, id);

  std::map<std::pair<WorldId, ComponentId>, WorldId> jumps;
  for (const auto& [key, to] : jumps_) {
    const bool target_relabeled = key.second == id;
    jumps.emplace(std::make_pair(map(key.first), key.second), target_relabeled ? map(to) : to);
  }
  jumps_ = std::move(jumps);

  std::map<WorldId, std::vector<WorldId>> provenance;
  for (const auto& [w, gens] : provenance_) {
    std::vector<WorldId> mapped;
    mapped.reserve(gens.size());
    for (auto g : gens) mapped.push_back(map(g));
    provenance.emplace(map(w), std::move(mapped));
  }
  provenance_ = std::move(provenance);
}

namespace {

WorldId pick(const std::vector<WorldId>& gens, TieBreak tie_break) {
  return tie_break == TieBreak::First ? gens.front() : gens.back();
}

}  // namespace

WorldId resolve_jump(const FibredModel& model, const ComponentId& src, WorldId w, const ComponentId& tgt,
                     TieBreak tie_break) {
  if (!model.component(src).has_world(w)) {
    throw StructureError("world " + std::to_string(w.value) + " is not in [" + src.str() + "]");
  }
  if (src == tgt) return w;
  if (auto direct = model.stored_jump(w, tgt)) return *direct;

  auto unreachable = [&](const std::string& why) {
    return UnreachableJump("no jump from world " + std::to_string(w.value) + " of [" + src.str() + "] to [" +
                           tgt.str() + "]: " + why);
  };

  WorldId at = w;
  if (!src.is_input()) {
    const auto& gens = model.provenance(w);
    if (gens.empty()) throw unreachable("world has no provenance");
    at = pick(gens, tie_break);
  }

  std::vector<NodeId> chain{tgt.node};
  while (chain.back() != src.node) {
    auto p = model.tree_parent(chain.back());
    if (!p) throw unreachable("[" + tgt.node + "] is not below [" + src.node + "]");
    chain.push_back(*p);
  }
  for (auto it = chain.rbegin() + 1; it != chain.rend(); ++it) {
    auto next = model.stored_jump(at, ComponentId::input(*it));
    if (!next) throw unreachable("missing input jump into [" + *it + ",in]");
    at = *next;
  }
  if (tgt.is_input()) return at;
  auto last = model.stored_jump(at, tgt);
  if (!last) throw unreachable("missing jump from the input component of " + tgt.node);
  return *last;
}

namespace {

bool sat(const FibredModel& model, const ComponentId& comp, WorldId w, const Formula& f, TieBreak tie_break) {
  switch (f.kind()) {
    case FormulaKind::Prop: return model.component(comp).props(w).contains(f.prop_index());
    case FormulaKind::Top: return true;
    case FormulaKind::And: return sat(model, comp, w, f.lhs(), tie_break) && sat(model, comp, w, f.rhs(), tie_break);
    case FormulaKind::Not: return !sat(model, comp, w, f.body(), tie_break);
    case FormulaKind::Box: {
      const ComponentId& target = f.component();
      if (target == comp) {
        const auto& succ = model.component(comp).successors;
        const auto it = succ.find(w);
        if (it == succ.end()) return true;
        for (auto s : it->second) {
          if (!sat(model, comp, s, f.body(), tie_break)) return false;
        }
        return true;
      }
      const WorldId landed = resolve_jump(model, comp, w, target, tie_break);
      return sat(model, target, landed, f, tie_break);
    }
  }
  return false;
}

}  // namespace

bool check_satisfaction(const FibredModel& model, const ComponentId& component, WorldId w, const Formula& f,
                        TieBreak tie_break) {
  if (!model.component(component).has_world(w)) {
    throw StructureError("world " + std::to_string(w.value) + " is not in [" + component.str() + "]");
  }
  return sat(model, component, w, f, tie_break);
}

std::string to_dot(const FibredModel& model) {
  std::ostringstream os;
  os << "digraph fibred_model {\n  compound=true;\n";
  std::size_t cluster = 0;
  for (const auto& [id, comp] : model.components()) {
    os << "  subgraph cluster_" << cluster++ << " {\n    label=\"[" << id.str() << "]\";\n";
    for (auto w : comp.worlds) {
      os << "    w" << w.value << " [label=\"w" << w.value << "\\n" << comp.props(w).str(model.num_props()) << "\"];\n";
    }
    for (const auto& [a, b] : comp.relation()) os << "    w" << a.value << " -> w" << b.value << ";\n";
    os << "  }\n";
  }
  for (const auto& [key, to] : model.jumps()) {
    os << "  w" << key.first.value << " -> w" << to.value << " [style=dashed, label=\"" << key.second.str()
       << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace fibrelab
