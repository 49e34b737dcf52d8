#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fibrelab/formula.hpp"

namespace fibrelab {

/// Opaque world identifier. World ids are unique across a whole fibred model,
/// which keeps component world sets disjoint.
struct WorldId {
  std::uint32_t value = 0;

  friend auto operator<=>(const WorldId&, const WorldId&) = default;
};

/// Set of true propositions, bit i-1 for p_i. At most 64 propositions.
class PropSet {
 public:
  static constexpr std::size_t kMaxProps = 64;

  PropSet() = default;
  explicit PropSet(std::uint64_t bits) : bits_(bits) {}

  bool contains(std::size_t prop) const { return prop >= 1 && prop <= kMaxProps && ((bits_ >> (prop - 1)) & 1u); }
  void insert(std::size_t prop);
  PropSet& operator|=(const PropSet& o) {
    bits_ |= o.bits_;
    return *this;
  }
  std::uint64_t bits() const { return bits_; }
  /// '0'/'1' string, character i-1 for p_i.
  std::string str(std::size_t num_props) const;
  static PropSet parse(std::string_view text);

  friend auto operator<=>(const PropSet&, const PropSet&) = default;

 private:
  std::uint64_t bits_ = 0;
};

/// Finite Kripke frame with valuation.
struct KripkeComponent {
  std::vector<WorldId> worlds;  // sorted
  std::map<WorldId, std::vector<WorldId>> successors;
  std::map<WorldId, PropSet> valuation;

  bool has_world(WorldId w) const;
  bool related(WorldId a, WorldId b) const;
  void add_world(WorldId w, PropSet props = {});
  void add_edge(WorldId a, WorldId b);
  void remove_edge(WorldId a, WorldId b);
  std::vector<std::pair<WorldId, WorldId>> relation() const;
  PropSet props(WorldId w) const;

  friend bool operator==(const KripkeComponent&, const KripkeComponent&) = default;
};

class UnreachableJump : public Error {
 public:
  using Error::Error;
};

/// Which provenance generator to follow when a world has several.
enum class TieBreak { First, Last };

/// Components indexed by ComponentId, with partial jump maps between them.
///
/// `jumps[(w, target)]` is the stored image of world w in component `target`.
/// `provenance[w]` lists, in canonical order, the worlds of the same node's
/// input component from which w was attained.
class FibredModel {
 public:
  explicit FibredModel(std::size_t num_props = 0);

  std::size_t num_props() const { return num_props_; }

  KripkeComponent& add_component(const ComponentId& id);
  bool has_component(const ComponentId& id) const { return components_.count(id) != 0; }
  const KripkeComponent& component(const ComponentId& id) const;
  KripkeComponent& component(const ComponentId& id);
  const std::map<ComponentId, KripkeComponent>& components() const { return components_; }

  /// Adds a world to a component. Throws StructureError if the id is already in use.
  void add_world(const ComponentId& id, WorldId w, PropSet props = {});
  const ComponentId& home(WorldId w) const;
  bool has_world(WorldId w) const { return home_.count(w) != 0; }
  WorldId next_free_world() const;

  void set_jump(WorldId from, const ComponentId& target, WorldId to);
  std::optional<WorldId> stored_jump(WorldId from, const ComponentId& target) const;
  const std::map<std::pair<WorldId, ComponentId>, WorldId>& jumps() const { return jumps_; }

  void set_provenance(WorldId w, std::vector<WorldId> generators);
  const std::vector<WorldId>& provenance(WorldId w) const;
  const std::map<WorldId, std::vector<WorldId>>& provenance_map() const { return provenance_; }

  void set_tree_parent(const NodeId& child, const NodeId& parent) { tree_parent_[child] = parent; }
  std::optional<NodeId> tree_parent(const NodeId& node) const;
  const std::map<NodeId, NodeId>& tree_parents() const { return tree_parent_; }

  /// Replaces every occurrence of the worlds of `id` according to `relabel`.
  /// `relabel` must be a bijection onto ids not used by any other component.
  void relabel_component(const ComponentId& id, const std::map<WorldId, WorldId>& relabel);

  friend bool operator==(const FibredModel&, const FibredModel&) = default;

 private:
  std::size_t num_props_;
  std::map<ComponentId, KripkeComponent> components_;
  std::map<WorldId, ComponentId> home_;
  std::map<std::pair<WorldId, ComponentId>, WorldId> jumps_;
  std::map<WorldId, std::vector<WorldId>> provenance_;
  std::map<NodeId, NodeId> tree_parent_;
};

/// The world of `tgt` reached from world w of `src`: a stored jump when present,
/// otherwise w's provenance in its node's input component, then stored
/// input-to-input jumps down the tree to tgt.node, then the stored jump into tgt.
WorldId resolve_jump(const FibredModel& model, const ComponentId& src, WorldId w, const ComponentId& tgt,
                     TieBreak tie_break = TieBreak::First);

/// Fibred Kripke satisfaction of `f` at world w of `component`.
bool check_satisfaction(const FibredModel& model, const ComponentId& component, WorldId w, const Formula& f,
                        TieBreak tie_break = TieBreak::First);

/// Graphviz rendering: one cluster per component, dashed edges for stored jumps.
std::string to_dot(const FibredModel& model);

}  // namespace fibrelab
