#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fibrelab/fibred_net.hpp"
#include "fibrelab/modal.hpp"

namespace fibrelab {

/// Bijection between the worlds of one component and a set of vectors.
class WorldVectorMap {
 public:
  WorldVectorMap() = default;
  explicit WorldVectorMap(ComponentId component) : component_(std::move(component)) {}

  const ComponentId& component() const { return component_; }

  /// Throws StructureError when the world or the vector is already mapped.
  void insert(WorldId w, RVector v);
  bool has_world(WorldId w) const { return to_vector_.count(w) != 0; }
  const RVector& vector(WorldId w) const;
  std::optional<WorldId> world(const RVector& v) const;
  const std::map<WorldId, RVector>& pairs() const { return to_vector_; }
  std::size_t size() const { return to_vector_.size(); }

  /// The map obtained by renaming worlds; `relabel` must be injective on the mapped worlds.
  WorldVectorMap relabeled(const std::map<WorldId, WorldId>& relabel) const;

  friend bool operator==(const WorldVectorMap& a, const WorldVectorMap& b) {
    return a.component_ == b.component_ && a.to_vector_ == b.to_vector_;
  }

 private:
  ComponentId component_;
  std::map<WorldId, RVector> to_vector_;
  std::unordered_map<std::string, WorldId> by_key_;
};

/// A fibred model together with the data that witnesses its compatibility.
struct CompatibleModel {
  FibredModel model;
  std::map<ComponentId, WorldVectorMap> maps;
  std::map<NodeId, NetworkInstance> instances;
  NodeId root;
  RVector input;   // the x the model is compatible with
  RVector offset;  // root input cube is {offset_i, offset_i + 1}^n

  /// Root input world whose vector is `v` (throws StructureError if absent).
  WorldId root_world(const RVector& v) const;
};

/// True iff pi is injective and worlds are related exactly when the span maps their vectors equally.
bool check_admissible(const KripkeComponent& m, const NetworkInstance& net, LayerSpan span, const WorldVectorMap& pi);

/// First violation of admissibility as a human-readable witness, or nothing when admissible.
std::optional<std::string> admissibility_witness(const KripkeComponent& m, const NetworkInstance& net, LayerSpan span,
                                                 const WorldVectorMap& pi);

/// How valuations reach layer and child-input worlds.
///
/// `ExistentialUnion` gives a world every proposition true at some world it was
/// attained from. `AnchorPinned` does the same except on the worlds attained from
/// the anchor chain of x, which copy the anchor's valuation exactly.
enum class ValuationPolicy { ExistentialUnion, AnchorPinned };

struct BuildOptions {
  std::optional<RVector> offset;  // defaults to zeros
  ValuationPolicy policy = ValuationPolicy::AnchorPinned;
  std::size_t max_cube_bits = 16;
};

/// Builds a compatible model by running the network over the whole root input cube.
/// Throws RuleDomainError (naming the cube point) when a rule is undefined on a reached vector,
/// and GuardError when n exceeds `max_cube_bits`.
CompatibleModel build_compatible(const FibredNetwork& net, const RVector& x, const BuildOptions& options = {});

struct ConditionResult {
  std::string condition;  // "C0", "C1", "C2.1", "C2.2", "C2.3"
  std::string scope;      // component or node the check concerns
  bool pass = true;
  std::string witness;
};

struct CompatibilityReport {
  std::vector<ConditionResult> results;
  /// Worlds other than the anchor at which the C2.3 valuation agreement fails (diagnostic only).
  std::size_t off_anchor_valuation_disagreements = 0;

  bool passed() const;
  std::size_t failures() const;
  std::vector<ConditionResult> failed() const;
};

CompatibilityReport check_compatibility(const CompatibleModel& c, const FibredNetwork& net, const RVector& x);

/// Renames the worlds of one component and composes its world-vector map accordingly.
/// Throws StructureError if `relabel` is not a bijection onto fresh ids.
CompatibleModel transport_iso(const CompatibleModel& c, const ComponentId& comp,
                              const std::map<WorldId, WorldId>& relabel);

/// Components in which the builder places worlds: (v, In) for every node, (v, l) for every outgoing edge layer.
std::vector<ComponentId> builder_components(const FibringArchitecture& arch);

/// Every vector of {offset_i, offset_i + 1}^n, in binary counting order (entry i is bit i).
std::vector<RVector> input_cube(const RVector& offset);

/// Valuation of a cube vector: p_i holds iff entry i equals offset_i + 1.
PropSet cube_valuation(const RVector& v, const RVector& offset);

}  // namespace fibrelab
