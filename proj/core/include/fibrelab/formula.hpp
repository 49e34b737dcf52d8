#pragma once

#include <compare>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fibrelab/fibred_net.hpp"

namespace fibrelab {

/// Names one Kripke component of a fibred model: a tree node together with
/// either its input component (`layer` empty) or a layer index >= 1.
struct ComponentId {
  NodeId node;
  std::optional<std::size_t> layer;

  static ComponentId input(NodeId node) { return {std::move(node), std::nullopt}; }
  static ComponentId at_layer(NodeId node, std::size_t layer) { return {std::move(node), layer}; }

  bool is_input() const { return !layer.has_value(); }
  /// "node,in" or "node,3", as used inside box brackets.
  std::string str() const;

  friend bool operator==(const ComponentId&, const ComponentId&) = default;
  friend std::strong_ordering operator<=>(const ComponentId& a, const ComponentId& b);
};

enum class FormulaKind { Prop, Top, And, Not, Box };

/// Immutable modal formula: p_i | T | (a & b) | ~a | [node,layer]a.
class Formula {
 public:
  static Formula prop(std::size_t index);
  static Formula top();
  static Formula conj(Formula a, Formula b);
  static Formula neg(Formula a);
  static Formula box(ComponentId component, Formula body);

  /// a | b, encoded as ~(~a & ~b).
  static Formula disj(Formula a, Formula b);
  /// Balanced conjunction; the empty conjunction is T.
  static Formula big_conj(std::vector<Formula> parts);
  /// Balanced disjunction; the empty disjunction is ~T.
  static Formula big_disj(std::vector<Formula> parts);

  FormulaKind kind() const { return node_->kind; }
  std::size_t prop_index() const { return node_->index; }
  const ComponentId& component() const { return node_->component; }
  const Formula& lhs() const { return *node_->lhs; }
  const Formula& rhs() const { return *node_->rhs; }
  /// Operand of Not and Box.
  const Formula& body() const { return *node_->lhs; }

  std::size_t modal_depth() const;
  std::size_t size() const;
  /// Largest proposition index that occurs (0 if none).
  std::size_t max_prop() const;

  /// Structural equality.
  friend bool operator==(const Formula& a, const Formula& b);

 private:
  struct Node {
    FormulaKind kind;
    std::size_t index = 0;
    ComponentId component;
    std::shared_ptr<const Formula> lhs;
    std::shared_ptr<const Formula> rhs;
  };
  explicit Formula(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  std::shared_ptr<const Node> node_;
};

/// Canonical text: `T`, `pK`, `~f`, `(f & g)`, `[node,layer]f`.
std::string print_formula(const Formula& f);

/// Parses the canonical grammar (whitespace allowed between tokens).
/// Proposition indices are 1-based; when `num_props` is given, indices
/// above it are rejected.
Formula parse_formula(std::string_view text, std::optional<std::size_t> num_props = std::nullopt);

}  // namespace fibrelab
