#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "fibrelab/linalg.hpp"

namespace fibrelab {

struct IdentityKind {
  friend bool operator==(const IdentityKind&, const IdentityKind&) = default;
};

struct TruncatedReluKind {
  friend bool operator==(const TruncatedReluKind&, const TruncatedReluKind&) = default;
};

struct HardmaxKind {
  friend bool operator==(const HardmaxKind&, const HardmaxKind&) = default;
};

/// Hard-attention combination over a slice laid out as
/// [B*x_u | A*x_u | A*x_w1 | ... | A*x_wd], each block `block_dim` wide.
///
/// Scores are <attention_vector, (A*x_w || B*x_u)> for w over the node itself
/// (using the A*x_u block) and each neighbour; their hardmax weights the sum
/// alpha_self*B*x_u + sum_j alpha_j*A*x_wj, to which `bias` is added. The
/// result fills the first block; all other coordinates become zero.
struct AttentionCombineKind {
  std::size_t block_count = 0;
  std::size_t block_dim = 0;
  RVector attention_vector;  // length 2*block_dim
  RVector bias;              // length block_dim

  friend bool operator==(const AttentionCombineKind&, const AttentionCombineKind&) = default;
};

using ActivationKind = std::variant<IdentityKind, TruncatedReluKind, HardmaxKind, AttentionCombineKind>;

struct ActivationSegment {
  std::size_t length = 0;
  ActivationKind kind;

  friend bool operator==(const ActivationSegment&, const ActivationSegment&) = default;
};

/// Piecewise activation map: each segment acts on its own contiguous slice.
class ActivationSpec {
 public:
  ActivationSpec() = default;
  explicit ActivationSpec(std::vector<ActivationSegment> segments);

  static ActivationSpec identity(std::size_t n);
  static ActivationSpec truncated_relu(std::size_t n);
  static ActivationSpec hardmax(std::size_t n);
  static ActivationSpec attention_combine(AttentionCombineKind kind);

  const std::vector<ActivationSegment>& segments() const { return segments_; }
  std::size_t total_length() const;
  bool is_identity() const;

  friend bool operator==(const ActivationSpec&, const ActivationSpec&) = default;

 private:
  std::vector<ActivationSegment> segments_;
};

/// Applies each segment to its slice and concatenates the results.
RVector apply_activation(const ActivationSpec& spec, const RVector& v);

std::string kind_name(const ActivationKind& kind);

}  // namespace fibrelab
