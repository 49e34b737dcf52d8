#include "fibrelab/activation.hpp"

#include "fibrelab/errors.hpp"

namespace fibrelab {

namespace {

void check_attention_kind(const AttentionCombineKind& k, std::size_t length) {
  if (k.block_count < 2) throw DimensionError("attention_combine needs at least the B and self-A blocks");
  if (k.block_count * k.block_dim != length) {
    throw DimensionError("attention_combine: " + std::to_string(k.block_count) + " blocks of " +
                         std::to_string(k.block_dim) + " do not fill a segment of length " + std::to_string(length));
  }
  if (k.attention_vector.dim() != 2 * k.block_dim) {
    throw DimensionError("attention_combine: attention vector has dim " + std::to_string(k.attention_vector.dim()) +
                         ", expected " + std::to_string(2 * k.block_dim));
  }
  if (k.bias.dim() != k.block_dim) {
    throw DimensionError("attention_combine: bias has dim " + std::to_string(k.bias.dim()) + ", expected " +
                         std::to_string(k.block_dim));
  }
}

RVector attention_combine(const AttentionCombineKind& k, const RVector& slice) {
  check_attention_kind(k, slice.dim());
  const std::size_t d = k.block_dim;
  const RVector b_self = slice.slice(0, d);
  const std::size_t candidates = k.block_count - 1;  // self + neighbours
  RVector scores(candidates);
  for (std::size_t j = 0; j < candidates; ++j) {
    scores[j] = dot(k.attention_vector, slice.slice((j + 1) * d, d).concat(b_self));
  }
  const RVector alpha = hardmax(scores);
  RVector combined = k.bias;
  for (std::size_t j = 0; j < candidates; ++j) {
    if (alpha[j].is_zero()) continue;
    // The self candidate contributes B*x_u; neighbours contribute their A-block.
    const RVector& term = j == 0 ? b_self : slice.slice((j + 1) * d, d);
    combined = combined + alpha[j] * term;
  }
  RVector out(slice.dim());
  for (std::size_t i = 0; i < d; ++i) out[i] = combined[i];
  return out;
}

}  // namespace

ActivationSpec::ActivationSpec(std::vector<ActivationSegment> segments) : segments_(std::move(segments)) {
  for (const auto& seg : segments_) {
    if (const auto* att = std::get_if<AttentionCombineKind>(&seg.kind)) check_attention_kind(*att, seg.length);
  }
}

ActivationSpec ActivationSpec::identity(std::size_t n) { return ActivationSpec({{n, IdentityKind{}}}); }

ActivationSpec ActivationSpec::truncated_relu(std::size_t n) { return ActivationSpec({{n, TruncatedReluKind{}}}); }

ActivationSpec ActivationSpec::hardmax(std::size_t n) { return ActivationSpec({{n, HardmaxKind{}}}); }

ActivationSpec ActivationSpec::attention_combine(AttentionCombineKind kind) {
  const std::size_t n = kind.block_count * kind.block_dim;
  return ActivationSpec({{n, std::move(kind)}});
}

std::size_t ActivationSpec::total_length() const {
  std::size_t n = 0;
  for (const auto& seg : segments_) n += seg.length;
  return n;
}

bool ActivationSpec::is_identity() const {
  for (const auto& seg : segments_) {
    if (!std::holds_alternative<IdentityKind>(seg.kind)) return false;
  }
  return true;
}

RVector apply_activation(const ActivationSpec& spec, const RVector& v) {
  if (spec.total_length() != v.dim()) {
    throw DimensionError("activation covers " + std::to_string(spec.total_length()) + " coordinates but vector has dim " +
                         std::to_string(v.dim()));
  }
  if (spec.is_identity()) return v;
  std::vector<Rational> out;
  out.reserve(v.dim());
  std::size_t offset = 0;
  for (const auto& seg : spec.segments()) {
    const RVector part = v.slice(offset, seg.length);
    RVector mapped = std::visit(
        [&part](const auto& k) -> RVector {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, IdentityKind>) {
            return part;
          } else if constexpr (std::is_same_v<K, TruncatedReluKind>) {
            return truncated_relu(part);
          } else if constexpr (std::is_same_v<K, HardmaxKind>) {
            return hardmax(part);
          } else {
            return attention_combine(k, part);
          }
        },
        seg.kind);
    out.insert(out.end(), mapped.begin(), mapped.end());
    offset += seg.length;
  }
  return RVector(std::move(out));
}

std::string kind_name(const ActivationKind& kind) {
  return std::visit(
      [](const auto& k) -> std::string {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, IdentityKind>) return "identity";
        if constexpr (std::is_same_v<K, TruncatedReluKind>) return "truncated_relu";
        if constexpr (std::is_same_v<K, HardmaxKind>) return "hardmax";
        return "attention_combine";
      },
      kind);
}

}  // namespace fibrelab
