#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fibrelab/linalg.hpp"

namespace fibrelab {

using Vertex = std::size_t;

/// Undirected simple graph on vertices 0..n-1.
class Graph {
 public:
  Graph() = default;
  /// Throws StructureError on self-loops or out-of-range endpoints; duplicate edges collapse.
  Graph(std::size_t num_vertices, const std::vector<std::pair<Vertex, Vertex>>& edges);

  static Graph complete(std::size_t n);

  std::size_t num_vertices() const { return adjacency_.size(); }
  /// Sorted neighbours of v.
  const std::vector<Vertex>& neighbours(Vertex v) const;
  std::size_t degree(Vertex v) const { return neighbours(v).size(); }
  bool has_edge(Vertex a, Vertex b) const;
  /// Edges as (a, b) with a < b, sorted.
  std::vector<std::pair<Vertex, Vertex>> edges() const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  std::vector<std::vector<Vertex>> adjacency_;
};

struct FeaturedGraph {
  Graph graph;
  std::vector<RVector> features;  // one per vertex

  std::size_t feature_dim() const { return features.empty() ? 0 : features.front().dim(); }
  /// Throws DimensionError unless there is one feature of dimension d0 per vertex.
  void validate(std::size_t d0) const;
};

struct GnnLayer {
  RMatrix A;  // neighbour weights, d_l x d_{l-1}
  RMatrix B;  // self weights, d_l x d_{l-1}
  RVector b;

  friend bool operator==(const GnnLayer&, const GnnLayer&) = default;
};

struct GnnInstance {
  std::vector<std::size_t> dims;  // d_0..d_L
  std::vector<GnnLayer> layers;   // layers 1..L

  std::size_t depth() const { return layers.size(); }
  const GnnLayer& layer(std::size_t l) const { return layers.at(l - 1); }
  /// Throws ShapeError when the shapes do not chain.
  void validate() const;

  friend bool operator==(const GnnInstance&, const GnnInstance&) = default;
};

struct GatInstance {
  GnnInstance gnn;
  std::vector<RVector> attention;  // a^l of dimension 2 d_l, layers 1..L

  std::size_t depth() const { return gnn.depth(); }
  const RVector& attention_vector(std::size_t l) const { return attention.at(l - 1); }
  void validate() const;

  friend bool operator==(const GatInstance&, const GatInstance&) = default;
};

/// Per-layer node vectors: x[0] are the input features, h[l] and x[l] for l = 1..L.
struct GraphTrace {
  std::vector<std::vector<RVector>> h;  // h[0] mirrors x[0]
  std::vector<std::vector<RVector>> x;

  std::size_t depth() const { return x.empty() ? 0 : x.size() - 1; }
  const RVector& final_h(Vertex u) const { return h.back().at(u); }
  const RVector& final_x(Vertex u) const { return x.back().at(u); }
};

GraphTrace gnn_forward(const GnnInstance& inst, const FeaturedGraph& fg);

/// Hardmax attention of u over N(u) and u itself at `layer`, given the layer-(l-1) vectors.
std::map<Vertex, Rational> gat_attention_coeffs(const GatInstance& inst, std::size_t layer, Vertex u,
                                                const Graph& graph, const std::vector<RVector>& x_prev);

GraphTrace gat_forward(const GatInstance& inst, const FeaturedGraph& fg);

/// Positional encoding (t, s) -> vector of dimension d0.
using PositionalEncoding = std::function<RVector(std::size_t t, std::size_t s, std::size_t dim)>;

/// The constant vector with every coordinate t / (s + 1).
RVector default_positional_encoding(std::size_t t, std::size_t s, std::size_t dim);

struct TokenSequence {
  std::vector<std::string> tokens;
  std::map<std::string, RVector> vec_table;
  /// Explicit encodings per position; when absent the default encoding is used.
  std::optional<std::vector<RVector>> positions;

  std::size_t length() const { return tokens.size(); }
  RVector position(std::size_t t, std::size_t dim) const;
  /// vec(token_t) + pos(t, s) for every t. Throws StructureError on unknown tokens.
  std::vector<RVector> features() const;
  /// Complete graph over the tokens with the encoded features.
  FeaturedGraph encode() const;
};

GraphTrace transformer_forward(const GatInstance& inst, const TokenSequence& seq);

/// x^L_u > 0; ShapeError unless d_L = 1.
bool classify_node(const GnnInstance& inst, const FeaturedGraph& fg, Vertex u);
bool classify_node(const GatInstance& inst, const FeaturedGraph& fg, Vertex u);
bool classify_token(const GatInstance& inst, const TokenSequence& seq, std::size_t t);

}  // namespace fibrelab
