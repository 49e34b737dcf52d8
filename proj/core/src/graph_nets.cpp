#include "fibrelab/graph_nets.hpp"

#include <algorithm>

#include "fibrelab/errors.hpp"

namespace fibrelab {

Graph::Graph(std::size_t num_vertices, const std::vector<std::pair<Vertex, Vertex>>& edges)
    : adjacency_(num_vertices) {
  for (const auto& [a, b] : edges) {
    if (a >= num_vertices || b >= num_vertices) {
      throw StructureError("edge {" + std::to_string(a) + "," + std::to_string(b) + "} leaves the vertex range");
    }
    if (a == b) throw StructureError("self-loop at vertex " + std::to_string(a));
    adjacency_[a].push_back(b);
    adjacency_[b].push_back(a);
  }
  for (auto& adj : adjacency_) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }
}

Graph Graph::complete(std::size_t n) {
  std::vector<std::pair<Vertex, Vertex>> edges;
  for (Vertex a = 0; a < n; ++a) {
    for (Vertex b = a + 1; b < n; ++b) edges.emplace_back(a, b);
  }
  return Graph(n, edges);
}

const std::vector<Vertex>& Graph::neighbours(Vertex v) const {
  if (v >= adjacency_.size()) throw StructureError("unknown vertex " + std::to_string(v));
  return adjacency_[v];
}

bool Graph::has_edge(Vertex a, Vertex b) const {
  const auto& adj = neighbours(a);
  return std::binary_search(adj.begin(), adj.end(), b);
}

std::vector<std::pair<Vertex, Vertex>> Graph::edges() const {
  std::vector<std::pair<Vertex, Vertex>> out;
  for (Vertex a = 0; a < adjacency_.size(); ++a) {
    for (auto b : adjacency_[a]) {
      if (a < b) out.emplace_back(a, b);
    }
  }
  return out;
}

void FeaturedGraph::validate(std::size_t d0) const {
  if (features.size() != graph.num_vertices()) {
    throw DimensionError("graph has " + std::to_string(graph.num_vertices()) + " vertices but " +
                         std::to_string(features.size()) + " feature vectors");
  }
  for (std::size_t v = 0; v < features.size(); ++v) {
    if (features[v].dim() != d0) {
      throw DimensionError("feature of vertex " + std::to_string(v) + " has dimension " +
                           std::to_string(features[v].dim()) + ", expected " + std::to_string(d0));
    }
  }
}

void GnnInstance::validate() const {
  if (layers.empty() || dims.size() != layers.size() + 1) {
    throw ShapeError("graph network needs L >= 1 layers and L + 1 dimensions");
  }
  for (std::size_t l = 1; l <= layers.size(); ++l) {
    const GnnLayer& g = layer(l);
    const std::size_t rows = dims[l], cols = dims[l - 1];
    if (g.A.rows() != rows || g.A.cols() != cols || g.B.rows() != rows || g.B.cols() != cols || g.b.dim() != rows) {
      throw ShapeError("layer " + std::to_string(l) + " weights do not match dimensions " + std::to_string(rows) +
                       "x" + std::to_string(cols));
    }
  }
}

void GatInstance::validate() const {
  gnn.validate();
  if (attention.size() != gnn.depth()) throw ShapeError("one attention vector per layer is required");
  for (std::size_t l = 1; l <= depth(); ++l) {
    if (attention_vector(l).dim() != 2 * gnn.dims[l]) {
      throw ShapeError("attention vector of layer " + std::to_string(l) + " must have dimension " +
                       std::to_string(2 * gnn.dims[l]));
    }
  }
}

namespace {

GraphTrace start_trace(const FeaturedGraph& fg, std::size_t d0) {
  fg.validate(d0);
  GraphTrace trace;
  trace.h.push_back(fg.features);
  trace.x.push_back(fg.features);
  return trace;
}

void push_layer(GraphTrace& trace, std::vector<RVector> h) {
  std::vector<RVector> x;
  x.reserve(h.size());
  for (const auto& v : h) x.push_back(truncated_relu(v));
  trace.h.push_back(std::move(h));
  trace.x.push_back(std::move(x));
}

}  // namespace

GraphTrace gnn_forward(const GnnInstance& inst, const FeaturedGraph& fg) {
  inst.validate();
  GraphTrace trace = start_trace(fg, inst.dims.front());
  for (std::size_t l = 1; l <= inst.depth(); ++l) {
    const GnnLayer& g = inst.layer(l);
    const auto& prev = trace.x.back();
    std::vector<RVector> h;
    h.reserve(prev.size());
    for (Vertex u = 0; u < prev.size(); ++u) {
      RVector acc = mat_vec_mul_add(g.B, prev[u], g.b);
      for (auto v : fg.graph.neighbours(u)) acc = mat_vec_mul_add(g.A, prev[v], acc);
      h.push_back(std::move(acc));
    }
    push_layer(trace, std::move(h));
  }
  return trace;
}

std::map<Vertex, Rational> gat_attention_coeffs(const GatInstance& inst, std::size_t layer, Vertex u,
                                                const Graph& graph, const std::vector<RVector>& x_prev) {
  const GnnLayer& g = inst.gnn.layer(layer);
  const RVector& a = inst.attention_vector(layer);
  if (u >= x_prev.size()) throw DimensionError("no vector for vertex " + std::to_string(u));
  std::vector<Vertex> over = graph.neighbours(u);
  over.insert(std::lower_bound(over.begin(), over.end(), u), u);
  const RVector zero = RVector::zeros(g.b.dim());
  const RVector self_b = mat_vec_mul_add(g.B, x_prev[u], zero);
  std::vector<Rational> scores;
  scores.reserve(over.size());
  for (auto w : over) {
    if (w >= x_prev.size()) throw DimensionError("no vector for neighbour " + std::to_string(w));
    scores.push_back(dot(a, mat_vec_mul_add(g.A, x_prev[w], zero).concat(self_b)));
  }
  const RVector alpha = hardmax(RVector(std::move(scores)));
  std::map<Vertex, Rational> out;
  for (std::size_t i = 0; i < over.size(); ++i) out.emplace(over[i], alpha[i]);
  return out;
}

GraphTrace gat_forward(const GatInstance& inst, const FeaturedGraph& fg) {
  inst.validate();
  GraphTrace trace = start_trace(fg, inst.gnn.dims.front());
  for (std::size_t l = 1; l <= inst.depth(); ++l) {
    const GnnLayer& g = inst.gnn.layer(l);
    const auto& prev = trace.x.back();
    const RVector zero = RVector::zeros(g.b.dim());
    std::vector<RVector> h;
    h.reserve(prev.size());
    for (Vertex u = 0; u < prev.size(); ++u) {
      const auto alpha = gat_attention_coeffs(inst, l, u, fg.graph, prev);
      RVector acc = g.b;
      for (const auto& [w, coeff] : alpha) {
        if (coeff.is_zero()) continue;
        const RMatrix& M = w == u ? g.B : g.A;
        acc = acc + coeff * mat_vec_mul_add(M, prev[w], zero);
      }
      h.push_back(std::move(acc));
    }
    push_layer(trace, std::move(h));
  }
  return trace;
}

RVector default_positional_encoding(std::size_t t, std::size_t s, std::size_t dim) {
  return RVector::constant(dim, Rational(static_cast<long>(t), static_cast<long>(s + 1)));
}

RVector TokenSequence::position(std::size_t t, std::size_t dim) const {
  if (positions) {
    if (t >= positions->size() || (*positions)[t].dim() != dim) {
      throw DimensionError("no positional encoding of dimension " + std::to_string(dim) + " for position " +
                           std::to_string(t));
    }
    return (*positions)[t];
  }
  return default_positional_encoding(t, length(), dim);
}

std::vector<RVector> TokenSequence::features() const {
  if (tokens.empty()) throw StructureError("token sequence is empty");
  std::vector<RVector> out;
  out.reserve(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto it = vec_table.find(tokens[t]);
    if (it == vec_table.end()) throw StructureError("token '" + tokens[t] + "' has no vector");
    out.push_back(it->second + position(t, it->second.dim()));
  }
  return out;
}

FeaturedGraph TokenSequence::encode() const { return FeaturedGraph{Graph::complete(length()), features()}; }

GraphTrace transformer_forward(const GatInstance& inst, const TokenSequence& seq) {
  return gat_forward(inst, seq.encode());
}

namespace {

bool positive_scalar(const RVector& v) {
  if (v.dim() != 1) throw ShapeError("classification needs output dimension 1, got " + std::to_string(v.dim()));
  return v[0].sign() > 0;
}

}  // namespace

bool classify_node(const GnnInstance& inst, const FeaturedGraph& fg, Vertex u) {
  if (inst.dims.back() != 1) throw ShapeError("classification needs d_L = 1");
  return positive_scalar(gnn_forward(inst, fg).final_x(u));
}

bool classify_node(const GatInstance& inst, const FeaturedGraph& fg, Vertex u) {
  if (inst.gnn.dims.back() != 1) throw ShapeError("classification needs d_L = 1");
  return positive_scalar(gat_forward(inst, fg).final_x(u));
}

bool classify_token(const GatInstance& inst, const TokenSequence& seq, std::size_t t) {
  if (inst.gnn.dims.back() != 1) throw ShapeError("classification needs d_L = 1");
  return positive_scalar(transformer_forward(inst, seq).final_x(t));
}

}  // namespace fibrelab
