#include <doctest.h>

#include <algorithm>

#include "fibrelab/graph_nets.hpp"
#include "fibrelab/harness.hpp"
#include "oracle.hpp"

using namespace fibrelab;

namespace {

GnnInstance one_layer(Rational a, Rational b, Rational bias) {
  return GnnInstance{{1, 1}, {GnnLayer{RMatrix::from_rows({{a}}), RMatrix::from_rows({{b}}), RVector{bias}}}};
}

GatInstance with_attention(GnnInstance g, std::vector<RVector> att) { return GatInstance{std::move(g), std::move(att)}; }

FeaturedGraph path_ab(Rational xa, Rational xb) { return FeaturedGraph{Graph(2, {{0, 1}}), {RVector{xa}, RVector{xb}}}; }

}  // namespace

TEST_CASE("graph construction") {
  const Graph g(3, {{2, 0}, {0, 2}, {1, 2}});
  CHECK(g.edges() == std::vector<std::pair<Vertex, Vertex>>{{0, 2}, {1, 2}});
  CHECK(g.neighbours(2) == std::vector<Vertex>{0, 1});
  CHECK(g.has_edge(2, 0));
  CHECK_THROWS_AS(Graph(2, {{1, 1}}), StructureError);
  CHECK_THROWS_AS(Graph(2, {{0, 2}}), StructureError);
  CHECK(Graph::complete(4).edges().size() == 6);
}

TEST_CASE("gnn_forward examples") {
  const GraphTrace t = gnn_forward(one_layer(1, 1, 0), path_ab(1, 0));
  CHECK(t.final_h(0) == RVector{1});
  CHECK(t.final_h(1) == RVector{1});
  CHECK(t.final_x(0) == RVector{1});
  CHECK(t.final_x(1) == RVector{1});

  const FeaturedGraph isolated{Graph(1, {}), {RVector{1}}};
  CHECK(gnn_forward(one_layer(5, 3, -1), isolated).final_h(0) == RVector{2});

  const GnnInstance no_agg = one_layer(0, 2, Rational(-1, 2));
  const FeaturedGraph k3{Graph::complete(3), {RVector{1}, RVector{0}, RVector{1}}};
  const FeaturedGraph empty{Graph(3, {}), k3.features};
  const GraphTrace a = gnn_forward(no_agg, k3), b = gnn_forward(no_agg, empty);
  CHECK(a.h == b.h);

  CHECK_THROWS_AS(gnn_forward(one_layer(1, 1, 0), FeaturedGraph{Graph(1, {}), {RVector{1, 0}}}), DimensionError);
  CHECK_THROWS_AS(gnn_forward(one_layer(1, 1, 0), FeaturedGraph{Graph(2, {}), {RVector{1}}}), DimensionError);
}

TEST_CASE("gat_attention_coeffs examples") {
  const Graph star(4, {{0, 1}, {0, 2}, {0, 3}});
  const std::vector<RVector> x{RVector{1}, RVector{0}, RVector{1}, RVector{0}};
  const GatInstance zero = with_attention(one_layer(1, 1, 0), {RVector{0, 0}});
  for (const auto& [v, alpha] : gat_attention_coeffs(zero, 1, 0, star, x)) CHECK(alpha == Rational(1, 4));
  CHECK(gat_attention_coeffs(zero, 1, 0, Graph(1, {}), {RVector{1}}) == std::map<Vertex, Rational>{{0, 1}});

  // scores: self <(A*3, B*3), a> = 3, neighbour <(A*5, B*3), a> = 5
  const GatInstance pick = with_attention(one_layer(1, 1, 0), {RVector{1, 0}});
  const auto coeffs = gat_attention_coeffs(pick, 1, 0, Graph(2, {{0, 1}}), {RVector{3}, RVector{5}});
  CHECK(coeffs.at(0) == 0);
  CHECK(coeffs.at(1) == 1);
  CHECK_THROWS_AS(gat_attention_coeffs(pick, 1, 0, Graph(2, {{0, 1}}), {RVector{3}}), DimensionError);
}

TEST_CASE("gat_forward examples") {
  const GnnInstance g = one_layer(2, 3, Rational(1, 2));
  const FeaturedGraph star{Graph(3, {{0, 1}, {0, 2}}), {RVector{1}, RVector{1}, RVector{0}}};
  const GraphTrace gnn = gnn_forward(g, star);
  const GraphTrace gat = gat_forward(with_attention(g, {RVector{0, 0}}), star);
  for (Vertex u = 0; u < 3; ++u) {
    const Rational deg(static_cast<long>(star.graph.degree(u)));
    const Rational expected = (gnn.final_h(u)[0] - Rational(1, 2)) / (deg + 1) + Rational(1, 2);
    CHECK(gat.final_h(u) == RVector{expected});
  }

  const FeaturedGraph isolated{Graph(1, {}), {RVector{1}}};
  CHECK(gat_forward(with_attention(g, {RVector{7, -3}}), isolated).final_h(0) == RVector{Rational(7, 2)});
  CHECK_THROWS_AS(gat_forward(with_attention(g, {RVector{1}}), isolated), ShapeError);
}

TEST_CASE("transformer_forward examples") {
  const GatInstance inst = with_attention(one_layer(1, 2, -1), {RVector{1, -1}});
  TokenSequence one{{"a"}, {{"a", RVector{1}}}, std::nullopt};
  const FeaturedGraph single{Graph(1, {}), {RVector{1} + default_positional_encoding(0, 1, 1)}};
  CHECK(transformer_forward(inst, one).h == gat_forward(inst, single).h);

  TokenSequence same{{"a", "a", "a"}, {{"a", RVector{1}}}, std::vector<RVector>(3, RVector{0})};
  const GraphTrace t = transformer_forward(inst, same);
  CHECK(t.final_h(0) == t.final_h(1));
  CHECK(t.final_h(1) == t.final_h(2));

  TokenSequence two{{"a", "b"}, {{"a", RVector{1}}, {"b", RVector{0}}}, std::nullopt};
  CHECK(default_positional_encoding(1, 2, 1) == RVector{Rational(1, 3)});
  const FeaturedGraph k2{Graph::complete(2), {RVector{1}, RVector{Rational(1, 3)}}};
  CHECK(two.features() == k2.features);
  CHECK(transformer_forward(inst, two).h == gat_forward(inst, k2).h);
  const auto expected = oracle::graph_net(inst.gnn, &inst.attention, k2.graph, k2.features);
  CHECK(oracle::same(transformer_forward(inst, two).final_h(0), expected[0]));

  TokenSequence unknown{{"z"}, {{"a", RVector{1}}}, std::nullopt};
  CHECK_THROWS_AS(transformer_forward(inst, unknown), StructureError);
}

TEST_CASE("classify_node examples") {
  const FeaturedGraph isolated{Graph(1, {}), {RVector{0}}};
  CHECK(classify_node(one_layer(0, 0, Rational(1, 3)), isolated, 0));
  CHECK_FALSE(classify_node(one_layer(0, 0, 0), isolated, 0));
  CHECK_FALSE(classify_node(one_layer(0, 0, -5), isolated, 0));
  const GnnInstance wide{{1, 2}, {GnnLayer{RMatrix::zero(2, 1), RMatrix::zero(2, 1), RVector{1, 1}}}};
  CHECK_THROWS_AS(classify_node(wide, isolated, 0), ShapeError);
}

TEST_CASE("property: graph networks agree with the oracle") {
  InstanceGenConfig cfg;
  cfg.seed = 61;
  for (std::size_t i = 0; i < 150; ++i) {
    const CompileMode mode = i % 2 == 0 ? CompileMode::Gnn : CompileMode::Gat;
    const GraphCase c = generate_graph_case(cfg, i, mode, false);
    const bool gat = mode == CompileMode::Gat;
    const GraphTrace t = gat ? gat_forward(c.instance, c.graph) : gnn_forward(c.instance.gnn, c.graph);
    const auto expected = oracle::graph_net(c.instance.gnn, gat ? &c.instance.attention : nullptr, c.graph.graph,
                                            c.graph.features);
    for (Vertex u = 0; u < c.graph.graph.num_vertices(); ++u) {
      REQUIRE(oracle::same(t.final_h(u), expected[u]));
      for (std::size_t l = 1; l <= t.depth(); ++l) {
        for (const auto& e : t.x[l][u]) REQUIRE((Rational(0) <= e && e <= Rational(1)));
      }
    }
    if (gat) {
      for (std::size_t l = 1; l <= t.depth(); ++l) {
        for (Vertex u = 0; u < c.graph.graph.num_vertices(); ++u) {
          const auto coeffs = gat_attention_coeffs(c.instance, l, u, c.graph.graph, t.x[l - 1]);
          Rational sum(0);
          for (const auto& [_, a] : coeffs) sum += a;
          REQUIRE(sum == Rational(1));
        }
      }
    }
  }
}

TEST_CASE("property: relabelling vertices permutes outputs") {
  InstanceGenConfig cfg;
  cfg.seed = 62;
  for (std::size_t i = 0; i < 60; ++i) {
    const GraphCase c = generate_graph_case(cfg, i, i % 2 == 0 ? CompileMode::Gnn : CompileMode::Gat, false);
    const std::size_t n = c.graph.graph.num_vertices();
    std::vector<Vertex> perm(n);
    for (Vertex v = 0; v < n; ++v) perm[v] = (v + 1) % n;
    std::vector<std::pair<Vertex, Vertex>> edges;
    for (const auto& [a, b] : c.graph.graph.edges()) edges.emplace_back(perm[a], perm[b]);
    FeaturedGraph moved{Graph(n, edges), std::vector<RVector>(n)};
    for (Vertex v = 0; v < n; ++v) moved.features[perm[v]] = c.graph.features[v];
    const bool gat = c.mode == CompileMode::Gat;
    const GraphTrace a = gat ? gat_forward(c.instance, c.graph) : gnn_forward(c.instance.gnn, c.graph);
    const GraphTrace b = gat ? gat_forward(c.instance, moved) : gnn_forward(c.instance.gnn, moved);
    for (Vertex v = 0; v < n; ++v) REQUIRE(a.final_h(v) == b.final_h(perm[v]));
  }
}

TEST_CASE("property: token permutation permutes transformer outputs without positions") {
  InstanceGenConfig cfg;
  cfg.seed = 63;
  for (std::size_t i = 0; i < 40; ++i) {
    GraphCase c = generate_graph_case(cfg, i, CompileMode::Transformer, false);
    TokenSequence seq = c.sequence;
    seq.positions = std::vector<RVector>(seq.length(), RVector::zeros(c.instance.gnn.dims.front()));
    TokenSequence rotated = seq;
    std::rotate(rotated.tokens.begin(), rotated.tokens.begin() + 1, rotated.tokens.end());
    const GraphTrace a = transformer_forward(c.instance, seq), b = transformer_forward(c.instance, rotated);
    auto outputs = [](const GraphTrace& t) {
      std::vector<std::string> keys;
      for (const auto& h : t.h.back()) keys.push_back(h.key());
      std::sort(keys.begin(), keys.end());
      return keys;
    };
    REQUIRE(outputs(a) == outputs(b));
  }
}
