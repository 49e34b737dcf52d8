#include <doctest.h>

#include <algorithm>

#include "fibrelab/gat_compiler.hpp"
#include "fibrelab/harness.hpp"
#include "oracle.hpp"

using namespace fibrelab;

namespace {

NetworkInstance identity_net(std::size_t depth, std::size_t dim = 1) {
  NeuralArchitecture arch{{dim}, {}};
  std::vector<DenseLayer> layers;
  for (std::size_t l = 1; l <= depth; ++l) {
    arch.dims.push_back(dim);
    if (l < depth) arch.activations.push_back(ActivationSpec::identity(dim));
    layers.push_back(DenseLayer{RMatrix::identity(dim), RVector::zeros(dim)});
  }
  return NetworkInstance(arch, layers);
}

FibredNetwork single(const NetworkInstance& n) {
  return FibredNetwork{n, FibringArchitecture("r", {{"r", n.architecture()}}, {}), {}};
}

// Naive recursive evaluation over oracle fractions.
oracle::Vec naive_eval(const FibredNetwork& net, const NodeId& node, const NetworkInstance& inst, oracle::Vec v,
                       bool reverse_ties = false) {
  std::vector<FibringEdge> edges;
  for (const auto& e : net.architecture.edges()) {
    if (e.parent == node) edges.push_back(e);
  }
  std::sort(edges.begin(), edges.end(), [reverse_ties](const FibringEdge& a, const FibringEdge& b) {
    if (a.label.layer != b.label.layer) return a.label.layer < b.label.layer;
    return reverse_ties ? b.label.positions < a.label.positions : a.label.positions < b.label.positions;
  });
  std::size_t at = 0;
  auto advance = [&](std::size_t to) {
    for (std::size_t l = at + 1; l <= to; ++l) {
      if (l > 1 && !inst.architecture().activation(l - 1).is_identity()) v = oracle::clip(v);
      v = oracle::affine(oracle::of(inst.layer(l).weights), v, oracle::of(inst.layer(l).bias));
    }
    at = std::max(at, to);
  };
  for (const auto& e : edges) {
    advance(e.label.layer);
    RVector current(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) current[i] = Rational(v[i].n, v[i].d);
    const auto [child_inst, child_input] = apply_rule(net.rule(node, e.child), current);
    const oracle::Vec out = naive_eval(net, e.child, child_inst, oracle::of(child_input), reverse_ties);
    for (std::size_t k = 0; k < e.label.positions.size(); ++k) v[e.label.positions[k]] = out[k];
  }
  advance(inst.depth());
  return v;
}

}  // namespace

TEST_CASE("validate_architecture examples") {
  const NeuralArchitecture root{{2, 2, 1}, {ActivationSpec::identity(2)}};
  const auto single_node = validate_architecture(FibringArchitecture("r", {{"r", root}}, {}));
  CHECK(single_node.valid());
  CHECK(single_node.in_class_F);

  const NeuralArchitecture child{{1, 1}, {}};
  const FibringArchitecture overlapping("r", {{"r", root}, {"a", child}, {"b", child}},
                                        {{"r", "a", {1, {0}}}, {"r", "b", {1, {0}}}});
  const auto report = validate_architecture(overlapping);
  CHECK_FALSE(report.disjoint);
  CHECK_FALSE(report.valid());
  REQUIRE_FALSE(report.issues.empty());
  CHECK(report.issues.front().kind == "disjointness");

  const FibringArchitecture mixed_layers("r", {{"r", root}, {"a", child}, {"b", child}},
                                         {{"r", "a", {1, {0}}}, {"r", "b", {2, {0}}}});
  CHECK(validate_architecture(mixed_layers).valid());
  CHECK_FALSE(validate_architecture(mixed_layers).in_class_F);

  const NeuralArchitecture wide{{1, 2}, {}};
  const FibringArchitecture bad_dim("r", {{"r", root}, {"a", wide}}, {{"r", "a", {1, {0}}}});
  CHECK_FALSE(validate_architecture(bad_dim).dimensions_consistent);

  CHECK_THROWS_AS(validate_architecture(FibringArchitecture("r", {{"r", root}, {"a", child}},
                                                            {{"r", "a", {1, {0}}}, {"a", "r", {1, {0}}}})),
                  StructureError);
  CHECK_THROWS_AS(validate_architecture(FibringArchitecture("r", {{"r", root}}, {{"r", "zz", {1, {0}}}})),
                  StructureError);
}

TEST_CASE("compiled GAT roots are valid but outside the restricted class") {
  GatInstance g;
  g.gnn.dims = {1, 1};
  g.gnn.layers = {GnnLayer{RMatrix::from_rows({{1}}), RMatrix::from_rows({{1}}), RVector{0}}};
  g.attention = {RVector{0, 0}};
  const CompiledFibring c = compile(g, Graph(2, {{0, 1}}), 0);
  CHECK(c.root_instance.depth() == 3);
  const auto report = validate_architecture(c.architecture);
  CHECK(report.valid());
  CHECK_FALSE(report.in_class_F);
}

TEST_CASE("apply_rule examples") {
  const NetworkInstance n0 = identity_net(1);
  const auto [ci, cy] = apply_rule(ConstantRule{n0, RVector{4}}, RVector{9, 9});
  CHECK(ci == n0);
  CHECK(cy == RVector{4});
  const auto [si, sy] = apply_rule(SelfFibreRule{n0}, RVector{2, 3});
  CHECK(si == n0);
  CHECK(sy == RVector{2, 3});
  TableRule table;
  table.insert(RVector{0, 1}, n0, RVector{1});
  CHECK(apply_rule(table, RVector{0, 1}).second == RVector{1});
  CHECK_THROWS_AS(apply_rule(table, RVector{1, 0}), RuleDomainError);
}

TEST_CASE("evaluate_fibred examples") {
  const NetworkInstance root = identity_net(2);
  CHECK(evaluate_fibred(single(root), RVector{3}).first == run_network(root, RVector{3}));

  const NeuralArchitecture leaf{{1, 1}, {}};
  FibredNetwork net{root, FibringArchitecture("r", {{"r", root.architecture()}, {"c", leaf}}, {{"r", "c", {1, {0}}}}),
                    {}};
  net.rules.emplace(EdgeKey{"r", "c"}, ConstantRule{identity_net(1), RVector{7}});
  const auto [out, trace] = evaluate_fibred(net, RVector{3});
  CHECK(out == RVector{7});
  const NodeTrace& t = trace.nodes.at("r");
  REQUIRE(t.stages.size() == 1);
  CHECK(t.stages[0].x == RVector{3});
  CHECK(t.stages[0].h == RVector{7});
  CHECK(classify_fibred(net, RVector{3}));

  SUBCASE("a child covering the whole last layer determines the output") {
    FibredNetwork top{root, FibringArchitecture("r", {{"r", root.architecture()}, {"c", leaf}}, {{"r", "c", {2, {0}}}}),
                      {}};
    top.rules.emplace(EdgeKey{"r", "c"}, ConstantRule{identity_net(1), RVector{Rational(-5, 2)}});
    CHECK(evaluate_fibred(top, RVector{100}).first == RVector{Rational(-5, 2)});
    CHECK_FALSE(classify_fibred(top, RVector{100}));
  }
  SUBCASE("missing table entries name the edge") {
    FibredNetwork t2 = net;
    t2.rules.at({"r", "c"}) = TableRule{};
    try {
      evaluate_fibred(t2, RVector{3});
      FAIL("expected RuleDomainError");
    } catch (const RuleDomainError& e) {
      CHECK(e.edge() == EdgeKey{"r", "c"});
      CHECK(e.vector() == RVector{3});
    }
  }
}

TEST_CASE("classify_fibred examples") {
  auto constant = [](Rational v) {
    return single(NetworkInstance(NeuralArchitecture{{1, 1}, {}}, {DenseLayer{RMatrix::zero(1, 1), RVector{v}}}));
  };
  CHECK(classify_fibred(constant(Rational(1, 2)), RVector{0}));
  CHECK_FALSE(classify_fibred(constant(0), RVector{0}));
  CHECK_FALSE(classify_fibred(constant(-1), RVector{0}));
}

TEST_CASE("property: fibred evaluation matches a naive recursion") {
  InstanceGenConfig cfg;
  cfg.population = Population::Mixed;
  cfg.seed = 31;
  for (std::size_t i = 0; i < 60; ++i) {
    const FibredCase fc = generate_fibred_case(cfg, i);
    for (const auto& x : input_cube(RVector::zeros(fc.network.root_instance.input_dim()))) {
      const oracle::Vec expected = naive_eval(fc.network, fc.network.architecture.root(), fc.network.root_instance,
                                              oracle::of(x));
      REQUIRE(oracle::same(evaluate_fibred(fc.network, x).first, expected));
    }
  }
}

TEST_CASE("property: sibling order is irrelevant when rules ignore their input") {
  InstanceGenConfig cfg;
  cfg.seed = 32;
  cfg.max_children = 3;
  std::size_t with_ties = 0;
  for (std::size_t i = 0; i < 80; ++i) {
    FibredCase fc = generate_fibred_case(cfg, i);
    for (auto& [key, rule] : fc.network.rules) {
      const NeuralArchitecture& child = fc.network.architecture.arch(key.second);
      if (auto* t = std::get_if<TableRule>(&rule)) {
        const TableEntry e = t->entries.begin()->second;
        rule = ConstantRule{e.instance, e.input};
      } else if (auto* s = std::get_if<SelfFibreRule>(&rule)) {
        rule = ConstantRule{s->instance, RVector::zeros(child.input_dim())};
      }
    }
    const auto& arch = fc.network.architecture;
    for (const auto& id : arch.bfs_order()) {
      const auto& kids = arch.children(id);
      for (std::size_t k = 1; k < kids.size(); ++k) with_ties += kids[k].label.layer == kids[k - 1].label.layer ? 1 : 0;
    }
    const oracle::Vec reversed =
        naive_eval(fc.network, arch.root(), fc.network.root_instance, oracle::of(fc.x), true);
    REQUIRE(oracle::same(evaluate_fibred(fc.network, fc.x).first, reversed));
  }
  CHECK(with_ties > 0);
}

TEST_CASE("same-layer siblings see each other's splices") {
  const NetworkInstance root = identity_net(1, 2);
  const NetworkInstance sum(NeuralArchitecture{{2, 1}, {}}, {DenseLayer{RMatrix::from_rows({{1, 1}}), RVector{0}}});
  FibredNetwork net{root,
                    FibringArchitecture("r", {{"r", root.architecture()}, {"a", sum.architecture()}, {"b", sum.architecture()}},
                                        {{"r", "a", {1, {0}}}, {"r", "b", {1, {1}}}}),
                    {}};
  net.rules.emplace(EdgeKey{"r", "a"}, SelfFibreRule{sum});
  net.rules.emplace(EdgeKey{"r", "b"}, SelfFibreRule{sum});
  CHECK(evaluate_fibred(net, RVector{1, 1}).first == RVector{2, 3});
  const oracle::Vec reversed = naive_eval(net, "r", root, oracle::of(RVector{1, 1}), true);
  CHECK(reversed == oracle::Vec{3, 2});
}
