#include <doctest.h>

#include <set>

#include "fibrelab/compatible.hpp"
#include "fibrelab/harness.hpp"

using namespace fibrelab;

namespace {

NetworkInstance scalar(Rational w, Rational b) {
  return NetworkInstance(NeuralArchitecture{{1, 1}, {}}, {DenseLayer{RMatrix::from_rows({{w}}), RVector{b}}});
}

FibredNetwork single(const NetworkInstance& n) {
  return FibredNetwork{n, FibringArchitecture("r", {{"r", n.architecture()}}, {}), {}};
}

// Root identity with one table child at layer 1.
FibredNetwork with_table_child(bool total) {
  const NetworkInstance root = scalar(1, 0);
  FibredNetwork net{root,
                    FibringArchitecture("r", {{"r", root.architecture()}, {"c", root.architecture()}},
                                        {{"r", "c", {1, {0}}}}),
                    {}};
  TableRule t;
  t.insert(RVector{0}, scalar(0, 1), RVector{0});
  if (total) t.insert(RVector{1}, scalar(-1, 0), RVector{1});
  net.rules.emplace(EdgeKey{"r", "c"}, t);
  return net;
}

const ComponentId kRootIn = ComponentId::input("r");

// Truth value, or nothing when a box needs a jump the model leaves undefined.
std::optional<bool> outcome(const FibredModel& m, WorldId w, const Formula& f) {
  try {
    return check_satisfaction(m, kRootIn, w, f);
  } catch (const UnreachableJump&) {
    return std::nullopt;
  }
}

bool has_condition_failure(const CompatibilityReport& r, const std::string& condition) {
  for (const auto& f : r.failed()) {
    if (f.condition == condition && !f.witness.empty()) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("check_admissible examples") {
  KripkeComponent m;
  m.add_world(WorldId{0});
  m.add_world(WorldId{1});
  WorldVectorMap pi(kRootIn);
  pi.insert(WorldId{0}, RVector{0});
  pi.insert(WorldId{1}, RVector{1});
  const NetworkInstance constant = scalar(0, 3);
  const LayerSpan full{0, 1};

  CHECK_FALSE(check_admissible(m, constant, full, pi));
  CHECK(admissibility_witness(m, constant, full, pi).has_value());
  for (auto a : {0u, 1u}) {
    for (auto b : {0u, 1u}) m.add_edge(WorldId{a}, WorldId{b});
  }
  CHECK(check_admissible(m, constant, full, pi));

  KripkeComponent reflexive;
  reflexive.add_world(WorldId{0});
  reflexive.add_world(WorldId{1});
  reflexive.add_edge(WorldId{0}, WorldId{0});
  reflexive.add_edge(WorldId{1}, WorldId{1});
  CHECK(check_admissible(reflexive, scalar(1, 0), full, pi));
  CHECK_FALSE(check_admissible(reflexive, constant, full, pi));

  WorldVectorMap bad(kRootIn);
  bad.insert(WorldId{0}, RVector{0, 0});
  bad.insert(WorldId{1}, RVector{0, 1});
  CHECK_THROWS_AS(check_admissible(reflexive, constant, full, bad), DimensionError);
  CHECK_THROWS_AS(bad.insert(WorldId{2}, RVector{0, 1}), StructureError);
}

TEST_CASE("build_compatible on a constant-zero root") {
  const FibredNetwork net = single(scalar(0, 0));
  const CompatibleModel c = build_compatible(net, RVector{0});
  const KripkeComponent& root = c.model.component(kRootIn);
  REQUIRE(root.worlds.size() == 2);
  const WorldId w0 = c.root_world(RVector{0}), w1 = c.root_world(RVector{1});
  CHECK(root.relation().size() == 4);
  CHECK(root.related(w0, w1));
  CHECK_FALSE(root.props(w0).contains(1));
  CHECK(root.props(w1).contains(1));
  CHECK(check_compatibility(c, net, RVector{0}).passed());
}

TEST_CASE("build_compatible separates distinct outputs") {
  const FibredNetwork net = single(scalar(1, 0));
  const CompatibleModel c = build_compatible(net, RVector{1});
  const KripkeComponent& root = c.model.component(kRootIn);
  const WorldId w0 = c.root_world(RVector{0}), w1 = c.root_world(RVector{1});
  const std::vector<std::pair<WorldId, WorldId>> expected{{std::min(w0, w1), std::min(w0, w1)},
                                                          {std::max(w0, w1), std::max(w0, w1)}};
  CHECK(root.relation() == expected);
}

TEST_CASE("build_compatible errors") {
  CHECK_THROWS_AS(build_compatible(with_table_child(false), RVector{0}), RuleDomainError);
  BuildOptions small;
  small.max_cube_bits = 0;
  CHECK_THROWS_AS(build_compatible(single(scalar(1, 0)), RVector{0}, small), GuardError);
}

TEST_CASE("builder output with a child component") {
  const FibredNetwork net = with_table_child(true);
  for (const RVector& x : {RVector{0}, RVector{1}}) {
    const CompatibleModel c = build_compatible(net, x);
    CHECK(c.model.has_component(ComponentId::input("c")));
    CHECK(c.model.has_component(ComponentId::at_layer("r", 1)));
    const WorldId root = c.root_world(x);
    const WorldId child = resolve_jump(c.model, kRootIn, root, ComponentId::input("c"));
    CHECK(c.model.stored_jump(root, ComponentId::input("c")) == child);
    CHECK(c.maps.at(ComponentId::input("c")).vector(child) == x);
    CHECK(check_compatibility(c, net, x).passed());
  }
}

TEST_CASE("check_compatibility detects forced violations") {
  const FibredNetwork net = with_table_child(true);
  const RVector x{1};
  const CompatibleModel good = build_compatible(net, x);
  REQUIRE(check_compatibility(good, net, x).passed());

  SUBCASE("flipped valuation bit") {
    CompatibleModel bad = good;
    KripkeComponent& root = bad.model.component(kRootIn);
    const WorldId w = bad.root_world(RVector{0});
    root.valuation[w] = PropSet(root.props(w).bits() ^ 1u);
    CHECK(has_condition_failure(check_compatibility(bad, net, x), "C0"));
  }
  SUBCASE("removed relation edge") {
    CompatibleModel bad = good;
    const WorldId w = bad.root_world(RVector{0});
    bad.model.component(kRootIn).remove_edge(w, w);
    CHECK(has_condition_failure(check_compatibility(bad, net, x), "C1"));
  }
  SUBCASE("missing component") {
    CompatibleModel bad = good;
    bad.maps.erase(ComponentId::input("c"));
    const auto report = check_compatibility(bad, net, x);
    CHECK_FALSE(report.passed());
  }
}

TEST_CASE("transport_iso examples") {
  const FibredNetwork net = with_table_child(true);
  const RVector x{0};
  const CompatibleModel c = build_compatible(net, x);
  const KripkeComponent& root = c.model.component(kRootIn);

  std::map<WorldId, WorldId> identity;
  for (auto w : root.worlds) identity[w] = w;
  const CompatibleModel same = transport_iso(c, kRootIn, identity);
  CHECK(same.model == c.model);
  CHECK(same.maps == c.maps);

  const WorldId a = root.worlds[0], b = root.worlds[1];
  const CompatibleModel swapped = transport_iso(c, kRootIn, {{a, b}, {b, a}});
  CHECK(check_compatibility(swapped, net, x).passed());
  Rng rng(51);
  const auto comps = builder_components(net.architecture);
  for (int i = 0; i < 50; ++i) {
    const Formula f = random_formula(rng, 1, comps, 3);
    CHECK(outcome(c.model, a, f) == outcome(swapped.model, b, f));
    CHECK(outcome(c.model, b, f) == outcome(swapped.model, a, f));
  }

  const WorldId foreign = c.model.component(ComponentId::input("c")).worlds.front();
  CHECK_THROWS_AS(transport_iso(c, kRootIn, {{a, foreign}, {b, WorldId{999}}}), StructureError);
  CHECK_THROWS_AS(transport_iso(c, kRootIn, {{a, WorldId{900}}, {b, WorldId{900}}}), StructureError);
  CHECK_THROWS_AS(transport_iso(c, kRootIn, {{a, WorldId{900}}}), StructureError);
}

TEST_CASE("input_cube and cube_valuation") {
  const auto cube = input_cube(RVector{Rational(1, 2), 0});
  REQUIRE(cube.size() == 4);
  CHECK(cube[0] == (RVector{Rational(1, 2), 0}));
  CHECK(cube[1] == (RVector{Rational(3, 2), 0}));
  CHECK(cube[2] == (RVector{Rational(1, 2), 1}));
  CHECK(cube_valuation(cube[3], RVector{Rational(1, 2), 0}) == PropSet(0b11));
  CHECK(input_cube(RVector{}).size() == 1);
}

TEST_CASE("property: builder relations are equivalences and models pass their own check") {
  InstanceGenConfig cfg;
  cfg.seed = 52;
  cfg.population = Population::Mixed;
  for (std::size_t i = 0; i < 25; ++i) {
    FibredCase fc = generate_fibred_case(cfg, i);
    Rng rng(derive_seed(cfg.seed, 3, i));
    totalize_tables(fc.network, rng, cfg);
    const CompatibleModel c = build_compatible(fc.network, fc.x);
    REQUIRE(check_compatibility(c, fc.network, fc.x).passed());
    for (const auto& [id, comp] : c.model.components()) {
      for (auto w : comp.worlds) REQUIRE(comp.related(w, w));
      for (const auto& [a, b] : comp.relation()) {
        REQUIRE(comp.related(b, a));
        for (auto s : comp.successors.at(b)) REQUIRE(comp.related(a, s));
      }
    }
    const CompatibleModel again = build_compatible(fc.network, fc.x);
    REQUIRE(again.model == c.model);
  }
}
