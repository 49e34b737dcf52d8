#include <doctest.h>

#include "fibrelab/harness.hpp"
#include "fibrelab/modal.hpp"

using namespace fibrelab;

namespace {

const ComponentId kI = ComponentId::input("r");
const ComponentId kJ = ComponentId::input("c");

// w0 in [r,in] jumps to w1 in [c,in]; w1 sees itself and w2.
FibredModel hand_model(bool p1_at_w2) {
  FibredModel m(2);
  m.add_component(kI);
  m.add_component(kJ);
  m.add_world(kI, WorldId{0});
  m.add_world(kJ, WorldId{1}, PropSet(0b01));
  m.add_world(kJ, WorldId{2}, PropSet(p1_at_w2 ? 0b01 : 0b10));
  m.component(kJ).add_edge(WorldId{1}, WorldId{1});
  m.component(kJ).add_edge(WorldId{1}, WorldId{2});
  m.set_jump(WorldId{0}, kJ, WorldId{1});
  m.set_tree_parent("c", "r");
  return m;
}

}  // namespace

TEST_CASE("parse_formula examples") {
  CHECK(parse_formula("(p1 & ~p2)") == Formula::conj(Formula::prop(1), Formula::neg(Formula::prop(2))));
  CHECK(parse_formula("[v3,2](p1 & T)") ==
        Formula::box(ComponentId::at_layer("v3", 2), Formula::conj(Formula::prop(1), Formula::top())));
  CHECK(parse_formula("[w0.1,in]p1") == Formula::box(ComponentId::input("w0.1"), Formula::prop(1)));
  CHECK_THROWS_AS(parse_formula("p0"), ParseError);
  CHECK_THROWS_AS(parse_formula("p3", 2), ParseError);
  CHECK_THROWS_AS(parse_formula("(p1 & p2"), ParseError);
  CHECK_THROWS_AS(parse_formula("p1 p2"), ParseError);
  CHECK_THROWS_AS(parse_formula("[v,0]T"), ParseError);
}

TEST_CASE("print_formula is canonical") {
  CHECK(print_formula(parse_formula(" (  p1&~ p2 ) ")) == "(p1 & ~p2)");
  CHECK(print_formula(parse_formula("[v3 , in]~T")) == "[v3,in]~T");
  CHECK(print_formula(Formula::big_disj({})) == "~T");
  CHECK(print_formula(Formula::big_conj({})) == "T");
  const Formula f = parse_formula("[a,1][b,in](p2 & ~p1)");
  CHECK(f.modal_depth() == 2);
  CHECK(f.max_prop() == 2);
}

TEST_CASE("property: formulas survive a print/parse round trip") {
  Rng rng(41);
  const std::vector<ComponentId> comps{ComponentId::input("w0"), ComponentId::at_layer("w0.1", 2),
                                       ComponentId::input("a:w0")};
  for (int i = 0; i < 500; ++i) {
    const Formula f = random_formula(rng, 4, comps, rng.between(0, 4));
    const std::string text = print_formula(f);
    REQUIRE(parse_formula(text, 4) == f);
    REQUIRE(print_formula(parse_formula(text)) == text);
  }
}

TEST_CASE("check_satisfaction examples") {
  FibredModel m(1);
  m.add_component(kI);
  m.add_world(kI, WorldId{0}, PropSet(0b1));
  CHECK(check_satisfaction(m, kI, WorldId{0}, Formula::prop(1)));
  CHECK(check_satisfaction(m, kI, WorldId{0}, Formula::top()));
  CHECK_FALSE(check_satisfaction(m, kI, WorldId{0}, Formula::neg(Formula::prop(1))));
  CHECK(check_satisfaction(m, kI, WorldId{0}, Formula::box(kI, Formula::neg(Formula::top()))));
  CHECK_THROWS_AS(check_satisfaction(m, kI, WorldId{9}, Formula::top()), StructureError);
}

TEST_CASE("boxes jump into the named component") {
  const Formula box_p1 = Formula::box(kJ, Formula::prop(1));
  CHECK(check_satisfaction(hand_model(true), kI, WorldId{0}, box_p1));
  CHECK_FALSE(check_satisfaction(hand_model(false), kI, WorldId{0}, box_p1));
  CHECK(check_satisfaction(hand_model(false), kI, WorldId{0}, Formula::box(kJ, Formula::box(kJ, Formula::top()))));
  // w2 has no successors, so every box at w2 holds.
  CHECK(check_satisfaction(hand_model(false), kJ, WorldId{2}, box_p1));
}

TEST_CASE("resolve_jump examples") {
  FibredModel m = hand_model(true);
  CHECK(resolve_jump(m, kI, WorldId{0}, kJ) == WorldId{1});
  CHECK(resolve_jump(m, kJ, WorldId{2}, kJ) == WorldId{2});

  const ComponentId layer = ComponentId::at_layer("r", 1);
  m.add_component(layer);
  m.add_world(layer, WorldId{3});
  m.set_provenance(WorldId{3}, {WorldId{0}});
  CHECK(resolve_jump(m, layer, WorldId{3}, kJ) == WorldId{1});

  const ComponentId sib = ComponentId::input("d");
  m.add_component(sib);
  m.add_world(sib, WorldId{4});
  m.set_tree_parent("d", "r");
  CHECK_THROWS_AS(resolve_jump(m, kJ, WorldId{1}, sib), UnreachableJump);
  CHECK_THROWS_AS(resolve_jump(m, kI, WorldId{0}, sib), UnreachableJump);
  CHECK_THROWS_AS(check_satisfaction(m, kJ, WorldId{1}, Formula::box(sib, Formula::top())), UnreachableJump);
}

TEST_CASE("resolve_jump follows the tie-break among generators") {
  FibredModel m(1);
  const ComponentId layer = ComponentId::at_layer("r", 1);
  m.add_component(kI);
  m.add_component(kJ);
  m.add_component(layer);
  m.add_world(kI, WorldId{0});
  m.add_world(kI, WorldId{1});
  m.add_world(kJ, WorldId{2});
  m.add_world(kJ, WorldId{3});
  m.add_world(layer, WorldId{4});
  m.set_jump(WorldId{0}, kJ, WorldId{2});
  m.set_jump(WorldId{1}, kJ, WorldId{3});
  m.set_provenance(WorldId{4}, {WorldId{0}, WorldId{1}});
  m.set_tree_parent("c", "r");
  CHECK(resolve_jump(m, layer, WorldId{4}, kJ, TieBreak::First) == WorldId{2});
  CHECK(resolve_jump(m, layer, WorldId{4}, kJ, TieBreak::Last) == WorldId{3});
  CHECK(resolve_jump(m, layer, WorldId{4}, kJ, TieBreak::First) == WorldId{2});
}

TEST_CASE("property: double negation and locality of native boxes") {
  InstanceGenConfig cfg;
  cfg.seed = 42;
  for (std::size_t i = 0; i < 15; ++i) {
    FibredCase fc = generate_fibred_case(cfg, i);
    Rng rng(derive_seed(42, 7, i));
    totalize_tables(fc.network, rng, cfg);
    const CompatibleModel c = build_compatible(fc.network, fc.x);
    const auto comps = builder_components(fc.network.architecture);
    for (int k = 0; k < 10; ++k) {
      const ComponentId& at = comps[rng.below(comps.size())];
      const KripkeComponent& comp = c.model.component(at);
      const WorldId w = comp.worlds[rng.below(comp.worlds.size())];
      const Formula body = random_formula(rng, c.model.num_props(), {}, 2);
      const Formula f = Formula::box(at, body);
      const bool before = check_satisfaction(c.model, at, w, f);
      REQUIRE(check_satisfaction(c.model, at, w, Formula::neg(Formula::neg(f))) == before);

      FibredModel perturbed = c.model;
      for (const auto& other : comps) {
        if (other == at) continue;
        KripkeComponent& oc = perturbed.component(other);
        for (const auto& [a, b] : oc.relation()) oc.remove_edge(a, b);
      }
      REQUIRE(check_satisfaction(perturbed, at, w, f) == before);
    }
  }
}
