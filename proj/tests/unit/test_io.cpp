#include <doctest.h>

#include "fibrelab/harness.hpp"
#include "fibrelab/io.hpp"

using namespace fibrelab;
using io::Json;

TEST_CASE("scalar and vector JSON") {
  CHECK(io::to_json(Rational(-3, 6)) == Json("-1/2"));
  CHECK(io::rational_from_json(Json("4/8")) == Rational(1, 2));
  CHECK(io::rational_from_json(Json(3)) == Rational(3));
  CHECK(io::vector_from_json(Json::array({"1/2", 0, -1})) == (RVector{Rational(1, 2), 0, -1}));
  CHECK_THROWS_AS(io::rational_from_json(Json(0.5)), io::FormatError);
  CHECK_THROWS_AS(io::vector_from_json(Json("1,2")), io::FormatError);
  CHECK(io::matrix_from_json(io::to_json(RMatrix::identity(2))) == RMatrix::identity(2));
}

TEST_CASE("component ids parse from text") {
  CHECK(io::component_from_string("w0.1,in") == ComponentId::input("w0.1"));
  CHECK(io::component_from_string("v,3") == ComponentId::at_layer("v", 3));
  CHECK_THROWS(io::component_from_string("v"));
  CHECK_THROWS(io::component_from_string("v,x"));
}

TEST_CASE("activation JSON accepts bare kind names") {
  CHECK(io::activation_from_json(Json("identity"), 3) == ActivationSpec::identity(3));
  CHECK(io::activation_from_json(Json("truncated_relu"), 2) == ActivationSpec::truncated_relu(2));
  CHECK_THROWS_AS(io::activation_from_json(Json("softmax"), 2), io::FormatError);
}

TEST_CASE("property: fibred networks and models round trip") {
  InstanceGenConfig cfg;
  cfg.seed = 81;
  cfg.population = Population::Mixed;
  for (std::size_t i = 0; i < 20; ++i) {
    FibredCase fc = generate_fibred_case(cfg, i);
    Rng rng(derive_seed(cfg.seed, 9, i));
    totalize_tables(fc.network, rng, cfg);
    const Json net = io::to_json(fc.network);
    REQUIRE(io::to_json(io::network_from_json(Json::parse(net.dump()))) == net);

    const CompatibleModel c = build_compatible(fc.network, fc.x);
    const Json model = io::to_json(c.model);
    REQUIRE(io::model_from_json(model) == c.model);
    const CompatibleModel back = io::compatible_from_json(io::to_json(c));
    REQUIRE(back.model == c.model);
    REQUIRE(back.maps == c.maps);
    REQUIRE(back.input == c.input);
  }
}

TEST_CASE("property: graph network cases round trip") {
  InstanceGenConfig cfg;
  cfg.seed = 82;
  for (std::size_t i = 0; i < 30; ++i) {
    const CompileMode mode = static_cast<CompileMode>(i % 3);
    const GraphCase c = generate_graph_case(cfg, i, mode, i % 2 == 0);
    const GraphCase back = graph_case_from_json(Json::parse(to_json(c).dump()));
    REQUIRE(back.mode == c.mode);
    REQUIRE(back.u == c.u);
    REQUIRE(back.instance == c.instance);
    REQUIRE(back.graph.graph == c.graph.graph);
    REQUIRE(back.graph.features == c.graph.features);
    REQUIRE(direct_output(back) == direct_output(c));
    if (mode != CompileMode::Gnn) REQUIRE(io::gat_from_json(io::to_json(c.instance)) == c.instance);
    REQUIRE(io::gnn_from_json(io::to_json(c.instance.gnn)) == c.instance.gnn);
  }
}

TEST_CASE("malformed documents raise FormatError") {
  CHECK_THROWS_AS(io::network_from_json(Json::object()), io::FormatError);
  CHECK_THROWS_AS(io::graph_from_json(Json{{"nodes", 2}, {"edges", Json::array({Json::array({0, 0})})}}),
                  Error);
  CHECK_THROWS_AS(graph_case_from_json(Json{{"mode", "rnn"}}), io::FormatError);
  CHECK_THROWS_AS(io::read_json_file("/nonexistent/file.json"), io::FormatError);
}
