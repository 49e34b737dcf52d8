#include <doctest.h>

#include "fibrelab/feedforward.hpp"
#include "fibrelab/harness.hpp"
#include "oracle.hpp"

using namespace fibrelab;

namespace {

NetworkInstance two_layer() {
  return NetworkInstance(NeuralArchitecture{{1, 1, 1}, {ActivationSpec::truncated_relu(1)}},
                         {DenseLayer{RMatrix::from_rows({{2}}), RVector{0}},
                          DenseLayer{RMatrix::from_rows({{1}}), RVector{-1}}});
}

}  // namespace

TEST_CASE("run_network examples") {
  const NetworkInstance id(NeuralArchitecture{{1, 1}, {}}, {DenseLayer{RMatrix::from_rows({{1}}), RVector{0}}});
  CHECK(run_network(id, RVector{5}) == RVector{5});
  CHECK(run_network(two_layer(), RVector{3}) == RVector{0});
  CHECK_THROWS_AS(run_network(two_layer(), RVector{1, 2}), DimensionError);
}

TEST_CASE("run_span examples") {
  const NetworkInstance n = two_layer();
  CHECK(run_span(n, {1, 1}, RVector{42}) == RVector{42});
  CHECK(run_span(n, {0, 2}, RVector{3}) == run_network(n, RVector{3}));
  CHECK(run_span(n, {1, 2}, RVector{6}) == RVector{0});
  CHECK(run_span(n, {0, 1}, RVector{3}) == RVector{6});
  CHECK_THROWS_AS(run_span(n, {2, 1}, RVector{1}), DimensionError);
  CHECK_THROWS_AS(run_span(n, {0, 3}, RVector{1}), DimensionError);
}

TEST_CASE("classify examples") {
  const auto constant = [](Rational out) {
    return NetworkInstance(NeuralArchitecture{{1, 1}, {}}, {DenseLayer{RMatrix::zero(1, 1), RVector{out}}});
  };
  CHECK(classify(constant(Rational(1, 1000000)), RVector{0}));
  CHECK_FALSE(classify(constant(0), RVector{0}));
  CHECK_FALSE(classify(constant(-2), RVector{0}));
  const NetworkInstance wide(NeuralArchitecture{{1, 2}, {}}, {DenseLayer{RMatrix::zero(2, 1), RVector{1, 1}}});
  CHECK_THROWS_AS(classify(wide, RVector{0}), ShapeError);
}

TEST_CASE("architecture validation") {
  CHECK_THROWS_AS((NeuralArchitecture{{1}, {}}.validate()), DimensionError);
  CHECK_THROWS_AS((NeuralArchitecture{{1, 0}, {}}.validate()), DimensionError);
  CHECK_THROWS_AS((NeuralArchitecture{{1, 2, 1}, {}}.validate()), DimensionError);
  CHECK_THROWS_AS(NetworkInstance(NeuralArchitecture{{1, 1}, {}}, {DenseLayer{RMatrix::zero(2, 1), RVector{0}}}),
                  DimensionError);
}

TEST_CASE("property: run_span composes and matches the oracle") {
  Rng rng(21);
  InstanceGenConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    NeuralArchitecture arch{{rng.between(1, 3)}, {}};
    const std::size_t depth = rng.between(1, 4);
    for (std::size_t l = 1; l <= depth; ++l) {
      arch.dims.push_back(rng.between(1, 3));
      if (l < depth) {
        arch.activations.push_back(rng.coin() ? ActivationSpec::truncated_relu(arch.dims.back())
                                              : ActivationSpec::identity(arch.dims.back()));
      }
    }
    const NetworkInstance net = random_instance(rng, cfg, arch);
    const RVector x = random_bits(rng, arch.input_dim());

    oracle::Vec v = oracle::of(x);
    for (std::size_t l = 1; l <= depth; ++l) {
      v = oracle::affine(oracle::of(net.layer(l).weights), v, oracle::of(net.layer(l).bias));
      if (l < depth && !arch.activation(l).is_identity()) v = oracle::clip(v);
    }
    REQUIRE(oracle::same(run_network(net, x), v));

    const std::size_t a = rng.between(0, depth), b = rng.between(a, depth);
    const RVector mid = run_span(net, {0, a}, x);
    REQUIRE(run_span(net, {a, depth}, mid) == run_network(net, x));
    REQUIRE(run_span(net, {b, depth}, run_span(net, {a, b}, mid)) == run_network(net, x));
  }
}
