#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fibrelab/compatible.hpp"
#include "fibrelab/gat_compiler.hpp"
#include "fibrelab/io.hpp"

namespace fibrelab {

/// Which fibred networks to draw: the restricted root class, general roots, or both alternately.
enum class Population { ClassF, General, Mixed };

struct InstanceGenConfig {
  std::uint64_t seed = 1;
  std::size_t max_layers = 3;
  std::size_t max_dim = 3;
  std::size_t max_vertices = 5;
  std::size_t max_props = 4;
  std::size_t max_tree_depth = 2;
  std::size_t max_children = 2;
  std::size_t max_tokens = 4;
  std::size_t max_feature_bits = 8;  // |V| * d0 bound for exhaustive feature enumeration
  long coeff_min = -2;
  long coeff_max = 2;
  std::vector<long> denominators{1, 2};
  Population population = Population::ClassF;

  /// Throws Error when a bound is out of range (n <= 16, |V| <= 8, ...).
  void validate() const;
};

io::Json to_json(const InstanceGenConfig& cfg);
/// Missing fields keep their defaults.
InstanceGenConfig config_from_json(const io::Json& j);

/// Deterministic random source; bounded draws avoid implementation-defined distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, n); n must be positive.
  std::size_t below(std::size_t n);
  /// Uniform in [lo, hi].
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }
  bool coin() { return (next() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

/// Independent seed for case `index` of stream `stream`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

Rational random_coefficient(Rng& rng, const InstanceGenConfig& cfg);
RVector random_bits(Rng& rng, std::size_t dim);
NetworkInstance random_instance(Rng& rng, const InstanceGenConfig& cfg, const NeuralArchitecture& arch);
Formula random_formula(Rng& rng, std::size_t num_props, const std::vector<ComponentId>& components, std::size_t depth);

struct FibredCase {
  FibredNetwork network;
  RVector x;
  bool class_f = false;
};

/// A random fibred network (tree depth <= max_tree_depth) whose tables are total on the root cube.
FibredCase generate_fibred_case(const InstanceGenConfig& cfg, std::size_t index);

/// Adds random table entries until `build_compatible` succeeds for every root cube point.
void totalize_tables(FibredNetwork& net, Rng& rng, const InstanceGenConfig& cfg);

struct GraphCase {
  CompileMode mode = CompileMode::Gnn;
  GatInstance instance;  // attention is empty in GNN mode
  FeaturedGraph graph;   // in transformer mode, the encoded complete graph
  Vertex u = 0;
  TokenSequence sequence;  // transformer mode only
};

/// Random graph network case; `scalar_output` forces d_L = 1 and `feature_budget` caps |V| * d0.
GraphCase generate_graph_case(const InstanceGenConfig& cfg, std::size_t index, CompileMode mode, bool scalar_output,
                              std::optional<std::size_t> feature_budget = std::nullopt);

/// {"mode", "u", "instance", and "graph" or "sequence"}.
io::Json to_json(const GraphCase& c);
GraphCase graph_case_from_json(const io::Json& j);

/// Direct forward value h^L at the case's vertex or token.
RVector direct_output(const GraphCase& c);
CompiledFibring compile_case(const GraphCase& c);
bool direct_classification(const GraphCase& c);

struct Failure {
  std::size_t case_index = 0;
  io::Json input;
  std::string expected;
  std::string got;
  io::Json repro;
  std::string repro_path;
  std::string note;
};

struct VerificationReport {
  std::string theorem;
  std::uint64_t seed = 0;
  std::size_t cases = 0;
  std::size_t checks = 0;
  std::size_t total_failures = 0;
  std::vector<Failure> failures;  // detailed records, capped
  io::Json diagnostics = io::Json::object();
  double wall_seconds = 0;  // not serialized, so reports stay byte-identical across runs

  bool passed() const { return total_failures == 0; }
};

io::Json to_json(const VerificationReport& report);

/// Largest number of detailed failure records kept per report.
inline constexpr std::size_t kMaxFailureRecords = 20;

struct Theorem2Options {
  CompileMode mode = CompileMode::Gnn;
  std::size_t samples = 1;  // feature assignments per case
  /// Applied to each compiled network before evaluation (mutation testing).
  std::function<void(FibredNetwork&)> mutate;
};

VerificationReport verify_theorem2(const InstanceGenConfig& cfg, std::size_t cases, const Theorem2Options& options = {});
VerificationReport verify_prop1(const InstanceGenConfig& cfg, std::size_t cases, std::size_t formulas_per_case = 20);
VerificationReport verify_theorem1(const InstanceGenConfig& cfg, std::size_t cases);

struct Theorem3Options {
  CompileMode mode = CompileMode::Gnn;  // Gnn, Gat or Transformer
};

VerificationReport verify_theorem3(const InstanceGenConfig& cfg, std::size_t cases, const Theorem3Options& options = {});

/// Outcome of checking the extracted formula on one fibred network input.
struct Theorem1Check {
  bool classified = false;
  bool satisfied_first = false;
  bool satisfied_last = false;
  bool unfibred = false;  // root network alone, without fibring
  std::optional<std::string> error;

  bool mismatch() const { return error.has_value() || satisfied_first != classified; }
  bool divergent() const { return !error && satisfied_first != satisfied_last; }
};

Theorem1Check check_theorem1_point(const FibredNetwork& net, const RVector& x);

/// Greedily shrinks a mismatching (net, x): drops subtrees, clears input bits, zeroes root weights.
std::pair<FibredNetwork, RVector> shrink_theorem1(FibredNetwork net, RVector x, Rng& rng, const InstanceGenConfig& cfg);

/// Re-runs a repro document emitted by a report; returns true when the counterexample still reproduces.
bool replay_repro(const io::Json& repro, std::string& detail);

}  // namespace fibrelab
