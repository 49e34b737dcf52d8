#include "fibrelab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace fibrelab {

void InstanceGenConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error("invalid generator bounds: " + what);
  };
  require(max_props >= 1 && max_props <= 16, "max_props must lie in 1..16");
  require(max_vertices >= 1 && max_vertices <= 8, "max_vertices must lie in 1..8");
  require(max_layers >= 1 && max_layers <= 6, "max_layers must lie in 1..6");
  require(max_dim >= 1 && max_dim <= 8, "max_dim must lie in 1..8");
  require(max_tree_depth <= 4, "max_tree_depth must be at most 4");
  require(max_children <= 4, "max_children must be at most 4");
  require(max_tokens >= 1 && max_tokens <= 8, "max_tokens must lie in 1..8");
  require(max_feature_bits >= 1 && max_feature_bits <= 16, "max_feature_bits must lie in 1..16");
  require(coeff_min <= coeff_max, "coeff_min exceeds coeff_max");
  require(!denominators.empty(), "denominators must be non-empty");
  for (auto d : denominators) require(d > 0, "denominators must be positive");
}

namespace {

std::string population_name(Population p) {
  switch (p) {
    case Population::ClassF: return "class_f";
    case Population::General: return "general";
    case Population::Mixed: return "mixed";
  }
  return "class_f";
}

}  // namespace

io::Json to_json(const InstanceGenConfig& cfg) {
  return io::Json{{"seed", cfg.seed},
                  {"max_layers", cfg.max_layers},
                  {"max_dim", cfg.max_dim},
                  {"max_vertices", cfg.max_vertices},
                  {"max_props", cfg.max_props},
                  {"max_tree_depth", cfg.max_tree_depth},
                  {"max_children", cfg.max_children},
                  {"max_tokens", cfg.max_tokens},
                  {"max_feature_bits", cfg.max_feature_bits},
                  {"coeff_min", cfg.coeff_min},
                  {"coeff_max", cfg.coeff_max},
                  {"denominators", cfg.denominators},
                  {"population", population_name(cfg.population)}};
}

InstanceGenConfig config_from_json(const io::Json& j) {
  InstanceGenConfig cfg;
  if (!j.is_object()) throw io::FormatError("generator config must be a JSON object");
  try {
    auto read = [&j](const char* key, auto& slot) {
      if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
    };
    read("seed", cfg.seed);
    read("max_layers", cfg.max_layers);
    read("max_dim", cfg.max_dim);
    read("max_vertices", cfg.max_vertices);
    read("max_props", cfg.max_props);
    read("max_tree_depth", cfg.max_tree_depth);
    read("max_children", cfg.max_children);
    read("max_tokens", cfg.max_tokens);
    read("max_feature_bits", cfg.max_feature_bits);
    read("coeff_min", cfg.coeff_min);
    read("coeff_max", cfg.coeff_max);
    read("denominators", cfg.denominators);
    if (j.contains("population")) {
      const std::string p = j.at("population").get<std::string>();
      if (p == "class_f") {
        cfg.population = Population::ClassF;
      } else if (p == "general") {
        cfg.population = Population::General;
      } else if (p == "mixed") {
        cfg.population = Population::Mixed;
      } else {
        throw io::FormatError("population must be class_f, general or mixed");
      }
    }
  } catch (const io::Json::exception& err) {
    throw io::FormatError(std::string("generator config: ") + err.what());
  }
  cfg.validate();
  return cfg;
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw Error("Rng::below needs a positive bound");
  const std::uint64_t bound = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = next();
  } while (v >= limit);
  return static_cast<std::size_t>(v % bound);
}

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix(splitmix(seed) ^ splitmix(stream * 0x100000001B3ULL + index));
}

Rational random_coefficient(Rng& rng, const InstanceGenConfig& cfg) {
  const long span = cfg.coeff_max - cfg.coeff_min;
  const long num = cfg.coeff_min + static_cast<long>(rng.below(static_cast<std::size_t>(span) + 1));
  const long den = cfg.denominators[rng.below(cfg.denominators.size())];
  return Rational(num, den);
}

RVector random_bits(Rng& rng, std::size_t dim) {
  RVector v(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    if (rng.coin()) v[i] = Rational(1);
  }
  return v;
}

namespace {

RMatrix random_matrix(Rng& rng, const InstanceGenConfig& cfg, std::size_t rows, std::size_t cols) {
  RMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m.at(r, c) = random_coefficient(rng, cfg);
  }
  return m;
}

RVector random_vector(Rng& rng, const InstanceGenConfig& cfg, std::size_t dim) {
  RVector v(dim);
  for (std::size_t i = 0; i < dim; ++i) v[i] = random_coefficient(rng, cfg);
  return v;
}

ActivationSpec random_activation(Rng& rng, std::size_t dim) {
  return rng.coin() ? ActivationSpec::truncated_relu(dim) : ActivationSpec::identity(dim);
}

}  // namespace

NetworkInstance random_instance(Rng& rng, const InstanceGenConfig& cfg, const NeuralArchitecture& arch) {
  std::vector<DenseLayer> layers;
  for (std::size_t l = 1; l <= arch.depth(); ++l) {
    layers.push_back(DenseLayer{random_matrix(rng, cfg, arch.dims[l], arch.dims[l - 1]),
                                random_vector(rng, cfg, arch.dims[l])});
  }
  return NetworkInstance(arch, std::move(layers));
}

Formula random_formula(Rng& rng, std::size_t num_props, const std::vector<ComponentId>& components,
                       std::size_t depth) {
  if (depth == 0 || rng.below(4) == 0) {
    if (num_props == 0 || rng.below(6) == 0) return Formula::top();
    return Formula::prop(rng.between(1, num_props));
  }
  const std::size_t choice = rng.below(components.empty() ? 2 : 3);
  if (choice == 0) {
    Formula a = random_formula(rng, num_props, components, depth - 1);
    return Formula::conj(std::move(a), random_formula(rng, num_props, components, depth - 1));
  }
  if (choice == 1) return Formula::neg(random_formula(rng, num_props, components, depth - 1));
  const ComponentId& c = components[rng.below(components.size())];
  return Formula::box(c, random_formula(rng, num_props, components, depth - 1));
}

namespace {

struct TreeGrower {
  Rng& rng;
  const InstanceGenConfig& cfg;
  bool class_f;
  std::map<NodeId, NeuralArchitecture> archs;
  std::vector<FibringEdge> edges;
  std::map<EdgeKey, FibringRule> rules;

  NeuralArchitecture child_arch(std::size_t in, std::size_t out) {
    const std::size_t depth = rng.between(1, 2);
    NeuralArchitecture a{{in}, {}};
    for (std::size_t l = 1; l < depth; ++l) {
      const std::size_t d = rng.between(1, cfg.max_dim);
      a.dims.push_back(d);
      a.activations.push_back(random_activation(rng, d));
    }
    a.dims.push_back(out);
    return a;
  }

  void grow(const NodeId& node, std::size_t depth) {
    if (depth >= cfg.max_tree_depth) return;
    const NeuralArchitecture& arch = archs.at(node);
    const std::size_t count = rng.between(depth == 0 ? 1 : 0, cfg.max_children);
    const std::size_t fixed_layer = rng.between(1, arch.depth());
    std::map<std::size_t, std::vector<std::size_t>> free;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t layer = class_f && depth == 0 ? fixed_layer : rng.between(1, arch.depth());
      if (!free.count(layer)) {
        std::vector<std::size_t> slots(arch.dims[layer]);
        for (std::size_t s = 0; s < slots.size(); ++s) slots[s] = s;
        for (std::size_t s = slots.size(); s > 1; --s) std::swap(slots[s - 1], slots[rng.below(s)]);
        free.emplace(layer, std::move(slots));
      }
      auto& avail = free.at(layer);
      if (avail.empty()) continue;
      const std::size_t size = rng.between(1, std::min<std::size_t>(avail.size(), 2));
      std::vector<std::size_t> positions(avail.end() - static_cast<std::ptrdiff_t>(size), avail.end());
      avail.resize(avail.size() - size);
      std::sort(positions.begin(), positions.end());

      const NodeId child = node + "." + std::to_string(i);
      const std::size_t kind = rng.below(3);
      const std::size_t in = kind == 2 ? arch.dims[layer] : rng.between(1, 3);
      NeuralArchitecture a = child_arch(in, size);
      archs.emplace(child, a);
      edges.push_back({node, child, EdgeLabel{layer, positions}});
      if (kind == 0) {
        rules.emplace(EdgeKey{node, child}, TableRule{});
      } else if (kind == 1) {
        NetworkInstance inst = random_instance(rng, cfg, a);
        rules.emplace(EdgeKey{node, child}, ConstantRule{std::move(inst), random_bits(rng, in)});
      } else {
        rules.emplace(EdgeKey{node, child}, SelfFibreRule{random_instance(rng, cfg, a)});
      }
      grow(child, depth + 1);
    }
  }
};

}  // namespace

FibredCase generate_fibred_case(const InstanceGenConfig& cfg, std::size_t index) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, 1, index));
  const bool class_f =
      cfg.population == Population::ClassF || (cfg.population == Population::Mixed && index % 2 == 0);
  const std::size_t n = rng.between(1, cfg.max_props);
  NeuralArchitecture root_arch{{n}, {}};
  if (class_f) {
    const std::size_t d1 = rng.between(1, cfg.max_dim);
    root_arch.dims.push_back(d1);
    root_arch.activations.push_back(ActivationSpec::identity(d1));
  } else {
    const std::size_t depth = rng.between(2, std::max<std::size_t>(2, cfg.max_layers));
    for (std::size_t l = 1; l < depth; ++l) {
      const std::size_t d = rng.between(1, cfg.max_dim);
      root_arch.dims.push_back(d);
      root_arch.activations.push_back(random_activation(rng, d));
    }
  }
  root_arch.dims.push_back(1);

  TreeGrower grower{rng, cfg, class_f, {}, {}, {}};
  grower.archs.emplace("u", root_arch);
  NetworkInstance root = random_instance(rng, cfg, root_arch);
  grower.grow("u", 0);
  FibredCase out{FibredNetwork{root, FibringArchitecture("u", grower.archs, grower.edges), grower.rules},
                 random_bits(rng, n), class_f};
  totalize_tables(out.network, rng, cfg);
  return out;
}

void totalize_tables(FibredNetwork& net, Rng& rng, const InstanceGenConfig& cfg) {
  const RVector offset = RVector::zeros(net.root_instance.input_dim());
  for (const auto& x : input_cube(offset)) {
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt > 100000) throw Error("table totalization did not converge");
      try {
        build_compatible(net, x);
        break;
      } catch (const RuleDomainError& err) {
        auto it = net.rules.find(err.edge());
        if (it == net.rules.end() || !std::holds_alternative<TableRule>(it->second)) throw;
        const NeuralArchitecture& child = net.architecture.arch(err.edge().second);
        std::get<TableRule>(it->second)
            .insert(err.vector(), random_instance(rng, cfg, child), random_bits(rng, child.input_dim()));
      }
    }
  }
}

GraphCase generate_graph_case(const InstanceGenConfig& cfg, std::size_t index, CompileMode mode, bool scalar_output,
                              std::optional<std::size_t> feature_budget) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, 2 + static_cast<std::uint64_t>(mode), index));
  const std::size_t budget = feature_budget.value_or(std::numeric_limits<std::size_t>::max());
  const std::size_t max_count = mode == CompileMode::Transformer ? cfg.max_tokens : cfg.max_vertices;
  const std::size_t count = rng.between(1, std::max<std::size_t>(1, std::min(max_count, budget)));
  const std::size_t d0 = rng.between(1, std::max<std::size_t>(1, std::min(cfg.max_dim, budget / count)));
  const std::size_t L = rng.between(1, cfg.max_layers);

  GraphCase c;
  c.mode = mode;
  c.instance.gnn.dims.push_back(d0);
  for (std::size_t l = 1; l <= L; ++l) {
    c.instance.gnn.dims.push_back(l == L && scalar_output ? 1 : rng.between(1, cfg.max_dim));
  }
  for (std::size_t l = 1; l <= L; ++l) {
    const std::size_t rows = c.instance.gnn.dims[l], cols = c.instance.gnn.dims[l - 1];
    c.instance.gnn.layers.push_back(GnnLayer{random_matrix(rng, cfg, rows, cols), random_matrix(rng, cfg, rows, cols),
                                             random_vector(rng, cfg, rows)});
    if (mode != CompileMode::Gnn) c.instance.attention.push_back(random_vector(rng, cfg, 2 * rows));
  }

  if (mode == CompileMode::Transformer) {
    const std::size_t vocab = rng.between(1, count);
    for (std::size_t v = 0; v < vocab; ++v) {
      c.sequence.vec_table.emplace(std::string(1, static_cast<char>('a' + v)), random_bits(rng, d0));
    }
    for (std::size_t t = 0; t < count; ++t) {
      c.sequence.tokens.push_back(std::string(1, static_cast<char>('a' + rng.below(vocab))));
    }
    c.graph = c.sequence.encode();
  } else {
    std::vector<std::pair<Vertex, Vertex>> edges;
    for (Vertex a = 0; a < count; ++a) {
      for (Vertex b = a + 1; b < count; ++b) {
        if (rng.coin()) edges.emplace_back(a, b);
      }
    }
    c.graph.graph = Graph(count, edges);
    for (std::size_t v = 0; v < count; ++v) c.graph.features.push_back(random_bits(rng, d0));
  }
  c.u = rng.below(count);
  return c;
}

RVector direct_output(const GraphCase& c) {
  switch (c.mode) {
    case CompileMode::Gnn: return gnn_forward(c.instance.gnn, c.graph).final_h(c.u);
    case CompileMode::Gat: return gat_forward(c.instance, c.graph).final_h(c.u);
    case CompileMode::Transformer: return transformer_forward(c.instance, c.sequence).final_h(c.u);
  }
  return {};
}

CompiledFibring compile_case(const GraphCase& c) {
  switch (c.mode) {
    case CompileMode::Gnn: return compile(c.instance.gnn, c.graph.graph, c.u);
    case CompileMode::Gat: return compile(c.instance, c.graph.graph, c.u);
    case CompileMode::Transformer:
      return compile_transformer(c.instance, c.sequence.length(), c.u,
                                 c.sequence.position(c.u, c.instance.gnn.dims.front()));
  }
  throw Error("unknown compile mode");
}

bool direct_classification(const GraphCase& c) {
  switch (c.mode) {
    case CompileMode::Gnn: return classify_node(c.instance.gnn, c.graph, c.u);
    case CompileMode::Gat: return classify_node(c.instance, c.graph, c.u);
    case CompileMode::Transformer: return classify_token(c.instance, c.sequence, c.u);
  }
  return false;
}

io::Json to_json(const GraphCase& c) {
  io::Json j{{"mode", mode_name(c.mode)}, {"u", c.u}};
  if (c.mode == CompileMode::Gnn) {
    j["instance"] = io::to_json(c.instance.gnn);
  } else {
    j["instance"] = io::to_json(c.instance);
  }
  if (c.mode == CompileMode::Transformer) {
    j["sequence"] = io::to_json(c.sequence);
  } else {
    j["graph"] = io::to_json(c.graph);
  }
  return j;
}

GraphCase graph_case_from_json(const io::Json& j) {
  if (!j.is_object()) throw io::FormatError("graph case must be a JSON object");
  GraphCase c;
  try {
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "gnn") {
      c.mode = CompileMode::Gnn;
    } else if (mode == "gat") {
      c.mode = CompileMode::Gat;
    } else if (mode == "transformer") {
      c.mode = CompileMode::Transformer;
    } else {
      throw io::FormatError("mode must be gnn, gat or transformer");
    }
    c.u = j.at("u").get<std::size_t>();
  } catch (const io::Json::exception& err) {
    throw io::FormatError(std::string("graph case: ") + err.what());
  }
  if (c.mode == CompileMode::Gnn) {
    c.instance.gnn = io::gnn_from_json(j.at("instance"));
  } else {
    c.instance = io::gat_from_json(j.at("instance"));
  }
  if (c.mode == CompileMode::Transformer) {
    c.sequence = io::sequence_from_json(j.at("sequence"));
    c.graph = c.sequence.encode();
  } else {
    c.graph = io::graph_from_json(j.at("graph"));
  }
  return c;
}

namespace {

// Per-case outcome gathered by workers and merged in case order.
struct CaseResult {
  std::size_t checks = 0;
  std::size_t failures = 0;
  std::vector<Failure> records;
  io::Json diagnostics = io::Json::object();
};

template <class F>
std::vector<CaseResult> run_cases(std::size_t cases, F body) {
  std::vector<CaseResult> results(cases);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cases; i = next++) {
      try {
        body(i, results[i]);
      } catch (const std::exception& err) {
        ++results[i].failures;
        Failure f;
        f.case_index = i;
        f.note = std::string("case raised: ") + err.what();
        results[i].records.push_back(std::move(f));
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), cases));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return results;
}

VerificationReport merge(std::string theorem, const InstanceGenConfig& cfg, std::vector<CaseResult> results,
                         std::chrono::steady_clock::time_point start) {
  VerificationReport report;
  report.theorem = std::move(theorem);
  report.seed = cfg.seed;
  report.cases = results.size();
  for (auto& r : results) {
    report.checks += r.checks;
    report.total_failures += r.failures;
    for (auto& f : r.records) {
      if (report.failures.size() < kMaxFailureRecords) report.failures.push_back(std::move(f));
    }
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

}  // namespace

io::Json to_json(const VerificationReport& report) {
  io::Json failures = io::Json::array();
  for (const auto& f : report.failures) {
    io::Json e{{"case", f.case_index}, {"expected", f.expected}, {"got", f.got}};
    if (!f.input.is_null()) e["input"] = f.input;
    if (!f.repro.is_null()) e["repro"] = f.repro;
    if (!f.repro_path.empty()) e["repro_path"] = f.repro_path;
    if (!f.note.empty()) e["note"] = f.note;
    failures.push_back(std::move(e));
  }
  return io::Json{{"theorem", report.theorem},
                  {"seed", report.seed},
                  {"cases", report.cases},
                  {"checks", report.checks},
                  {"passed", report.passed()},
                  {"total_failures", report.total_failures},
                  {"failures", std::move(failures)},
                  {"diagnostics", report.diagnostics}};
}

VerificationReport verify_theorem2(const InstanceGenConfig& cfg, std::size_t cases, const Theorem2Options& options) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  auto results = run_cases(cases, [&](std::size_t i, CaseResult& out) {
    GraphCase c = generate_graph_case(cfg, i, options.mode, false);
    const CompiledFibring compiled = compile_case(c);
    Rng rng(derive_seed(cfg.seed, 20 + static_cast<std::uint64_t>(options.mode), i));
    for (std::size_t s = 0; s < std::max<std::size_t>(1, options.samples); ++s) {
      if (s > 0) {
        const std::size_t d0 = c.instance.gnn.dims.front();
        if (c.mode == CompileMode::Transformer) {
          for (auto& [_, v] : c.sequence.vec_table) v = random_bits(rng, d0);
          c.graph = c.sequence.encode();
        } else {
          for (auto& f : c.graph.features) f = random_bits(rng, d0);
        }
      }
      const RVector expected = direct_output(c);
      FibredNetwork net = compiled.network(c.graph.features);
      if (options.mutate) options.mutate(net);
      const RVector got = evaluate_fibred(net, c.graph.features[c.u]).first;
      ++out.checks;
      if (!(got == expected)) {
        ++out.failures;
        Failure f;
        f.case_index = i;
        f.input = to_json(c);
        f.expected = expected.key();
        f.got = got.key();
        f.repro = io::Json{{"kind", "thm2"}, {"case", to_json(c)}};
        out.records.push_back(std::move(f));
      }
    }
  });
  VerificationReport report = merge("thm2-" + mode_name(options.mode), cfg, std::move(results), start);
  report.diagnostics["samples_per_case"] = std::max<std::size_t>(1, options.samples);
  return report;
}

namespace {

struct Outcome {
  std::optional<bool> value;
  bool operator==(const Outcome&) const = default;
  std::string str() const { return value ? bool_str(*value) : "unreachable"; }
};

Outcome satisfaction(const FibredModel& m, const ComponentId& c, WorldId w, const Formula& f) {
  try {
    return Outcome{check_satisfaction(m, c, w, f)};
  } catch (const UnreachableJump&) {
    return Outcome{std::nullopt};
  }
}

}  // namespace

VerificationReport verify_prop1(const InstanceGenConfig& cfg, std::size_t cases, std::size_t formulas_per_case) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  auto results = run_cases(cases, [&](std::size_t i, CaseResult& out) {
    const FibredCase fc = generate_fibred_case(cfg, i);
    const CompatibleModel cm = build_compatible(fc.network, fc.x);
    const CompatibilityReport report = check_compatibility(cm, fc.network, fc.x);
    ++out.checks;
    auto fail = [&](std::string expected, std::string got, std::string note) {
      ++out.failures;
      Failure f;
      f.case_index = i;
      f.input = io::Json{{"network", io::to_json(fc.network)}, {"x", io::to_json(fc.x)}};
      f.expected = std::move(expected);
      f.got = std::move(got);
      f.note = std::move(note);
      f.repro = io::Json{{"kind", "prop1"}, {"network", io::to_json(fc.network)}, {"x", io::to_json(fc.x)}};
      out.records.push_back(std::move(f));
    };
    out.diagnostics["compatible"] = report.passed();
    std::size_t closure_failures = 0;
    if (!report.passed()) {
      const auto first = report.failed().front();
      fail("compatible", std::to_string(report.failures()) + " violations",
           first.condition + " at " + first.scope + ": " + first.witness);
    }

    Rng rng(derive_seed(cfg.seed, 30, i));
    std::vector<ComponentId> comps;
    for (const auto& [id, comp] : cm.model.components()) {
      if (!comp.worlds.empty()) comps.push_back(id);
    }
    const ComponentId target = comps[rng.below(comps.size())];
    const auto& worlds = cm.model.component(target).worlds;
    std::vector<WorldId> fresh;
    for (std::uint32_t k = 0; k < worlds.size(); ++k) fresh.push_back(WorldId{cm.model.next_free_world().value + k});
    for (std::size_t s = fresh.size(); s > 1; --s) std::swap(fresh[s - 1], fresh[rng.below(s)]);
    std::map<WorldId, WorldId> relabel;
    for (std::size_t k = 0; k < worlds.size(); ++k) relabel.emplace(worlds[k], fresh[k]);
    const CompatibleModel moved = transport_iso(cm, target, relabel);
    const CompatibilityReport moved_report = check_compatibility(moved, fc.network, fc.x);
    ++out.checks;
    if (moved_report.passed() != report.passed()) {
      ++closure_failures;
      fail(bool_str(report.passed()), bool_str(moved_report.passed()), "compatibility verdict changed under relabeling");
    }

    std::size_t preserved = 0;
    for (std::size_t k = 0; k < formulas_per_case; ++k) {
      const Formula f = random_formula(rng, cm.model.num_props(), comps, 3);
      const ComponentId& at = comps[rng.below(comps.size())];
      const auto& ws = cm.model.component(at).worlds;
      const WorldId w = ws[rng.below(ws.size())];
      const WorldId w2 = at == target ? relabel.at(w) : w;
      const Outcome before = satisfaction(cm.model, at, w, f);
      const Outcome after = satisfaction(moved.model, at, w2, f);
      ++out.checks;
      if (before == after) {
        ++preserved;
      } else {
        ++closure_failures;
        fail(before.str(), after.str(), "truth of " + print_formula(f) + " at [" + at.str() + "] changed");
      }
    }
    out.diagnostics["preserved"] = preserved;
    out.diagnostics["closure_failures"] = closure_failures;

    BuildOptions literal;
    literal.policy = ValuationPolicy::ExistentialUnion;
    const CompatibilityReport literal_report =
        check_compatibility(build_compatible(fc.network, fc.x, literal), fc.network, fc.x);
    out.diagnostics["existential_union_violations"] = literal_report.failures();
    out.diagnostics["off_anchor_disagreements"] = report.off_anchor_valuation_disagreements;
  });
  std::size_t literal_cases = 0, literal_total = 0, off_anchor = 0, incompatible = 0, not_closed = 0;
  for (const auto& r : results) {
    incompatible += r.diagnostics.value("compatible", false) ? 0 : 1;
    not_closed += r.diagnostics.value("closure_failures", std::size_t{0}) > 0 ? 1 : 0;
    const std::size_t v = r.diagnostics.value("existential_union_violations", std::size_t{0});
    literal_total += v;
    literal_cases += v > 0 ? 1 : 0;
    off_anchor += r.diagnostics.value("off_anchor_disagreements", std::size_t{0});
  }
  VerificationReport report = merge("prop1", cfg, std::move(results), start);
  report.diagnostics["cases_failing_compatibility"] = incompatible;
  report.diagnostics["cases_failing_closure"] = not_closed;
  report.diagnostics["existential_union_cases_with_c2_violations"] = literal_cases;
  report.diagnostics["existential_union_c2_violations"] = literal_total;
  report.diagnostics["off_anchor_valuation_disagreements"] = off_anchor;
  report.diagnostics["formulas_per_case"] = formulas_per_case;
  return report;
}

Theorem1Check check_theorem1_point(const FibredNetwork& net, const RVector& x) {
  Theorem1Check out;
  try {
    const std::size_t n = net.root_instance.input_dim();
    const Formula phi = characteristic_formula(CharacteristicPredicate{net.root_instance, n, std::nullopt, std::nullopt});
    const Formula psi = psi_formula(phi, net.architecture);
    const CompatibleModel cm = build_compatible(net, x);
    const ComponentId root_in = ComponentId::input(net.architecture.root());
    const WorldId w = cm.root_world(x);
    out.classified = classify_fibred(net, x);
    out.satisfied_first = check_satisfaction(cm.model, root_in, w, psi, TieBreak::First);
    out.satisfied_last = check_satisfaction(cm.model, root_in, w, psi, TieBreak::Last);
    out.unfibred = classify(net.root_instance, x);
  } catch (const Error& err) {
    out.error = err.what();
  }
  return out;
}

namespace {

FibredNetwork drop_subtree(const FibredNetwork& net, const NodeId& node) {
  FibredNetwork out{net.root_instance, net.architecture.without_subtree(node), {}};
  for (const auto& e : out.architecture.edges()) out.rules.emplace(EdgeKey{e.parent, e.child}, net.rules.at({e.parent, e.child}));
  return out;
}

NetworkInstance with_entry(const NetworkInstance& inst, std::size_t layer, std::optional<std::pair<std::size_t, std::size_t>> cell,
                           std::size_t bias_index) {
  std::vector<DenseLayer> layers = inst.layers();
  DenseLayer& d = layers.at(layer - 1);
  if (cell) {
    d.weights.at(cell->first, cell->second) = Rational(0);
  } else {
    d.bias[bias_index] = Rational(0);
  }
  return NetworkInstance(inst.architecture(), std::move(layers));
}

}  // namespace

std::pair<FibredNetwork, RVector> shrink_theorem1(FibredNetwork net, RVector x, Rng& rng, const InstanceGenConfig& cfg) {
  auto failing = [](const FibredNetwork& n, const RVector& v) {
    const Theorem1Check c = check_theorem1_point(n, v);
    return !c.error && c.mismatch();
  };
  for (bool changed = true; changed;) {
    changed = false;
    std::vector<NodeId> order = net.architecture.bfs_order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if (*it == net.architecture.root() || !net.architecture.contains(*it)) continue;
      FibredNetwork candidate = drop_subtree(net, *it);
      try {
        totalize_tables(candidate, rng, cfg);
      } catch (const Error&) {
        continue;
      }
      if (failing(candidate, x)) {
        net = std::move(candidate);
        changed = true;
      }
    }
    for (std::size_t i = 0; i < x.dim(); ++i) {
      if (x[i].is_zero()) continue;
      RVector candidate = x;
      candidate[i] = Rational(0);
      if (failing(net, candidate)) {
        x = std::move(candidate);
        changed = true;
      }
    }
    for (std::size_t l = 1; l <= net.root_instance.depth(); ++l) {
      const std::size_t rows = net.root_instance.layer(l).weights.rows();
      const std::size_t cols = net.root_instance.layer(l).weights.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c <= cols; ++c) {
          const bool is_bias = c == cols;
          if (is_bias ? net.root_instance.layer(l).bias[r].is_zero() : net.root_instance.layer(l).weights.at(r, c).is_zero()) {
            continue;
          }
          FibredNetwork candidate = net;
          candidate.root_instance =
              is_bias ? with_entry(net.root_instance, l, std::nullopt, r) : with_entry(net.root_instance, l, std::make_pair(r, c), 0);
          try {
            totalize_tables(candidate, rng, cfg);
          } catch (const Error&) {
            continue;
          }
          if (failing(candidate, x)) {
            net = std::move(candidate);
            changed = true;
          }
        }
      }
    }
  }
  return {std::move(net), std::move(x)};
}

VerificationReport verify_theorem1(const InstanceGenConfig& cfg, std::size_t cases) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  auto results = run_cases(cases, [&](std::size_t i, CaseResult& out) {
    const FibredCase fc = generate_fibred_case(cfg, i);
    const RVector zeros = RVector::zeros(fc.network.root_instance.input_dim());
    std::size_t mismatches = 0, divergences = 0, root_alone = 0;
    std::optional<RVector> first_bad;
    for (const auto& x : input_cube(zeros)) {
      const Theorem1Check c = check_theorem1_point(fc.network, x);
      ++out.checks;
      if (c.divergent()) ++divergences;
      if (!c.error && c.satisfied_first == c.unfibred) ++root_alone;
      if (c.mismatch()) {
        ++mismatches;
        if (!first_bad) first_bad = x;
      }
    }
    out.failures = mismatches;
    out.diagnostics = io::Json{{"class_f", fc.class_f}, {"points", out.checks}, {"mismatches", mismatches},
                               {"tie_break_divergences", divergences},
                               {"formula_agrees_with_unfibred_root", root_alone}};
    if (first_bad) {
      Rng rng(derive_seed(cfg.seed, 40, i));
      auto [small_net, small_x] = shrink_theorem1(fc.network, *first_bad, rng, cfg);
      const Theorem1Check original = check_theorem1_point(fc.network, *first_bad);
      const Theorem1Check shrunk = check_theorem1_point(small_net, small_x);
      Failure f;
      f.case_index = i;
      f.input = io::Json{{"network", io::to_json(fc.network)}, {"x", io::to_json(*first_bad)}};
      f.expected = bool_str(original.classified);
      f.got = original.error ? "error" : bool_str(original.satisfied_first);
      if (original.error) f.note = *original.error;
      const Formula psi = psi_formula(
          characteristic_formula(CharacteristicPredicate{small_net.root_instance, small_net.root_instance.input_dim(),
                                                         std::nullopt, std::nullopt}),
          small_net.architecture);
      f.repro = io::Json{{"kind", "thm1"},
                         {"network", io::to_json(small_net)},
                         {"x", io::to_json(small_x)},
                         {"formula", print_formula(psi)},
                         {"classified", shrunk.classified},
                         {"satisfied", shrunk.satisfied_first}};
      out.records.push_back(std::move(f));
    }
  });
  io::Json populations = io::Json::object();
  std::size_t divergences = 0, failing_cases = 0;
  for (const auto& r : results) {
    if (r.diagnostics.is_null() || !r.diagnostics.contains("class_f")) continue;
    const std::string key = r.diagnostics.at("class_f").get<bool>() ? "class_f" : "general";
    if (!populations.contains(key)) populations[key] = io::Json::object();
    auto& p = populations[key];
    p["cases"] = p.value("cases", 0) + 1;
    p["points"] = p.value("points", std::size_t{0}) + r.diagnostics.at("points").get<std::size_t>();
    const std::size_t m = r.diagnostics.at("mismatches").get<std::size_t>();
    p["mismatches"] = p.value("mismatches", std::size_t{0}) + m;
    p["cases_with_mismatch"] = p.value("cases_with_mismatch", 0) + (m > 0 ? 1 : 0);
    divergences += r.diagnostics.at("tie_break_divergences").get<std::size_t>();
    p["formula_agrees_with_unfibred_root"] = p.value("formula_agrees_with_unfibred_root", std::size_t{0}) +
                                             r.diagnostics.at("formula_agrees_with_unfibred_root").get<std::size_t>();
    failing_cases += m > 0 ? 1 : 0;
  }
  VerificationReport report = merge("thm1", cfg, std::move(results), start);
  report.diagnostics["populations"] = populations;
  report.diagnostics["tie_break_divergences"] = divergences;
  report.diagnostics["cases_with_mismatch"] = failing_cases;
  return report;
}

namespace {

// Feature assignment `mask` over `count` vectors of dimension d0 (vector v takes bits v*d0 .. v*d0+d0-1).
std::vector<RVector> assignment(std::uint64_t mask, std::size_t count, std::size_t d0) {
  std::vector<RVector> out;
  for (std::size_t v = 0; v < count; ++v) out.push_back(RVector::from_bits(mask >> (v * d0), d0));
  return out;
}

}  // namespace

VerificationReport verify_theorem3(const InstanceGenConfig& cfg, std::size_t cases, const Theorem3Options& options) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  auto results = run_cases(cases, [&](std::size_t i, CaseResult& out) {
    GraphCase c = generate_graph_case(cfg, i, options.mode, true, cfg.max_feature_bits);
    const CompiledFibring compiled = compile_case(c);
    const Formula phi = extract_theorem3_formula(compiled);
    const ComponentId root_in = ComponentId::input(compiled.architecture.root());
    const std::size_t d0 = c.instance.gnn.dims.front();
    const std::size_t count = c.graph.graph.num_vertices();
    const std::size_t bits = count * d0;
    std::size_t mismatches = 0, root_alone = 0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << bits); ++mask) {
      const std::vector<RVector> vecs = assignment(mask, count, d0);
      if (c.mode == CompileMode::Transformer) {
        c.sequence.tokens.clear();
        c.sequence.vec_table.clear();
        for (std::size_t t = 0; t < count; ++t) {
          c.sequence.tokens.push_back("t" + std::to_string(t));
          c.sequence.vec_table.emplace("t" + std::to_string(t), vecs[t]);
        }
        c.graph = c.sequence.encode();
      } else {
        c.graph.features = vecs;
      }
      const bool expected = direct_classification(c);
      const FibredNetwork net = compiled.network(c.graph.features);
      const RVector& x = c.graph.features[c.u];
      BuildOptions opts;
      opts.offset = compiled.root_offset;
      const CompatibleModel cm = build_compatible(net, x, opts);
      const Outcome got = satisfaction(cm.model, root_in, cm.root_world(x), phi);
      ++out.checks;
      if (got.value && *got.value == classify(compiled.root_instance, x)) ++root_alone;
      if (!got.value || *got.value != expected) {
        ++mismatches;
        if (out.records.size() < 2) {
          Failure f;
          f.case_index = i;
          f.input = to_json(c);
          f.expected = bool_str(expected);
          f.got = got.str();
          f.repro = io::Json{{"kind", "thm3"}, {"case", to_json(c)}};
          out.records.push_back(std::move(f));
        }
      }
    }
    out.failures = mismatches;
    out.diagnostics = io::Json{{"assignments", out.checks},
                               {"mismatches", mismatches},
                               {"formula_agrees_with_unfibred_root", root_alone},
                               {"tree_nodes", compiled.tree.size()},
                               {"formula_size", phi.size()},
                               {"root_in_class_F", validate_architecture(compiled.architecture).in_class_F}};
  });
  std::size_t failing_cases = 0, root_alone = 0;
  for (const auto& r : results) {
    failing_cases += r.diagnostics.value("mismatches", std::size_t{0}) > 0 ? 1 : 0;
    root_alone += r.diagnostics.value("formula_agrees_with_unfibred_root", std::size_t{0});
  }
  VerificationReport report = merge("thm3-" + mode_name(options.mode), cfg, std::move(results), start);
  report.diagnostics["cases_with_mismatch"] = failing_cases;
  report.diagnostics["formula_agrees_with_unfibred_root"] = root_alone;
  return report;
}

bool replay_repro(const io::Json& repro, std::string& detail) {
  const std::string kind = repro.at("kind").get<std::string>();
  if (kind == "thm1") {
    const FibredNetwork net = io::network_from_json(repro.at("network"));
    const RVector x = io::vector_from_json(repro.at("x"));
    const Theorem1Check c = check_theorem1_point(net, x);
    detail = c.error ? "error: " + *c.error
                     : "classified " + bool_str(c.classified) + ", formula " + bool_str(c.satisfied_first);
    return c.mismatch();
  }
  if (kind == "thm2") {
    const GraphCase c = graph_case_from_json(repro.at("case"));
    const RVector expected = direct_output(c);
    const RVector got = evaluate_fibred(compile_case(c).network(c.graph.features), c.graph.features[c.u]).first;
    detail = "direct " + expected.key() + ", compiled " + got.key();
    return !(expected == got);
  }
  if (kind == "thm3") {
    const GraphCase c = graph_case_from_json(repro.at("case"));
    const CompiledFibring compiled = compile_case(c);
    const FibredNetwork net = compiled.network(c.graph.features);
    const RVector& x = c.graph.features[c.u];
    BuildOptions opts;
    opts.offset = compiled.root_offset;
    const CompatibleModel cm = build_compatible(net, x, opts);
    const bool expected = direct_classification(c);
    const Outcome got = satisfaction(cm.model, ComponentId::input(compiled.architecture.root()), cm.root_world(x),
                                     extract_theorem3_formula(compiled));
    detail = "classified " + bool_str(expected) + ", formula " + got.str();
    return !got.value || *got.value != expected;
  }
  if (kind == "prop1") {
    const FibredNetwork net = io::network_from_json(repro.at("network"));
    const RVector x = io::vector_from_json(repro.at("x"));
    const CompatibilityReport report = check_compatibility(build_compatible(net, x), net, x);
    detail = std::to_string(report.failures()) + " compatibility violations";
    return !report.passed();
  }
  throw io::FormatError("unknown repro kind '" + kind + "'");
}

}  // namespace fibrelab
