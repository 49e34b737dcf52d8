#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "fibrelab/harness.hpp"

namespace fs = std::filesystem;
using namespace fibrelab;

namespace {

constexpr int kPass = 0;
constexpr int kCounterexample = 1;
constexpr int kUsage = 2;

struct Common {
  std::string out = ".";
  bool emit_dot = false;
  bool emit_json = false;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw io::FormatError("cannot write " + path.string());
  os << text;
}

void write_json(const fs::path& path, const io::Json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_json_file(path.string(), j);
}

RVector read_vector(const std::string& text) {
  if (fs::exists(text)) return io::vector_from_json(io::read_json_file(text));
  return RVector::parse(text);
}

// A file holding either a fibred network or a bare network instance.
FibredNetwork read_network(const std::string& path) {
  const io::Json j = io::read_json_file(path);
  if (j.is_object() && j.contains("root_instance")) return io::network_from_json(j);
  NetworkInstance inst = io::instance_from_json(j);
  NeuralArchitecture arch = inst.architecture();
  return FibredNetwork{std::move(inst), FibringArchitecture("root", {{"root", std::move(arch)}}, {}), {}};
}

int run_eval(const std::string& network, const std::string& input, const Common& c) {
  const FibredNetwork net = read_network(network);
  const RVector x = read_vector(input);
  const auto [out, trace] = evaluate_fibred(net, x);
  std::cout << "output " << out << "\n";
  if (out.dim() == 1) std::cout << "class " << (classify_fibred(net, x) ? "true" : "false") << "\n";
  if (c.emit_json) write_json(fs::path(c.out) / "trace.json", io::to_json(trace));
  if (c.emit_dot) write_text(fs::path(c.out) / "architecture.dot", to_dot(net.architecture));
  return kPass;
}

int run_compile(const std::string& case_path, const Common& c) {
  const GraphCase gc = graph_case_from_json(io::read_json_file(case_path));
  const CompiledFibring compiled = compile_case(gc);
  const FibredNetwork net = compiled.network(gc.graph.features);
  const fs::path out(c.out);
  write_json(out / "architecture.json",
             io::Json{{"mode", mode_name(compiled.mode)},
                      {"root_instance", io::to_json(compiled.root_instance)},
                      {"architecture", io::to_json(compiled.architecture)},
                      {"root_offset", io::to_json(compiled.root_offset)}});
  write_json(out / "rules.json", io::to_json(net).at("rules"));
  std::cout << "tree nodes " << compiled.tree.size() << "\n";
  std::cout << "output " << evaluate_fibred(net, gc.graph.features[gc.u]).first << "\n";
  if (compiled.root_instance.output_dim() == 1) {
    const std::string formula = print_formula(extract_theorem3_formula(compiled));
    write_text(out / "formula.txt", formula + "\n");
    std::cout << "formula written to " << (out / "formula.txt").string() << "\n";
  }
  if (c.emit_json) write_json(out / "network.json", io::to_json(net));
  if (c.emit_dot) write_text(out / "unravel.dot", to_dot(compiled.tree));
  return kPass;
}

int run_model_check(const std::string& model_path, const std::string& component, std::uint32_t world,
                    const std::string& formula_text, bool last, const Common& c) {
  const io::Json j = io::read_json_file(model_path);
  const FibredModel model = io::model_from_json(j.contains("model") ? j.at("model") : j);
  const Formula f = parse_formula(formula_text, model.num_props());
  const bool sat = check_satisfaction(model, io::component_from_string(component), WorldId{world}, f,
                                      last ? TieBreak::Last : TieBreak::First);
  std::cout << (sat ? "true" : "false") << "\n";
  if (c.emit_dot) write_text(fs::path(c.out) / "model.dot", to_dot(model));
  return kPass;
}

int run_build(const std::string& network, const std::string& input, bool allow_large, const std::string& policy,
              const Common& c) {
  const FibredNetwork net = read_network(network);
  const RVector x = read_vector(input);
  BuildOptions opts;
  opts.max_cube_bits = allow_large ? 63 : max_cube_bits();
  opts.policy = policy == "union" ? ValuationPolicy::ExistentialUnion : ValuationPolicy::AnchorPinned;
  const CompatibleModel model = build_compatible(net, x, opts);
  const CompatibilityReport report = check_compatibility(model, net, x);
  write_json(fs::path(c.out) / "model.json", io::to_json(model));
  if (c.emit_json) write_json(fs::path(c.out) / "compatibility.json", io::to_json(report));
  if (c.emit_dot) write_text(fs::path(c.out) / "model.dot", to_dot(model.model));
  std::cout << "components " << model.model.components().size() << ", conditions " << report.results.size()
            << ", violations " << report.failures() << "\n";
  for (const auto& r : report.failed()) std::cout << "  " << r.condition << " at " << r.scope << ": " << r.witness << "\n";
  return report.passed() ? kPass : kCounterexample;
}

int run_verify(const std::string& theorem, const std::string& mode_text, std::uint64_t seed, std::size_t cases,
               const std::string& config, const Common& c) {
  InstanceGenConfig cfg = config.empty() ? InstanceGenConfig{} : config_from_json(io::read_json_file(config));
  cfg.seed = seed;
  const CompileMode mode = mode_text == "gat"           ? CompileMode::Gat
                           : mode_text == "transformer" ? CompileMode::Transformer
                                                        : CompileMode::Gnn;
  VerificationReport report;
  if (theorem == "thm1") {
    report = verify_theorem1(cfg, cases);
  } else if (theorem == "thm2") {
    report = verify_theorem2(cfg, cases, Theorem2Options{mode, 1, {}});
  } else if (theorem == "thm3") {
    report = verify_theorem3(cfg, cases, Theorem3Options{mode});
  } else {
    report = verify_prop1(cfg, cases);
  }
  const fs::path out(c.out);
  for (std::size_t k = 0; k < report.failures.size(); ++k) {
    Failure& f = report.failures[k];
    if (f.repro.is_null()) continue;
    f.repro_path = (out / ("repro_" + report.theorem + "_" + std::to_string(k) + ".json")).string();
    write_json(f.repro_path, f.repro);
  }
  write_json(out / ("report_" + report.theorem + ".json"), to_json(report));
  std::cout << report.theorem << ": " << (report.passed() ? "PASS" : "FAIL") << " cases " << report.cases << " checks "
            << report.checks << " failures " << report.total_failures << "\n";
  std::cerr << "wall time " << report.wall_seconds << " s\n";
  return report.passed() ? kPass : kCounterexample;
}

int run_replay(const std::string& path) {
  std::string detail;
  const bool reproduces = replay_repro(io::read_json_file(path), detail);
  std::cout << (reproduces ? "reproduces: " : "does not reproduce: ") << detail << "\n";
  return reproduces ? kCounterexample : kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact fibred neural networks, modal models and graph network compilation"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("--out", common.out, "Output directory")->capture_default_str();
    sub->add_flag("--emit-dot", common.emit_dot, "Write Graphviz files");
    sub->add_flag("--emit-json", common.emit_json, "Write additional JSON artifacts");
  };

  std::string network, input, case_path, model_path, component, formula, policy = "anchor", theorem, mode = "gnn",
                                                                          config, repro;
  std::uint32_t world = 0;
  std::uint64_t seed = 1;
  std::size_t cases = 20;
  bool last = false, allow_large = false;

  auto* eval = app.add_subcommand("eval", "Evaluate a fibred network (or plain instance) on an input");
  eval->add_option("network", network, "Network JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--input,-x", input, "Input vector \"a,b,...\" or JSON file")->required();
  add_common(eval);

  auto* comp = app.add_subcommand("compile", "Compile a GNN, GAT or transformer case into a fibred network");
  comp->add_option("case", case_path, "Case JSON with mode, instance, graph or sequence, and u")
      ->required()
      ->check(CLI::ExistingFile);
  add_common(comp);

  auto* check = app.add_subcommand("model-check", "Check a formula at a world of a fibred Kripke model");
  check->add_option("model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  check->add_option("--component,-c", component, "Component as node,in or node,layer")->required();
  check->add_option("--world,-w", world, "World id")->required();
  check->add_option("--formula,-f", formula, "Formula text")->required();
  check->add_flag("--last", last, "Resolve ambiguous jumps with the last provenance generator");
  add_common(check);

  auto* build = app.add_subcommand("build-compatible", "Build and check the compatible model of a network at x");
  build->add_option("network", network, "Fibred network JSON")->required()->check(CLI::ExistingFile);
  build->add_option("--input,-x", input, "Input vector or JSON file")->required();
  build->add_flag("--allow-large", allow_large, "Lift the root cube size guard");
  build->add_option("--policy", policy, "Valuation policy")
      ->check(CLI::IsMember({"anchor", "union"}))
      ->capture_default_str();
  add_common(build);

  auto* verify = app.add_subcommand("verify", "Run a randomized verification suite or replay a repro");
  verify->add_option("theorem", theorem, "Suite")->check(CLI::IsMember({"thm1", "thm2", "thm3", "prop1"}));
  verify->add_option("--seed", seed, "Seed")->capture_default_str();
  verify->add_option("--cases", cases, "Number of cases")->capture_default_str();
  verify->add_option("--config", config, "Generator config JSON")->check(CLI::ExistingFile);
  verify->add_option("--mode", mode, "Graph network mode")
      ->check(CLI::IsMember({"gnn", "gat", "transformer"}))
      ->capture_default_str();
  verify->add_option("--repro", repro, "Replay a repro file instead")->check(CLI::ExistingFile);
  add_common(verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }

  try {
    if (*eval) return run_eval(network, input, common);
    if (*comp) return run_compile(case_path, common);
    if (*check) return run_model_check(model_path, component, world, formula, last, common);
    if (*build) return run_build(network, input, allow_large, policy, common);
    if (!repro.empty()) return run_replay(repro);
    if (theorem.empty()) {
      std::cerr << "verify needs a suite (thm1, thm2, thm3, prop1) or --repro\n";
      return kUsage;
    }
    return run_verify(theorem, mode, seed, cases, config, common);
  } catch (const GuardError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const io::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const io::Json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}
