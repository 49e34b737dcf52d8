#include "fibrelab/io.hpp"

#include <fstream>
#include <sstream>

namespace fibrelab::io {

namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  return j.at(key);
}

std::size_t count_of(const Json& j) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    throw FormatError("expected a non-negative integer, got " + j.dump());
  }
  return j.get<std::size_t>();
}

std::string string_of(const Json& j) {
  if (!j.is_string()) throw FormatError("expected a string, got " + j.dump());
  return j.get<std::string>();
}

const Json& array_of(const Json& j) {
  if (!j.is_array()) throw FormatError("expected an array, got " + j.dump());
  return j;
}

const Json& optional_array(const Json& j, const char* key) {
  static const Json empty = Json::array();
  return j.contains(key) ? array_of(j.at(key)) : empty;
}

std::vector<std::size_t> counts_of(const Json& j) {
  std::vector<std::size_t> out;
  for (const auto& e : array_of(j)) out.push_back(count_of(e));
  return out;
}

std::string kind_key(const ActivationKind& kind) {
  switch (kind.index()) {
    case 0: return "identity";
    case 1: return "truncated_relu";
    case 2: return "hardmax";
    default: return "attention_combine";
  }
}

}  // namespace

Json to_json(const Rational& r) { return r.str(); }

Json to_json(const RVector& v) {
  Json j = Json::array();
  for (const auto& e : v) j.push_back(e.str());
  return j;
}

Json to_json(const RMatrix& m) {
  Json j = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m.at(r, c).str());
    j.push_back(std::move(row));
  }
  return j;
}

Json to_json(const ActivationSpec& spec) {
  Json j = Json::array();
  for (const auto& seg : spec.segments()) {
    Json s{{"length", seg.length}, {"kind", kind_key(seg.kind)}};
    if (const auto* att = std::get_if<AttentionCombineKind>(&seg.kind)) {
      s["block_count"] = att->block_count;
      s["block_dim"] = att->block_dim;
      s["attention_vector"] = to_json(att->attention_vector);
      s["bias"] = to_json(att->bias);
    }
    j.push_back(std::move(s));
  }
  return j;
}

Json to_json(const NeuralArchitecture& arch) {
  Json acts = Json::array();
  for (const auto& a : arch.activations) acts.push_back(to_json(a));
  return Json{{"dims", arch.dims}, {"activations", std::move(acts)}};
}

Json to_json(const NetworkInstance& inst) {
  Json layers = Json::array();
  for (std::size_t l = 1; l <= inst.depth(); ++l) {
    Json layer{{"W", to_json(inst.layer(l).weights)}, {"b", to_json(inst.layer(l).bias)}};
    if (l < inst.depth()) layer["activation"] = to_json(inst.architecture().activation(l));
    layers.push_back(std::move(layer));
  }
  return Json{{"dims", inst.architecture().dims}, {"layers", std::move(layers)}};
}

Json to_json(const FibringArchitecture& arch) {
  Json nodes = Json::object();
  for (const auto& [id, a] : arch.nodes()) nodes[id] = to_json(a);
  Json edges = Json::array();
  for (const auto& node : arch.bfs_order()) {
    for (const auto& e : arch.children(node)) {
      edges.push_back(Json{{"parent", e.parent}, {"child", e.child}, {"layer", e.label.layer},
                           {"positions", e.label.positions}});
    }
  }
  return Json{{"root", arch.root()}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

Json to_json(const FibringRule& rule) {
  return std::visit(
      [](const auto& r) -> Json {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, TableRule>) {
          Json entries = Json::array();
          for (const auto& [_, e] : r.entries) {
            entries.push_back(Json{{"key", to_json(e.key)}, {"instance", to_json(e.instance)}, {"input", to_json(e.input)}});
          }
          return Json{{"kind", "table"}, {"entries", std::move(entries)}};
        } else if constexpr (std::is_same_v<R, ConstantRule>) {
          return Json{{"kind", "constant"}, {"instance", to_json(r.instance)}, {"input", to_json(r.input)}};
        } else if constexpr (std::is_same_v<R, SelfFibreRule>) {
          return Json{{"kind", "self_fibre"}, {"instance", to_json(r.instance)}};
        } else {
          return Json{{"kind", "gat_gadget"},
                      {"block_count", r.block_count()},
                      {"block_dim", r.block_dim()},
                      {"attention_vector", to_json(r.attention_vector())},
                      {"bias", to_json(r.bias())}};
        }
      },
      rule);
}

Json to_json(const FibredNetwork& net) {
  Json rules = Json::array();
  for (const auto& [key, rule] : net.rules) {
    rules.push_back(Json{{"parent", key.first}, {"child", key.second}, {"rule", to_json(rule)}});
  }
  return Json{{"root_instance", to_json(net.root_instance)},
              {"architecture", to_json(net.architecture)},
              {"rules", std::move(rules)}};
}

Json to_json(const FibredModel& model) {
  Json components = Json::array();
  for (const auto& [id, comp] : model.components()) {
    Json worlds = Json::array();
    Json valuation = Json::array();
    for (auto w : comp.worlds) {
      worlds.push_back(w.value);
      valuation.push_back(Json::array({w.value, comp.props(w).str(model.num_props())}));
    }
    Json relation = Json::array();
    for (const auto& [a, b] : comp.relation()) relation.push_back(Json::array({a.value, b.value}));
    components.push_back(Json{{"component", id.str()},
                              {"worlds", std::move(worlds)},
                              {"relation", std::move(relation)},
                              {"valuation", std::move(valuation)}});
  }
  Json jumps = Json::array();
  for (const auto& [key, to] : model.jumps()) jumps.push_back(Json::array({key.first.value, key.second.str(), to.value}));
  Json provenance = Json::array();
  for (const auto& [w, gens] : model.provenance_map()) {
    Json g = Json::array();
    for (auto x : gens) g.push_back(x.value);
    provenance.push_back(Json::array({w.value, std::move(g)}));
  }
  Json parents = Json::object();
  for (const auto& [child, parent] : model.tree_parents()) parents[child] = parent;
  return Json{{"num_props", model.num_props()}, {"components", std::move(components)}, {"jumps", std::move(jumps)},
              {"provenance", std::move(provenance)}, {"tree_parent", std::move(parents)}};
}

Json to_json(const CompatibleModel& c) {
  Json maps = Json::array();
  for (const auto& [id, pi] : c.maps) {
    Json pairs = Json::array();
    for (const auto& [w, v] : pi.pairs()) pairs.push_back(Json::array({w.value, to_json(v)}));
    maps.push_back(Json{{"component", id.str()}, {"pairs", std::move(pairs)}});
  }
  Json instances = Json::object();
  for (const auto& [node, inst] : c.instances) instances[node] = to_json(inst);
  return Json{{"model", to_json(c.model)}, {"maps", std::move(maps)}, {"instances", std::move(instances)},
              {"root", c.root}, {"input", to_json(c.input)}, {"offset", to_json(c.offset)}};
}

Json to_json(const CompatibilityReport& report) {
  Json results = Json::array();
  for (const auto& r : report.results) {
    Json e{{"condition", r.condition}, {"scope", r.scope}, {"pass", r.pass}};
    if (!r.pass) e["witness"] = r.witness;
    results.push_back(std::move(e));
  }
  return Json{{"passed", report.passed()},
              {"failures", report.failures()},
              {"off_anchor_valuation_disagreements", report.off_anchor_valuation_disagreements},
              {"results", std::move(results)}};
}

Json to_json(const FeaturedGraph& fg) {
  Json edges = Json::array();
  for (const auto& [a, b] : fg.graph.edges()) edges.push_back(Json::array({a, b}));
  Json features = Json::array();
  for (const auto& f : fg.features) features.push_back(to_json(f));
  return Json{{"nodes", fg.graph.num_vertices()}, {"edges", std::move(edges)}, {"features", std::move(features)}};
}

Json to_json(const GnnInstance& inst) {
  Json layers = Json::array();
  for (const auto& l : inst.layers) layers.push_back(Json{{"A", to_json(l.A)}, {"B", to_json(l.B)}, {"b", to_json(l.b)}});
  return Json{{"dims", inst.dims}, {"layers", std::move(layers)}};
}

Json to_json(const GatInstance& inst) {
  Json j = to_json(inst.gnn);
  for (std::size_t l = 0; l < inst.attention.size() && l < j["layers"].size(); ++l) {
    j["layers"][l]["a"] = to_json(inst.attention[l]);
  }
  return j;
}

Json to_json(const TokenSequence& seq) {
  Json vec = Json::object();
  for (const auto& [tok, v] : seq.vec_table) vec[tok] = to_json(v);
  Json j{{"tokens", seq.tokens}, {"vec", std::move(vec)}};
  if (seq.positions) {
    Json pos = Json::array();
    for (const auto& p : *seq.positions) pos.push_back(to_json(p));
    j["pos"] = std::move(pos);
  } else {
    j["pos"] = "default";
  }
  return j;
}

Json to_json(const EvalTrace& trace) {
  Json nodes = Json::object();
  for (const auto& [id, t] : trace.nodes) {
    Json stages = Json::array();
    for (const auto& s : t.stages) {
      stages.push_back(Json{{"child", s.child}, {"layer", s.label.layer}, {"positions", s.label.positions},
                            {"x", to_json(s.x)}, {"y", to_json(s.y)}, {"h", to_json(s.h)}});
    }
    nodes[id] = Json{{"input", to_json(t.input)}, {"output", to_json(t.output)}, {"stages", std::move(stages)}};
  }
  return Json{{"nodes", std::move(nodes)}};
}

Rational rational_from_json(const Json& j) {
  if (j.is_string()) return Rational::parse(j.get<std::string>());
  if (j.is_number_integer()) return Rational(static_cast<long>(j.get<long long>()));
  throw FormatError("rationals are strings \"p/q\" or integers, got " + j.dump());
}

RVector vector_from_json(const Json& j) {
  std::vector<Rational> entries;
  for (const auto& e : array_of(j)) entries.push_back(rational_from_json(e));
  return RVector(std::move(entries));
}

RMatrix matrix_from_json(const Json& j) {
  std::vector<std::vector<Rational>> rows;
  for (const auto& row : array_of(j)) {
    std::vector<Rational> r;
    for (const auto& e : array_of(row)) r.push_back(rational_from_json(e));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw FormatError("matrices need at least one row");
  return RMatrix::from_rows(rows);
}

ActivationSpec activation_from_json(const Json& j, std::size_t length) {
  if (j.is_null()) return ActivationSpec::identity(length);
  if (j.is_string()) {
    const std::string kind = j.get<std::string>();
    if (kind == "identity") return ActivationSpec::identity(length);
    if (kind == "truncated_relu") return ActivationSpec::truncated_relu(length);
    if (kind == "hardmax") return ActivationSpec::hardmax(length);
    throw FormatError("unknown activation '" + kind + "'");
  }
  std::vector<ActivationSegment> segments;
  for (const auto& s : array_of(j)) {
    const std::size_t len = count_of(field(s, "length"));
    const std::string kind = string_of(field(s, "kind"));
    if (kind == "identity") {
      segments.push_back({len, IdentityKind{}});
    } else if (kind == "truncated_relu") {
      segments.push_back({len, TruncatedReluKind{}});
    } else if (kind == "hardmax") {
      segments.push_back({len, HardmaxKind{}});
    } else if (kind == "attention_combine") {
      segments.push_back({len, AttentionCombineKind{count_of(field(s, "block_count")), count_of(field(s, "block_dim")),
                                                    vector_from_json(field(s, "attention_vector")),
                                                    vector_from_json(field(s, "bias"))}});
    } else {
      throw FormatError("unknown activation kind '" + kind + "'");
    }
  }
  ActivationSpec spec(std::move(segments));
  if (spec.total_length() != length) {
    throw FormatError("activation covers " + std::to_string(spec.total_length()) + " coordinates, layer has " +
                      std::to_string(length));
  }
  return spec;
}

NeuralArchitecture architecture_from_json(const Json& j) {
  NeuralArchitecture arch{counts_of(field(j, "dims")), {}};
  const Json& acts = j.contains("activations") ? j.at("activations") : Json::array();
  if (arch.dims.size() < 2) throw FormatError("architectures need at least two dimensions");
  for (std::size_t l = 1; l + 1 < arch.dims.size(); ++l) {
    arch.activations.push_back(activation_from_json(l - 1 < acts.size() ? acts.at(l - 1) : Json(), arch.dims[l]));
  }
  arch.validate();
  return arch;
}

NetworkInstance instance_from_json(const Json& j) {
  NeuralArchitecture arch{counts_of(field(j, "dims")), {}};
  const Json& layers = array_of(field(j, "layers"));
  if (arch.dims.size() != layers.size() + 1) throw FormatError("instance needs one layer per consecutive dims pair");
  std::vector<DenseLayer> dense;
  for (std::size_t l = 1; l <= layers.size(); ++l) {
    const Json& layer = layers.at(l - 1);
    dense.push_back(DenseLayer{matrix_from_json(field(layer, "W")), vector_from_json(field(layer, "b"))});
    if (l < layers.size()) {
      arch.activations.push_back(
          activation_from_json(layer.contains("activation") ? layer.at("activation") : Json(), arch.dims[l]));
    }
  }
  return NetworkInstance(std::move(arch), std::move(dense));
}

FibringArchitecture fibring_from_json(const Json& j) {
  std::map<NodeId, NeuralArchitecture> nodes;
  for (const auto& [id, a] : field(j, "nodes").items()) nodes.emplace(id, architecture_from_json(a));
  std::vector<FibringEdge> edges;
  for (const auto& e : optional_array(j, "edges")) {
    edges.push_back({string_of(field(e, "parent")), string_of(field(e, "child")),
                     EdgeLabel{count_of(field(e, "layer")), counts_of(field(e, "positions"))}});
  }
  return FibringArchitecture(string_of(field(j, "root")), std::move(nodes), std::move(edges));
}

FibringRule rule_from_json(const Json& j) {
  const std::string kind = string_of(field(j, "kind"));
  if (kind == "table") {
    TableRule rule;
    for (const auto& e : array_of(field(j, "entries"))) {
      rule.insert(vector_from_json(field(e, "key")), instance_from_json(field(e, "instance")),
                  vector_from_json(field(e, "input")));
    }
    return rule;
  }
  if (kind == "constant") return ConstantRule{instance_from_json(field(j, "instance")), vector_from_json(field(j, "input"))};
  if (kind == "self_fibre") return SelfFibreRule{instance_from_json(field(j, "instance"))};
  if (kind == "gat_gadget") {
    return GatGadgetRule(count_of(field(j, "block_count")), count_of(field(j, "block_dim")),
                         vector_from_json(field(j, "attention_vector")), vector_from_json(field(j, "bias")));
  }
  throw FormatError("unknown rule kind '" + kind + "'");
}

FibredNetwork network_from_json(const Json& j) {
  FibredNetwork net{instance_from_json(field(j, "root_instance")), fibring_from_json(field(j, "architecture")), {}};
  for (const auto& r : optional_array(j, "rules")) {
    net.rules.emplace(EdgeKey{string_of(field(r, "parent")), string_of(field(r, "child"))}, rule_from_json(field(r, "rule")));
  }
  net.validate();
  return net;
}

ComponentId component_from_string(const std::string& text) {
  const auto comma = text.rfind(',');
  if (comma == std::string::npos || comma == 0) throw FormatError("component ids look like \"node,in\" or \"node,3\"");
  const std::string node = text.substr(0, comma);
  const std::string layer = text.substr(comma + 1);
  if (layer == "in") return ComponentId::input(node);
  if (layer.empty() || layer.find_first_not_of("0123456789") != std::string::npos || layer.size() > 9) {
    throw FormatError("bad layer tag in component id '" + text + "'");
  }
  const std::size_t l = std::stoul(layer);
  if (l == 0) throw FormatError("layer indices start at 1 in '" + text + "'");
  return ComponentId::at_layer(node, l);
}

namespace {

WorldId world_of(const Json& j) {
  const std::size_t v = count_of(j);
  if (v > 0xFFFFFFFFu) throw FormatError("world id out of range");
  return WorldId{static_cast<std::uint32_t>(v)};
}

}  // namespace

FibredModel model_from_json(const Json& j) {
  FibredModel model(count_of(field(j, "num_props")));
  const Json& components = array_of(field(j, "components"));
  for (const auto& c : components) {
    const ComponentId id = component_from_string(string_of(field(c, "component")));
    model.add_component(id);
    for (const auto& w : array_of(field(c, "worlds"))) model.add_world(id, world_of(w));
    if (c.contains("valuation")) {
      for (const auto& entry : array_of(c.at("valuation"))) {
        const WorldId w = world_of(array_of(entry).at(0));
        if (!model.component(id).has_world(w)) throw FormatError("valuation for a world outside its component");
        const std::string bits = string_of(entry.at(1));
        if (bits.size() > model.num_props()) throw FormatError("valuation bitset longer than the proposition count");
        model.component(id).valuation[w] = PropSet::parse(bits);
      }
    }
  }
  for (const auto& c : components) {
    const ComponentId id = component_from_string(string_of(field(c, "component")));
    for (const auto& pair : optional_array(c, "relation")) {
      model.component(id).add_edge(world_of(array_of(pair).at(0)), world_of(pair.at(1)));
    }
  }
  for (const auto& t : optional_array(j, "jumps")) {
    array_of(t);
    if (t.size() != 3) throw FormatError("jumps are [from, \"component\", to] triples");
    model.set_jump(world_of(t.at(0)), component_from_string(string_of(t.at(1))), world_of(t.at(2)));
  }
  for (const auto& p : optional_array(j, "provenance")) {
    std::vector<WorldId> gens;
    for (const auto& g : array_of(array_of(p).at(1))) gens.push_back(world_of(g));
    model.set_provenance(world_of(p.at(0)), std::move(gens));
  }
  if (j.contains("tree_parent")) {
    for (const auto& [child, parent] : j.at("tree_parent").items()) model.set_tree_parent(child, string_of(parent));
  }
  return model;
}

CompatibleModel compatible_from_json(const Json& j) {
  CompatibleModel c;
  c.model = model_from_json(field(j, "model"));
  for (const auto& m : array_of(field(j, "maps"))) {
    const ComponentId id = component_from_string(string_of(field(m, "component")));
    WorldVectorMap pi(id);
    for (const auto& pair : array_of(field(m, "pairs"))) pi.insert(world_of(array_of(pair).at(0)), vector_from_json(pair.at(1)));
    c.maps.emplace(id, std::move(pi));
  }
  for (const auto& [node, inst] : field(j, "instances").items()) c.instances.emplace(node, instance_from_json(inst));
  c.root = string_of(field(j, "root"));
  c.input = vector_from_json(field(j, "input"));
  c.offset = vector_from_json(field(j, "offset"));
  return c;
}

FeaturedGraph graph_from_json(const Json& j) {
  std::vector<std::pair<Vertex, Vertex>> edges;
  for (const auto& e : optional_array(j, "edges")) {
    array_of(e);
    if (e.size() != 2) throw FormatError("edges are [a, b] pairs");
    edges.emplace_back(count_of(e.at(0)), count_of(e.at(1)));
  }
  FeaturedGraph fg{Graph(count_of(field(j, "nodes")), edges), {}};
  for (const auto& f : optional_array(j, "features")) {
    fg.features.push_back(vector_from_json(f));
  }
  return fg;
}

GnnInstance gnn_from_json(const Json& j) {
  GnnInstance inst{counts_of(field(j, "dims")), {}};
  for (const auto& l : array_of(field(j, "layers"))) {
    inst.layers.push_back(GnnLayer{matrix_from_json(field(l, "A")), matrix_from_json(field(l, "B")),
                                   vector_from_json(field(l, "b"))});
  }
  inst.validate();
  return inst;
}

GatInstance gat_from_json(const Json& j) {
  GatInstance inst{gnn_from_json(j), {}};
  for (const auto& l : field(j, "layers")) inst.attention.push_back(vector_from_json(field(l, "a")));
  inst.validate();
  return inst;
}

TokenSequence sequence_from_json(const Json& j) {
  TokenSequence seq;
  for (const auto& t : array_of(field(j, "tokens"))) seq.tokens.push_back(string_of(t));
  for (const auto& [tok, v] : field(j, "vec").items()) seq.vec_table.emplace(tok, vector_from_json(v));
  if (j.contains("pos") && !(j.at("pos").is_string() && j.at("pos").get<std::string>() == "default")) {
    std::vector<RVector> pos;
    for (const auto& p : array_of(j.at("pos"))) pos.push_back(vector_from_json(p));
    seq.positions = std::move(pos);
  }
  return seq;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& err) {
    throw FormatError("'" + path + "': " + err.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace fibrelab::io
