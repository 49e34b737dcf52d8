#pragma once

#include <string>

#include <json.hpp>

#include "fibrelab/compatible.hpp"
#include "fibrelab/fibred_net.hpp"
#include "fibrelab/formula.hpp"
#include "fibrelab/graph_nets.hpp"
#include "fibrelab/modal.hpp"

namespace fibrelab::io {

using Json = nlohmann::json;

/// Raised on JSON documents that do not match the expected schema.
class FormatError : public Error {
 public:
  using Error::Error;
};

Json to_json(const Rational& r);
Json to_json(const RVector& v);
Json to_json(const RMatrix& m);
Json to_json(const ActivationSpec& spec);
Json to_json(const NetworkInstance& inst);
Json to_json(const NeuralArchitecture& arch);
Json to_json(const FibringArchitecture& arch);
Json to_json(const FibringRule& rule);
Json to_json(const FibredNetwork& net);
Json to_json(const FibredModel& model);
Json to_json(const CompatibleModel& c);
Json to_json(const CompatibilityReport& report);
Json to_json(const FeaturedGraph& fg);
Json to_json(const GnnInstance& inst);
Json to_json(const GatInstance& inst);
Json to_json(const TokenSequence& seq);
Json to_json(const EvalTrace& trace);

Rational rational_from_json(const Json& j);
RVector vector_from_json(const Json& j);
RMatrix matrix_from_json(const Json& j);
/// Accepts the segment-list form or a bare kind name ("identity", "truncated_relu", "hardmax") covering `length`.
ActivationSpec activation_from_json(const Json& j, std::size_t length);
NetworkInstance instance_from_json(const Json& j);
NeuralArchitecture architecture_from_json(const Json& j);
FibringArchitecture fibring_from_json(const Json& j);
FibringRule rule_from_json(const Json& j);
FibredNetwork network_from_json(const Json& j);
FibredModel model_from_json(const Json& j);
CompatibleModel compatible_from_json(const Json& j);
FeaturedGraph graph_from_json(const Json& j);
GnnInstance gnn_from_json(const Json& j);
GatInstance gat_from_json(const Json& j);
TokenSequence sequence_from_json(const Json& j);

/// "node,in" or "node,3".
ComponentId component_from_string(const std::string& text);

/// Reads and parses a JSON file; throws FormatError on I/O or syntax problems.
Json read_json_file(const std::string& path);
/// Writes `j` with two-space indentation and a trailing newline.
void write_json_file(const std::string& path, const Json& j);

}  // namespace fibrelab::io
