#include "fibrelab/feedforward.hpp"

#include "fibrelab/errors.hpp"

namespace fibrelab {

void NeuralArchitecture::validate() const {
  if (dims.size() < 2) throw DimensionError("architecture needs at least one layer");
  for (std::size_t l = 0; l < dims.size(); ++l) {
    if (dims[l] == 0) throw DimensionError("layer " + std::to_string(l) + " has dimension 0");
  }
  if (activations.size() != depth() - 1) {
    throw DimensionError("architecture with " + std::to_string(depth()) + " layers needs " +
                         std::to_string(depth() - 1) + " hidden activations, got " +
                         std::to_string(activations.size()));
  }
  for (std::size_t l = 1; l < depth(); ++l) {
    if (activation(l).total_length() != dims[l]) {
      throw DimensionError("activation of layer " + std::to_string(l) + " covers " +
                           std::to_string(activation(l).total_length()) + " coordinates, layer has " +
                           std::to_string(dims[l]));
    }
  }
}

NetworkInstance::NetworkInstance(NeuralArchitecture architecture, std::vector<DenseLayer> layers) {
  architecture.validate();
  if (layers.size() != architecture.depth()) {
    throw DimensionError("instance has " + std::to_string(layers.size()) + " layers, architecture has " +
                         std::to_string(architecture.depth()));
  }
  for (std::size_t l = 1; l <= layers.size(); ++l) {
    const auto& layer = layers[l - 1];
    if (layer.weights.rows() != architecture.dims[l] || layer.weights.cols() != architecture.dims[l - 1]) {
      throw DimensionError("W^" + std::to_string(l) + " is " + std::to_string(layer.weights.rows()) + "x" +
                           std::to_string(layer.weights.cols()) + ", expected " +
                           std::to_string(architecture.dims[l]) + "x" + std::to_string(architecture.dims[l - 1]));
    }
    if (layer.bias.dim() != architecture.dims[l]) {
      throw DimensionError("b^" + std::to_string(l) + " has dim " + std::to_string(layer.bias.dim()) +
                           ", expected " + std::to_string(architecture.dims[l]));
    }
  }
  data_ = std::make_shared<const Data>(Data{std::move(architecture), std::move(layers)});
}

NetworkInstance NetworkInstance::identity(std::size_t n) {
  return NetworkInstance(NeuralArchitecture{{n, n}, {}}, {DenseLayer{RMatrix::identity(n), RVector::zeros(n)}});
}

bool operator==(const NetworkInstance& a, const NetworkInstance& b) {
  if (a.data_ == b.data_) return true;
  if (!a.data_ || !b.data_) return false;
  return a.data_->architecture == b.data_->architecture && a.data_->layers == b.data_->layers;
}

RVector run_span(const NetworkInstance& net, LayerSpan span, const RVector& v) {
  const std::size_t depth = net.depth();
  if (span.from > span.to || span.to > depth) {
    throw DimensionError("invalid layer span " + std::to_string(span.from) + "->" + std::to_string(span.to) +
                         " for a network of depth " + std::to_string(depth));
  }
  const std::size_t expected = net.architecture().dims[span.from];
  if (v.dim() != expected) {
    throw DimensionError("span " + std::to_string(span.from) + "->" + std::to_string(span.to) + " expects dim " +
                         std::to_string(expected) + ", got " + std::to_string(v.dim()));
  }
  if (span.from == span.to) return v;
  RVector x = span.from >= 1 ? apply_activation(net.architecture().activation(span.from), v) : v;
  RVector h;
  for (std::size_t l = span.from + 1; l <= span.to; ++l) {
    const auto& layer = net.layer(l);
    h = mat_vec_mul_add(layer.weights, x, layer.bias);
    if (l < span.to) x = apply_activation(net.architecture().activation(l), h);
  }
  return h;
}

RVector run_network(const NetworkInstance& net, const RVector& x) {
  return run_span(net, LayerSpan{0, net.depth()}, x);
}

bool classify(const NetworkInstance& net, const RVector& x) {
  if (net.output_dim() != 1) {
    throw ShapeError("classification needs output dimension 1, network has " + std::to_string(net.output_dim()));
  }
  return run_network(net, x)[0].sign() > 0;
}

}  // namespace fibrelab
