#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "fibrelab/activation.hpp"
#include "fibrelab/linalg.hpp"

namespace fibrelab {

/// Layer dimensions d_0..d_L plus an activation for each hidden layer 1..L-1.
/// The output layer L carries no activation.
struct NeuralArchitecture {
  std::vector<std::size_t> dims;
  std::vector<ActivationSpec> activations;

  std::size_t depth() const { return dims.empty() ? 0 : dims.size() - 1; }
  std::size_t input_dim() const { return dims.front(); }
  std::size_t output_dim() const { return dims.back(); }

  /// Activation applied on exit from hidden layer `layer` (1-based, < depth()).
  const ActivationSpec& activation(std::size_t layer) const { return activations.at(layer - 1); }

  /// Throws DimensionError unless L >= 1, every dim >= 1, and activations line up.
  void validate() const;

  friend bool operator==(const NeuralArchitecture&, const NeuralArchitecture&) = default;
};

struct DenseLayer {
  RMatrix weights;
  RVector bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Immutable weights and biases for an architecture. Copies share storage.
class NetworkInstance {
 public:
  NetworkInstance(NeuralArchitecture architecture, std::vector<DenseLayer> layers);

  /// One linear layer computing x -> x on dimension n.
  static NetworkInstance identity(std::size_t n);

  const NeuralArchitecture& architecture() const { return data_->architecture; }
  const std::vector<DenseLayer>& layers() const { return data_->layers; }
  const DenseLayer& layer(std::size_t l) const { return data_->layers.at(l - 1); }
  std::size_t depth() const { return architecture().depth(); }
  std::size_t input_dim() const { return architecture().input_dim(); }
  std::size_t output_dim() const { return architecture().output_dim(); }
  /// Address of the shared storage; copies of one instance report the same value.
  const void* storage_id() const { return data_.get(); }

  friend bool operator==(const NetworkInstance& a, const NetworkInstance& b);

 private:
  struct Data {
    NeuralArchitecture architecture;
    std::vector<DenseLayer> layers;
  };
  std::shared_ptr<const Data> data_;
};

/// Layers from..to of an instance. Vectors at layer l >= 1 are pre-activations h^l.
struct LayerSpan {
  std::size_t from = 0;
  std::size_t to = 0;
};

/// h^L of the network on x.
RVector run_network(const NetworkInstance& net, const RVector& x);

/// Applies sigma^from (when from >= 1), then layers from+1..to; returns h^to.
/// An empty span returns v unchanged.
RVector run_span(const NetworkInstance& net, LayerSpan span, const RVector& v);

/// True iff the scalar output is strictly positive.
bool classify(const NetworkInstance& net, const RVector& x);

}  // namespace fibrelab
