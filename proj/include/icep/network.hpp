#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "icep/dataset.hpp"
#include "icep/tensor.hpp"

namespace icep {

enum class LayerKind { dense, conv2d, relu, maxpool2d, flatten };

const char* layer_kind_name(LayerKind k);
LayerKind parse_layer_kind(const std::string& name);

/// One network layer. Parameterized kinds are dense and conv2d; both are
/// prunable over their output structures (units / filters).
///
/// weights: dense (O,I); conv2d (F,C,KH,KW), valid padding, stride 1.
/// mask: per output structure, 1 = retained. Masked outputs are forced to
/// zero in forward and contribute no gradient; masked parameters are never
/// read, so their stored values are irrelevant.
struct Layer {
  LayerKind kind = LayerKind::dense;
  Tensor weights;
  Tensor bias;
  int window = 0;  // maxpool2d: window == stride
  bool frozen = false;
  std::vector<uint8_t> mask;  // non-empty iff prunable

  // Filled by Network::finalize().
  std::vector<int> in_shape, out_shape;  // per-sample
  int input_src = -1;   // prunable layer whose mask governs this layer's input, -1 = raw
  int input_group = 1;  // dense only: consecutive input positions per upstream structure

  bool parameterized() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }
  bool prunable() const { return !mask.empty(); }
  int structure_count() const { return parameterized() ? weights.dim(0) : 0; }
};

struct Network {
  std::vector<int> input_shape;  // per-sample
  std::vector<Layer> layers;

  /// Computes the shape trace and input-structure topology; validates that
  /// every layer's input shape is consumable. Call after any structural edit.
  void finalize();

  int num_classes() const;
  std::vector<int> prunable_indices() const;
  int parameterized_count() const;

  /// Retained (mask-true) structure count of layer i; all structures if not prunable.
  int retained_count(int i) const;
};

struct LayerSpec {
  LayerKind kind;
  int units = 0;   // dense output, conv filters
  int kernel = 0;  // conv square kernel
  int window = 0;  // maxpool
};

/// He-normal init on weights, zero biases, deterministic in seed.
Network build_network(const std::vector<int>& input_shape,
                      const std::vector<LayerSpec>& specs, uint64_t seed);

/// conv(8,3x3) relu pool(2) conv(16,3x3) relu pool(2) flatten dense(64) relu dense(classes)
Network build_default_cnn(const std::vector<int>& input_shape, int classes, uint64_t seed);

struct ForwardTape {
  std::vector<Tensor> acts;  // acts[0] = batch input, acts[i+1] = layer i output
  std::vector<std::vector<int32_t>> pool_argmax;  // per layer, flat input-spatial index
};

/// Runs the batch (N, input_shape...) through the network. The tape, when
/// given, records every activation and pool argmax for backward. A
/// non-negative `upto` stops after that layer and returns its output.
Tensor forward(const Network& net, const Tensor& batch, ForwardTape* tape = nullptr,
               int upto = -1);

double softmax_ce_loss(const Tensor& logits, const std::vector<int>& labels);

/// d(mean CE)/d(logits) = (softmax - onehot) / N.
Tensor softmax_ce_grad(const Tensor& logits, const std::vector<int>& labels);

struct LayerGrads {
  Tensor weights, bias;  // empty unless the layer is parameterized and unfrozen
};
using Gradients = std::vector<LayerGrads>;

/// Mean cross-entropy gradients. Frozen layers get empty gradients and the
/// backward pass stops below the earliest unfrozen parameterized layer;
/// masked structures contribute zero everywhere.
Gradients backward(const Network& net, const ForwardTape& tape,
                   const std::vector<int>& labels);

/// SGD with momentum, PyTorch convention:
///   g = grad + weight_decay * w;  buf = momentum * buf + g;  w -= lr * buf.
struct OptimizerState {
  float momentum = 0.9f;
  float weight_decay = 1e-4f;
  std::vector<LayerGrads> buffers;

  static OptimizerState for_network(const Network& net, float momentum = 0.9f,
                                    float weight_decay = 1e-4f);
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Applies one step to every unmasked parameter of every unfrozen layer.
/// Skips masked output structures and input columns fed by masked upstream
/// structures; frozen layers are untouched bit for bit. Throws
/// NumericalError (no partial update) if any used gradient is non-finite.
void sgd_step(Network& net, const Gradients& grads, OptimizerState& state, float lr);

/// Top-1 accuracy in [0,1], fixed evaluation order.
double test_accuracy(const Network& net, const Dataset& data, int batch_size = 256);

}  // namespace icep
