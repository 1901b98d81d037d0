#pragma once

#include <optional>
#include <string>
#include <vector>

#include "shiftcal/common.hpp"

namespace shiftcal {

enum class Activation { Relu, Tanh, Identity };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct DenseLayer {
  Matrix weights;             // [out x in]
  std::vector<double> bias;   // [out]
  Activation activation = Activation::Identity;

  int in_dim() const { return weights.cols; }
  int out_dim() const { return weights.rows; }
};

struct DenseNet {
  std::vector<DenseLayer> layers;

  int input_dim() const { return layers.front().in_dim(); }
  int output_dim() const { return layers.back().out_dim(); }
  size_t parameter_count() const;
  bool finite() const;

  // First `count` layers as their own net (the feature map of a classifier).
  DenseNet prefix(size_t count) const;
  // Layers from `start` to the end (the output head).
  DenseNet suffix(size_t start) const;
};

// Uniform init in [-a, a] with a = sqrt(6 / (in + out)), per layer.
DenseNet make_dense_net(const std::vector<int>& dims,
                        const std::vector<Activation>& activations, Rng& rng);

// Gradient (or parameter-update) buffers shaped like a net.
struct NetGradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> bias;

  explicit NetGradients(const DenseNet& net);
  void clear();
  void add_scaled(const NetGradients& other, double scale);
};

// Per-layer post-activation values for a batch; acts[0] is the input batch.
struct ForwardCache {
  std::vector<Matrix> acts;
};

// Optional inverted-dropout masks for hidden layers (all layers but the last).
// masks[i] matches the output of layer i; empty matrix = no dropout there.
struct DropoutMasks {
  std::vector<Matrix> masks;
};

std::vector<double> softmax(const std::vector<double>& logits);
void softmax_inplace(double* logits, int k);
double sigmoid(double z);

std::vector<double> forward(const DenseNet& net, const std::vector<double>& x);
Matrix forward_batch(const DenseNet& net, const Matrix& x);
// Forward keeping every layer's activations; masks may be null.
const Matrix& forward_cached(const DenseNet& net, const Matrix& x, ForwardCache& cache,
                             const DropoutMasks* masks = nullptr);

// Backpropagates d(loss)/d(output) through the net. Gradients are assigned,
// not accumulated. When d_input is non-null it receives d(loss)/d(input).
void backward(const DenseNet& net, const ForwardCache& cache, const Matrix& d_output,
              NetGradients& grads, Matrix* d_input = nullptr,
              const DropoutMasks* masks = nullptr);

enum class LossKind {
  SquaredError,        // plain squared error on the raw outputs
  SoftmaxBrier,        // squared error between softmax(logits) and one-hot target
  SoftmaxCrossEntropy, // negative log-likelihood on softmax(logits)
  SigmoidBrier,        // squared error between sigmoid(scalar logit) and target
};

LossKind loss_kind_from_name(const std::string& name);

// Mean weighted loss over the batch and its gradient w.r.t. the raw net
// outputs. `targets` is [n x K] (one-hot for the softmax kinds, values for the
// others); `weights` are per-example and must be nonnegative and finite.
double batch_loss(LossKind kind, const Matrix& outputs, const Matrix& targets,
                  const std::vector<double>& weights, Matrix* d_outputs = nullptr);

// Gradient of the mean weighted loss w.r.t. every parameter.
NetGradients backprop_grad(const DenseNet& net, const Matrix& inputs, const Matrix& targets,
                           const std::vector<double>& weights, LossKind kind);

// Central finite differences; the independent cross-check for backprop_grad.
NetGradients finite_difference_grad(const DenseNet& net, const Matrix& inputs,
                                    const Matrix& targets, const std::vector<double>& weights,
                                    LossKind kind, double step = 1e-5);

// Largest relative gradient error between the two routes.
double gradient_check(const DenseNet& net, const Matrix& inputs, const Matrix& targets,
                      const std::vector<double>& weights, LossKind kind, double step = 1e-5);

struct SgdConfig {
  double learning_rate = 0.1;
  int epochs = 500;
  int batch_size = 64;
  uint64_t seed = 0;
  double dropout = 0.0;  // hidden-layer dropout; used for discriminators only
};

struct TrainTrace {
  std::vector<double> epoch_loss;
};

// Plain SGD with a full reshuffle per epoch. Deterministic per seed. Throws
// DivergedError (naming the epoch) if the loss stops being finite.
DenseNet sgd_train(DenseNet net, const Matrix& inputs, const Matrix& targets,
                   const std::vector<double>& weights, LossKind kind, const SgdConfig& config,
                   TrainTrace* trace = nullptr);

}  // namespace shiftcal
