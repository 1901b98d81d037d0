#include "shiftcal/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace shiftcal {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation: " + name);
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "squared_error") return LossKind::SquaredError;
  if (name == "brier") return LossKind::SoftmaxBrier;
  if (name == "cross_entropy") return LossKind::SoftmaxCrossEntropy;
  if (name == "sigmoid_brier") return LossKind::SigmoidBrier;
  throw std::invalid_argument("unknown loss kind: " + name);
}

size_t DenseNet::parameter_count() const {
  size_t n = 0;
  for (const auto& l : layers) n += l.weights.data.size() + l.bias.size();
  return n;
}

bool DenseNet::finite() const {
  for (const auto& l : layers) {
    if (!l.weights.finite()) return false;
    for (double b : l.bias)
      if (!std::isfinite(b)) return false;
  }
  return true;
}

DenseNet DenseNet::prefix(size_t count) const {
  DenseNet out;
  out.layers.assign(layers.begin(), layers.begin() + count);
  return out;
}

DenseNet DenseNet::suffix(size_t start) const {
  DenseNet out;
  out.layers.assign(layers.begin() + start, layers.end());
  return out;
}

DenseNet make_dense_net(const std::vector<int>& dims, const std::vector<Activation>& activations,
                        Rng& rng) {
  if (dims.size() < 2 || activations.size() != dims.size() - 1)
    throw std::invalid_argument("layer dims and activations do not chain");
  DenseNet net;
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    DenseLayer layer;
    layer.weights = Matrix(dims[i + 1], dims[i]);
    layer.bias.assign(dims[i + 1], 0.0);
    layer.activation = activations[i];
    double a = std::sqrt(6.0 / (dims[i] + dims[i + 1]));
    for (double& w : layer.weights.data) w = rng.uniform(-a, a);
    for (double& b : layer.bias) b = rng.uniform(-a, a);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

NetGradients::NetGradients(const DenseNet& net) {
  for (const auto& l : net.layers) {
    weights.emplace_back(l.weights.rows, l.weights.cols);
    bias.emplace_back(l.bias.size(), 0.0);
  }
}

void NetGradients::clear() {
  for (auto& w : weights) std::fill(w.data.begin(), w.data.end(), 0.0);
  for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
}

void NetGradients::add_scaled(const NetGradients& other, double scale) {
  for (size_t i = 0; i < weights.size(); ++i) {
    for (size_t j = 0; j < weights[i].data.size(); ++j)
      weights[i].data[j] += scale * other.weights[i].data[j];
    for (size_t j = 0; j < bias[i].size(); ++j) bias[i][j] += scale * other.bias[i][j];
  }
}

void softmax_inplace(double* logits, int k) {
  double mx = logits[0];
  for (int i = 1; i < k; ++i) mx = std::max(mx, logits[i]);
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    logits[i] = std::exp(logits[i] - mx);
    sum += logits[i];
  }
  for (int i = 0; i < k; ++i) logits[i] /= sum;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  for (double z : logits)
    if (!std::isfinite(z)) throw std::invalid_argument("softmax: non-finite logit");
  std::vector<double> out = logits;
  softmax_inplace(out.data(), static_cast<int>(out.size()));
  return out;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

static void apply_activation(Matrix& m, Activation act) {
  switch (act) {
    case Activation::Identity: return;
    case Activation::Tanh:
      for (double& v : m.data) v = std::tanh(v);
      return;
    case Activation::Relu:
      for (double& v : m.data) v = v > 0.0 ? v : 0.0;
      return;
  }
}

const Matrix& forward_cached(const DenseNet& net, const Matrix& x, ForwardCache& cache,
                             const DropoutMasks* masks) {
  if (x.cols != net.input_dim())
    throw std::invalid_argument("forward: input has " + std::to_string(x.cols) +
                                " columns, net expects " + std::to_string(net.input_dim()));
  cache.acts.clear();
  cache.acts.push_back(x);
  for (size_t li = 0; li < net.layers.size(); ++li) {
    const DenseLayer& l = net.layers[li];
    const Matrix& in = cache.acts.back();
    Matrix out(in.rows, l.out_dim());
    for (int r = 0; r < in.rows; ++r) {
      const double* xi = in.row(r);
      double* oi = out.row(r);
      for (int o = 0; o < l.out_dim(); ++o) {
        double acc = l.bias[o];
        const double* wr = l.weights.row(o);
        for (int c = 0; c < l.in_dim(); ++c) acc += wr[c] * xi[c];
        oi[o] = acc;
      }
    }
    apply_activation(out, l.activation);
    if (masks && li < masks->masks.size() && masks->masks[li].rows > 0) {
      const Matrix& m = masks->masks[li];
      for (size_t j = 0; j < out.data.size(); ++j) out.data[j] *= m.data[j];
    }
    cache.acts.push_back(std::move(out));
  }
  return cache.acts.back();
}

Matrix forward_batch(const DenseNet& net, const Matrix& x) {
  ForwardCache cache;
  forward_cached(net, x, cache);
  return std::move(cache.acts.back());
}

std::vector<double> forward(const DenseNet& net, const std::vector<double>& x) {
  Matrix m(1, static_cast<int>(x.size()));
  m.data = x;
  Matrix out = forward_batch(net, m);
  return out.data;
}

void backward(const DenseNet& net, const ForwardCache& cache, const Matrix& d_output,
              NetGradients& grads, Matrix* d_input, const DropoutMasks* masks) {
  Matrix delta = d_output;
  for (int li = static_cast<int>(net.layers.size()) - 1; li >= 0; --li) {
    const DenseLayer& l = net.layers[li];
    const Matrix& post = cache.acts[li + 1];
    const Matrix& in = cache.acts[li];
    if (masks && static_cast<size_t>(li) < masks->masks.size() &&
        masks->masks[li].rows > 0) {
      const Matrix& m = masks->masks[li];
      for (size_t j = 0; j < delta.data.size(); ++j) delta.data[j] *= m.data[j];
    }
    switch (l.activation) {
      case Activation::Identity: break;
      case Activation::Tanh:
        for (size_t j = 0; j < delta.data.size(); ++j)
          delta.data[j] *= 1.0 - post.data[j] * post.data[j];
        break;
      case Activation::Relu:
        for (size_t j = 0; j < delta.data.size(); ++j)
          if (post.data[j] <= 0.0) delta.data[j] = 0.0;
        break;
    }
    Matrix& gw = grads.weights[li];
    std::vector<double>& gb = grads.bias[li];
    std::fill(gw.data.begin(), gw.data.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (int r = 0; r < delta.rows; ++r) {
      const double* dr = delta.row(r);
      const double* xr = in.row(r);
      for (int o = 0; o < l.out_dim(); ++o) {
        double d = dr[o];
        gb[o] += d;
        double* gwr = gw.row(o);
        for (int c = 0; c < l.in_dim(); ++c) gwr[c] += d * xr[c];
      }
    }
    if (li > 0 || d_input) {
      Matrix prev(delta.rows, l.in_dim());
      for (int r = 0; r < delta.rows; ++r) {
        const double* dr = delta.row(r);
        double* pr = prev.row(r);
        for (int o = 0; o < l.out_dim(); ++o) {
          double d = dr[o];
          const double* wr = l.weights.row(o);
          for (int c = 0; c < l.in_dim(); ++c) pr[c] += d * wr[c];
        }
      }
      if (li == 0 && d_input) {
        *d_input = std::move(prev);
      } else {
        delta = std::move(prev);
      }
    }
  }
}

double batch_loss(LossKind kind, const Matrix& outputs, const Matrix& targets,
                  const std::vector<double>& weights, Matrix* d_outputs) {
  if (outputs.rows != targets.rows || static_cast<size_t>(outputs.rows) != weights.size())
    throw std::invalid_argument("batch_loss: batch sizes do not match");
  if (kind != LossKind::SigmoidBrier && outputs.cols != targets.cols)
    throw std::invalid_argument("batch_loss: output/target widths do not match");
  for (double w : weights)
    if (!(w >= 0.0) || !std::isfinite(w))
      throw std::invalid_argument("batch_loss: per-example weights must be nonnegative and finite");

  const int n = outputs.rows;
  const int k = outputs.cols;
  const double inv_n = 1.0 / n;
  if (d_outputs) *d_outputs = Matrix(n, k);
  double total = 0.0;
  std::vector<double> probs(k);

  for (int r = 0; r < n; ++r) {
    const double* z = outputs.row(r);
    const double* y = targets.row(r);
    const double w = weights[r];
    double* dz = d_outputs ? d_outputs->row(r) : nullptr;
    switch (kind) {
      case LossKind::SquaredError: {
        double l = 0.0;
        for (int j = 0; j < k; ++j) {
          double diff = z[j] - y[j];
          l += diff * diff;
          if (dz) dz[j] = inv_n * w * 2.0 * diff;
        }
        total += w * l;
        break;
      }
      case LossKind::SoftmaxBrier: {
        std::copy(z, z + k, probs.begin());
        softmax_inplace(probs.data(), k);
        double l = 0.0, dot = 0.0;
        for (int j = 0; j < k; ++j) {
          double diff = probs[j] - y[j];
          l += diff * diff;
          dot += diff * probs[j];
        }
        if (dz)
          for (int j = 0; j < k; ++j)
            dz[j] = inv_n * w * 2.0 * probs[j] * ((probs[j] - y[j]) - dot);
        total += w * l;
        break;
      }
      case LossKind::SoftmaxCrossEntropy: {
        std::copy(z, z + k, probs.begin());
        softmax_inplace(probs.data(), k);
        double l = 0.0;
        for (int j = 0; j < k; ++j) {
          if (y[j] > 0.0) l -= y[j] * std::log(std::max(probs[j], 1e-300));
          if (dz) dz[j] = inv_n * w * (probs[j] - y[j]);
        }
        total += w * l;
        break;
      }
      case LossKind::SigmoidBrier: {
        if (k != 1) throw std::invalid_argument("sigmoid loss expects a scalar output");
        double s = sigmoid(z[0]);
        double diff = s - y[0];
        if (dz) dz[0] = inv_n * w * 2.0 * diff * s * (1.0 - s);
        total += w * diff * diff;
        break;
      }
    }
  }
  return total * inv_n;
}

NetGradients backprop_grad(const DenseNet& net, const Matrix& inputs, const Matrix& targets,
                           const std::vector<double>& weights, LossKind kind) {
  ForwardCache cache;
  const Matrix& out = forward_cached(net, inputs, cache);
  Matrix d_out;
  double loss = batch_loss(kind, out, targets, weights, &d_out);
  if (!std::isfinite(loss)) throw DivergedError("backprop_grad: non-finite loss", 0);
  NetGradients grads(net);
  backward(net, cache, d_out, grads);
  return grads;
}

NetGradients finite_difference_grad(const DenseNet& net, const Matrix& inputs,
                                    const Matrix& targets, const std::vector<double>& weights,
                                    LossKind kind, double step) {
  DenseNet work = net;
  NetGradients grads(net);
  auto evaluate = [&]() {
    Matrix out = forward_batch(work, inputs);
    return batch_loss(kind, out, targets, weights);
  };
  for (size_t li = 0; li < work.layers.size(); ++li) {
    DenseLayer& l = work.layers[li];
    for (size_t j = 0; j < l.weights.data.size(); ++j) {
      double saved = l.weights.data[j];
      l.weights.data[j] = saved + step;
      double hi = evaluate();
      l.weights.data[j] = saved - step;
      double lo = evaluate();
      l.weights.data[j] = saved;
      grads.weights[li].data[j] = (hi - lo) / (2.0 * step);
    }
    for (size_t j = 0; j < l.bias.size(); ++j) {
      double saved = l.bias[j];
      l.bias[j] = saved + step;
      double hi = evaluate();
      l.bias[j] = saved - step;
      double lo = evaluate();
      l.bias[j] = saved;
      grads.bias[li][j] = (hi - lo) / (2.0 * step);
    }
  }
  return grads;
}

double gradient_check(const DenseNet& net, const Matrix& inputs, const Matrix& targets,
                      const std::vector<double>& weights, LossKind kind, double step) {
  NetGradients bp = backprop_grad(net, inputs, targets, weights, kind);
  NetGradients fd = finite_difference_grad(net, inputs, targets, weights, kind, step);
  double worst = 0.0;
  auto compare = [&](double a, double b) {
    double denom = std::max({std::fabs(a), std::fabs(b), 1e-8});
    worst = std::max(worst, std::fabs(a - b) / denom);
  };
  for (size_t li = 0; li < bp.weights.size(); ++li) {
    for (size_t j = 0; j < bp.weights[li].data.size(); ++j)
      compare(bp.weights[li].data[j], fd.weights[li].data[j]);
    for (size_t j = 0; j < bp.bias[li].size(); ++j) compare(bp.bias[li][j], fd.bias[li][j]);
  }
  return worst;
}

static DropoutMasks draw_dropout_masks(const DenseNet& net, int batch_rows, double rate,
                                       Rng& rng) {
  DropoutMasks masks;
  masks.masks.resize(net.layers.size());
  if (rate <= 0.0) return masks;
  double keep = 1.0 - rate;
  for (size_t li = 0; li + 1 < net.layers.size(); ++li) {
    Matrix m(batch_rows, net.layers[li].out_dim());
    for (double& v : m.data) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
    masks.masks[li] = std::move(m);
  }
  return masks;
}

DenseNet sgd_train(DenseNet net, const Matrix& inputs, const Matrix& targets,
                   const std::vector<double>& weights, LossKind kind, const SgdConfig& config,
                   TrainTrace* trace) {
  if (config.learning_rate <= 0.0) throw std::invalid_argument("learning rate must be positive");
  if (config.epochs < 0) throw std::invalid_argument("epochs must be nonnegative");
  if (config.batch_size < 1) throw std::invalid_argument("batch size must be positive");
  if (config.dropout < 0.0 || config.dropout >= 1.0)
    throw std::invalid_argument("dropout rate must lie in [0, 1)");

  const int n = inputs.rows;
  Rng rng(config.seed);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  NetGradients grads(net);
  ForwardCache cache;
  Matrix batch_x, batch_y, d_out;
  std::vector<double> batch_w;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += config.batch_size) {
      int len = std::min(config.batch_size, n - start);
      batch_x = Matrix(len, inputs.cols);
      batch_y = Matrix(len, targets.cols);
      batch_w.resize(len);
      for (int r = 0; r < len; ++r) {
        int src = order[start + r];
        std::copy(inputs.row(src), inputs.row(src) + inputs.cols, batch_x.row(r));
        std::copy(targets.row(src), targets.row(src) + targets.cols, batch_y.row(r));
        batch_w[r] = weights.empty() ? 1.0 : weights[src];
      }
      DropoutMasks masks = draw_dropout_masks(net, len, config.dropout, rng);
      const Matrix& out = forward_cached(net, batch_x, cache, &masks);
      double loss = batch_loss(kind, out, batch_y, batch_w, &d_out);
      if (!std::isfinite(loss)) throw DivergedError("sgd_train: loss diverged", epoch);
      backward(net, cache, d_out, grads, nullptr, &masks);
      for (size_t li = 0; li < net.layers.size(); ++li) {
        DenseLayer& l = net.layers[li];
        const Matrix& gw = grads.weights[li];
        for (size_t j = 0; j < l.weights.data.size(); ++j)
          l.weights.data[j] -= config.learning_rate * gw.data[j];
        for (size_t j = 0; j < l.bias.size(); ++j)
          l.bias[j] -= config.learning_rate * grads.bias[li][j];
      }
      epoch_loss += loss;
      ++batches;
    }
    if (!net.finite()) throw DivergedError("sgd_train: parameters diverged", epoch);
    if (trace) trace->epoch_loss.push_back(batches ? epoch_loss / batches : 0.0);
  }
  return net;
}

}  // namespace shiftcal
