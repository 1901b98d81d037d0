#include "shiftcal/discriminator.hpp"

#include <algorithm>
#include <cmath>

namespace shiftcal {

DiscriminationSet build_discrimination_set(const Matrix& source_features,
                                           const Matrix& target_features, uint64_t seed) {
  if (source_features.rows == 0 || target_features.rows == 0)
    throw std::invalid_argument("build_discrimination_set: empty pool");
  if (source_features.cols != target_features.cols)
    throw std::invalid_argument("build_discrimination_set: feature dimensions differ");

  Rng rng(seed);
  const int m = std::min(source_features.rows, target_features.rows);
  auto pick = [&](const Matrix& pool) {
    std::vector<int> idx(pool.rows);
    for (int i = 0; i < pool.rows; ++i) idx[i] = i;
    rng.shuffle(idx);
    idx.resize(m);
    return idx;
  };
  std::vector<int> src_idx = pick(source_features);
  std::vector<int> tgt_idx = pick(target_features);

  DiscriminationSet set;
  set.inputs = Matrix(2 * m, source_features.cols);
  set.s.resize(2 * m);
  std::vector<int> order(2 * m);
  for (int i = 0; i < 2 * m; ++i) order[i] = i;
  rng.shuffle(order);
  for (int i = 0; i < 2 * m; ++i) {
    int slot = order[i];
    const Matrix& pool = i < m ? source_features : target_features;
    int row = i < m ? src_idx[i] : tgt_idx[i - m];
    std::copy(pool.row(row), pool.row(row) + pool.cols, set.inputs.row(slot));
    set.s[slot] = i < m ? 1.0 : 0.0;
  }
  return set;
}

DenseNet train_discriminator(const DiscriminationSet& set, const SgdConfig& config, int hidden,
                             TrainTrace* trace) {
  const int d = set.inputs.cols;
  if (hidden <= 0) hidden = d;
  Rng rng(mix_seed(config.seed, 0x6469));
  DenseNet head = make_dense_net({d, hidden, 1}, {Activation::Tanh, Activation::Identity}, rng);
  Matrix targets(set.inputs.rows, 1);
  for (int i = 0; i < set.inputs.rows; ++i) targets.at(i, 0) = set.s[i];
  return sgd_train(std::move(head), set.inputs, targets, {}, LossKind::SigmoidBrier, config,
                   trace);
}

double discrimination_loss(const DenseNet& head, const DiscriminationSet& set,
                           double temperature) {
  Matrix logits = forward_batch(head, set.inputs);
  double loss = 0.0;
  for (int i = 0; i < logits.rows; ++i) {
    double diff = sigmoid(temperature * logits.at(i, 0)) - set.s[i];
    loss += diff * diff;
  }
  return loss / logits.rows;
}

namespace {

// Mean squared loss of sigmoid(T * logit) against s, and d(loss)/d(theta)
// with T = exp(theta), over the index subset.
double sigmoid_temp_loss_grad(const Matrix& logits, const std::vector<double>& s,
                              const std::vector<int>& idx, double theta, double* grad) {
  double T = std::exp(theta);
  double loss = 0.0, g = 0.0;
  for (int i : idx) {
    double z = logits.at(i, 0);
    double sig = sigmoid(T * z);
    double diff = sig - s[i];
    loss += diff * diff;
    g += 2.0 * diff * sig * (1.0 - sig) * z;
  }
  double inv = 1.0 / static_cast<double>(idx.size());
  if (grad) *grad = g * inv * T;
  return loss * inv;
}

}  // namespace

double calibrate_discriminator(const DenseNet& head, const DiscriminationSet& validation,
                               const SgdConfig& config) {
  Matrix logits = forward_batch(head, validation.inputs);
  const int n = logits.rows;
  Rng rng(config.seed);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  double theta = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (int start = 0; start < n; start += config.batch_size) {
      int len = std::min(config.batch_size, n - start);
      std::vector<int> batch(order.begin() + start, order.begin() + start + len);
      double grad = 0.0;
      double loss = sigmoid_temp_loss_grad(logits, validation.s, batch, theta, &grad);
      if (!std::isfinite(loss) || !std::isfinite(grad))
        throw DivergedError("calibrate_discriminator: loss diverged", epoch);
      theta -= config.learning_rate * grad;
    }
  }

  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  double fitted = sigmoid_temp_loss_grad(logits, validation.s, all, theta, nullptr);
  double at_one = sigmoid_temp_loss_grad(logits, validation.s, all, 0.0, nullptr);
  return fitted <= at_one ? std::exp(theta) : 1.0;
}

std::vector<double> predict_g_batch(const SourceDiscriminator& disc, const Matrix& x) {
  Matrix feats = disc.features.apply(x);
  Matrix logits = forward_batch(disc.head, feats);
  double floor = 1.0 / (1.0 + disc.clamp_bound);
  std::vector<double> out(logits.rows);
  for (int i = 0; i < logits.rows; ++i)
    out[i] = std::clamp(sigmoid(disc.temperature * logits.at(i, 0)), floor, 1.0);
  return out;
}

double predict_g(const SourceDiscriminator& disc, const std::vector<double>& x) {
  Matrix m(1, static_cast<int>(x.size()));
  m.data = x;
  return predict_g_batch(disc, m)[0];
}

double weight_from_g(double g) {
  if (!(g > 0.0) || g > 1.0)
    throw std::invalid_argument("weight_from_g: g must lie in (0, 1]");
  return 1.0 / g - 1.0;
}

}  // namespace shiftcal
