#include "shiftcal/calibrator.hpp"

#include <algorithm>
#include <cmath>

namespace shiftcal {

const char* calibration_mode_name(CalibrationMode m) {
  return m == CalibrationMode::Full ? "full" : "recalibration";
}

CalibrationMode calibration_mode_from_name(const std::string& name) {
  if (name == "full") return CalibrationMode::Full;
  if (name == "recalibration") return CalibrationMode::Recalibration;
  throw std::invalid_argument("unknown calibration mode: " + name);
}

int argmax_row(const double* row, int k) {
  int best = 0;
  for (int j = 1; j < k; ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

Matrix forecaster_logits(const Forecaster& forecaster, const Matrix& x) {
  Matrix feats = forecaster.features.apply(x);
  return forward_batch(forecaster.head, feats);
}

Matrix scaled_probabilities(const Matrix& logits, double temperature) {
  Matrix probs = logits;
  for (double& v : probs.data) v *= temperature;
  for (int r = 0; r < probs.rows; ++r) softmax_inplace(probs.row(r), probs.cols);
  return probs;
}

std::vector<double> predict(const Forecaster& forecaster, const std::vector<double>& x) {
  Matrix m(1, static_cast<int>(x.size()));
  m.data = x;
  Matrix probs = scaled_probabilities(forecaster_logits(forecaster, m), forecaster.temperature);
  return probs.data;
}

namespace {

// Loss and d(loss)/d(theta) with T = exp(theta) over an index subset.
double brier_loss_grad(const CalibrationBatch& batch, CalibrationMode mode,
                       const std::vector<int>& pred, const std::vector<int>& idx, double theta,
                       double* grad) {
  const double T = std::exp(theta);
  const int K = batch.logits.cols;
  std::vector<double> probs(K);
  double loss = 0.0, g = 0.0;
  for (int i : idx) {
    const double* z = batch.logits.row(i);
    const double* y = batch.onehot.row(i);
    const double factor = batch.weights[i] + 0.5;
    for (int j = 0; j < K; ++j) probs[j] = T * z[j];
    softmax_inplace(probs.data(), K);
    double zbar = 0.0;
    for (int j = 0; j < K; ++j) zbar += probs[j] * z[j];
    if (mode == CalibrationMode::Full) {
      for (int j = 0; j < K; ++j) {
        double diff = probs[j] - y[j];
        loss += factor * diff * diff;
        g += factor * 2.0 * diff * probs[j] * (z[j] - zbar);
      }
    } else {
      int k = pred[i];
      double diff = probs[k] - y[k];
      loss += factor * diff * diff;
      g += factor * 2.0 * diff * probs[k] * (z[k] - zbar);
    }
  }
  double inv = 1.0 / static_cast<double>(idx.size());
  if (grad) *grad = g * inv * T;
  return loss * inv;
}

std::vector<int> predicted_labels(const Matrix& logits) {
  std::vector<int> pred(logits.rows);
  for (int i = 0; i < logits.rows; ++i) pred[i] = argmax_row(logits.row(i), logits.cols);
  return pred;
}

}  // namespace

double weighted_brier(const CalibrationBatch& batch, double temperature, CalibrationMode mode) {
  if (!(temperature > 0.0)) throw std::invalid_argument("weighted_brier: T must be positive");
  std::vector<int> idx(batch.size());
  for (int i = 0; i < batch.size(); ++i) idx[i] = i;
  return brier_loss_grad(batch, mode, predicted_labels(batch.logits), idx,
                         std::log(temperature), nullptr);
}

double fit_temperature(const CalibrationBatch& batch, const SgdConfig& config,
                       CalibrationMode mode) {
  if (batch.size() == 0) throw std::invalid_argument("fit_temperature: empty batch");
  for (double w : batch.weights)
    if (!(w >= 0.0) || !std::isfinite(w))
      throw std::invalid_argument("fit_temperature: weights must be nonnegative and finite");

  const int n = batch.size();
  std::vector<int> pred = predicted_labels(batch.logits);
  Rng rng(config.seed);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  double theta = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (int start = 0; start < n; start += config.batch_size) {
      int len = std::min(config.batch_size, n - start);
      std::vector<int> idx(order.begin() + start, order.begin() + start + len);
      double grad = 0.0;
      double loss = brier_loss_grad(batch, mode, pred, idx, theta, &grad);
      if (!std::isfinite(loss) || !std::isfinite(grad))
        throw DivergedError("fit_temperature: loss diverged", epoch);
      theta -= config.learning_rate * grad;
    }
  }

  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  double fitted = brier_loss_grad(batch, mode, pred, all, theta, nullptr);
  double at_one = brier_loss_grad(batch, mode, pred, all, 0.0, nullptr);
  return fitted <= at_one ? std::exp(theta) : 1.0;
}

}  // namespace shiftcal
