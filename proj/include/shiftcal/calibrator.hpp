#pragma once

#include <string>
#include <vector>

#include "shiftcal/discriminator.hpp"
#include "shiftcal/numerics.hpp"

namespace shiftcal {

enum class CalibrationMode { Full, Recalibration };

const char* calibration_mode_name(CalibrationMode m);
CalibrationMode calibration_mode_from_name(const std::string& name);

// Probability forecaster: softmax of temperature-scaled head logits over
// pipelined features. The temperature multiplies the logits, so it never
// changes the argmax.
struct Forecaster {
  FeaturePipeline features;
  DenseNet head;  // K logits
  double temperature = 1.0;
  CalibrationMode mode = CalibrationMode::Recalibration;

  int classes() const { return head.output_dim(); }
};

std::vector<double> predict(const Forecaster& forecaster, const std::vector<double>& x);
// Raw (T = 1) head logits for a batch of inputs.
Matrix forecaster_logits(const Forecaster& forecaster, const Matrix& x);
// softmax(T * logits) rows.
Matrix scaled_probabilities(const Matrix& logits, double temperature);

// Lowest index wins ties.
int argmax_row(const double* row, int k);

struct CalibrationBatch {
  Matrix logits;            // [n x K]
  Matrix onehot;            // [n x K]
  std::vector<double> weights;  // estimated importance weights; all-ones for plain Temp

  int size() const { return logits.rows; }
};

// Mean of (w + 1/2) * squared forecast error at temperature T. Full mode uses
// the whole probability vector; recalibration mode only the predicted label's
// coordinate. The factor w + 1/2 equals 1/g - 1/2 for w = 1/g - 1.
double weighted_brier(const CalibrationBatch& batch, double temperature, CalibrationMode mode);

// SGD on log(T); the result never does worse than T = 1 on the batch.
double fit_temperature(const CalibrationBatch& batch, const SgdConfig& config,
                       CalibrationMode mode);

}  // namespace shiftcal
