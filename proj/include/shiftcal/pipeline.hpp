#pragma once

#include <optional>
#include <string>
#include <vector>

#include "shiftcal/calibrator.hpp"
#include "shiftcal/featlearn.hpp"
#include "shiftcal/metrics.hpp"
#include "shiftcal/scenarios.hpp"

namespace shiftcal {

enum class Method { Temp, IwTemp, FlTemp, FlIwTemp };

const char* method_name(Method m);
Method method_from_name(const std::string& name);
bool method_uses_weights(Method m);
bool method_uses_featlearn(Method m);

struct MethodInputs {
  Dataset source_train;     // labeled
  Dataset source_val;       // labeled
  Dataset target_unlabeled; // unlabeled
  Dataset target_eval;      // labeled, evaluation only
  int classes = 0;

  void validate(Method method) const;
};

struct StageConfigs {
  SgdConfig classifier;
  SgdConfig discriminator;
  SgdConfig temperature;
  AdversarialConfig adversarial;
  int classifier_hidden = 8;
  int discriminator_hidden = 0;  // 0 = feature dimension
  LossKind classifier_loss = LossKind::SoftmaxBrier;
  CalibrationMode mode = CalibrationMode::Recalibration;
  double clamp_bound = 99.0;  // U
  int bins = 15;
};

struct StageTimings {
  double classifier_ms = 0.0;
  double featlearn_ms = 0.0;
  double discriminator_ms = 0.0;
  double temperature_ms = 0.0;
  double evaluation_ms = 0.0;
  double total_ms = 0.0;
};

struct MethodResult {
  Method method = Method::Temp;
  Forecaster forecaster;
  std::optional<SourceDiscriminator> discriminator;
  std::optional<PsiArtifacts> psi;
  EceReport report;
  double classification_error = 0.0;  // argmax error rate on the eval set
  std::vector<double> validation_weights;  // weights used for temperature fitting
  StageTimings timings;
};

// Executes one calibration variant end to end: classifier training, optional
// feature learning and discriminator calibration, temperature fitting, and
// evaluation on the held-out labeled target data.
MethodResult run_method(Method method, const MethodInputs& inputs, const StageConfigs& configs,
                        uint64_t seed);

// Sampled inputs for a built-in scenario, drawn once per data seed.
struct SampleSizes {
  int source_train = 600;
  int source_val = 400;
  int target_unlabeled = 600;
  int target_eval = 3000;
};

MethodInputs sample_inputs(const Scenario& scenario, const SampleSizes& sizes,
                           uint64_t data_seed);

}  // namespace shiftcal
