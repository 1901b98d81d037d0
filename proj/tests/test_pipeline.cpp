#include <doctest.h>

#include <cmath>

#include "shiftcal/pipeline.hpp"
#include "shiftcal/runconfig.hpp"

using namespace shiftcal;

namespace {

StageConfigs desk_stages() {
  StageConfigs s;
  s.classifier.learning_rate = 0.5;
  s.classifier.epochs = 80;
  s.classifier.batch_size = 64;
  s.discriminator.learning_rate = 0.5;
  s.discriminator.epochs = 80;
  s.discriminator.batch_size = 64;
  s.temperature.learning_rate = 0.4;
  s.temperature.epochs = 600;
  s.temperature.batch_size = 1 << 20;
  s.adversarial.min_epochs = 15;
  s.adversarial.max_epochs = 60;
  s.adversarial.stop_below_threshold = false;
  s.classifier_hidden = 8;
  return s;
}

SampleSizes small_sizes() {
  SampleSizes sz;
  sz.source_train = 300;
  sz.source_val = 200;
  sz.target_unlabeled = 300;
  sz.target_eval = 800;
  return sz;
}

}  // namespace

TEST_CASE("run_method Temp produces a forecaster with unit weights") {
  Scenario box = make_box_iid();
  MethodInputs inputs = sample_inputs(box, small_sizes(), 1);
  StageConfigs stages = desk_stages();
  stages.clamp_bound = *box.weight_bound;

  MethodResult res = run_method(Method::Temp, inputs, stages, 1);
  CHECK(res.forecaster.temperature > 0.0);
  CHECK_FALSE(res.discriminator.has_value());
  CHECK_FALSE(res.psi.has_value());
  for (double w : res.validation_weights) CHECK(w == 1.0);
  CHECK(res.report.ece >= 0.0);
  CHECK(res.report.ece <= 1.0);
  CHECK(res.classification_error >= 0.0);

  // argmax invariance on evaluation data
  Matrix logits = forecaster_logits(res.forecaster, inputs.target_eval.features);
  Matrix probs = scaled_probabilities(logits, res.forecaster.temperature);
  for (int i = 0; i < logits.rows; ++i)
    CHECK(argmax_row(logits.row(i), logits.cols) == argmax_row(probs.row(i), probs.cols));
}

TEST_CASE("run_method is deterministic per seed") {
  Scenario box = make_box_shift();
  MethodInputs inputs = sample_inputs(box, small_sizes(), 2);
  StageConfigs stages = desk_stages();
  stages.clamp_bound = *box.weight_bound;

  MethodResult a = run_method(Method::IwTemp, inputs, stages, 5);
  MethodResult b = run_method(Method::IwTemp, inputs, stages, 5);
  CHECK(a.forecaster.temperature == b.forecaster.temperature);
  CHECK(a.report.ece == b.report.ece);
  CHECK(a.validation_weights == b.validation_weights);
  CHECK(a.discriminator->temperature == b.discriminator->temperature);

  MethodResult c = run_method(Method::IwTemp, inputs, stages, 6);
  CHECK(a.forecaster.temperature != c.forecaster.temperature);
}

TEST_CASE("feature-learning variants carry psi through both consumers") {
  Scenario box = make_box_shift();
  MethodInputs inputs = sample_inputs(box, small_sizes(), 3);
  StageConfigs stages = desk_stages();
  stages.clamp_bound = *box.weight_bound;

  MethodResult fl = run_method(Method::FlTemp, inputs, stages, 7);
  REQUIRE(fl.psi.has_value());
  CHECK_FALSE(fl.discriminator.has_value());
  CHECK(fl.forecaster.features.stages.size() == 2);
  CHECK(!fl.psi->retrained_disc.has_value());

  MethodResult full = run_method(Method::FlIwTemp, inputs, stages, 7);
  REQUIRE(full.psi.has_value());
  REQUIRE(full.discriminator.has_value());
  CHECK(full.psi->retrained_disc.has_value());
  // the discriminator operates on psi-composed features, not raw phi
  CHECK(full.discriminator->features.stages.size() == 2);
  CHECK(full.forecaster.features.stages.size() == 2);
  for (double w : full.validation_weights) {
    CHECK(w >= 0.0);
    CHECK(w <= stages.clamp_bound + 1e-12);
  }
}

TEST_CASE("IW weights from the oracle reproduce a hand-built fit") {
  Scenario grid = make_grid_k3();
  const EnumerableDomain& dom = *grid.domain;
  MethodInputs inputs = sample_inputs(grid, small_sizes(), 4);
  StageConfigs stages = desk_stages();

  // hand-built calibration batch: classifier trained exactly as run_method
  // does, weights from the enumeration oracle instead of a learned discriminator
  Rng init_rng(mix_seed(9, 10));
  DenseNet classifier = make_dense_net({2, stages.classifier_hidden, 3},
                                       {Activation::Tanh, Activation::Identity}, init_rng);
  SgdConfig cls = stages.classifier;
  cls.seed = mix_seed(9, 11);
  classifier = sgd_train(std::move(classifier), inputs.source_train.features,
                         one_hot(inputs.source_train.labels, 3), {}, LossKind::SoftmaxBrier, cls);

  CalibrationBatch batch;
  batch.logits = forward_batch(classifier, inputs.source_val.features);
  batch.onehot = one_hot(inputs.source_val.labels, 3);
  batch.weights.resize(inputs.source_val.size());
  for (int i = 0; i < inputs.source_val.size(); ++i) {
    for (int j = 0; j < dom.size(); ++j)
      if (inputs.source_val.features.at(i, 0) == dom.points.at(j, 0) &&
          inputs.source_val.features.at(i, 1) == dom.points.at(j, 1)) {
        batch.weights[i] = oracle_weight(dom, j);
        break;
      }
  }
  SgdConfig tcfg = stages.temperature;
  tcfg.seed = mix_seed(9, 18);
  double t_oracle_weights = fit_temperature(batch, tcfg, CalibrationMode::Recalibration);
  CHECK(t_oracle_weights > 0.0);

  // grid-search oracle over the same weighted objective agrees
  double best_loss = 1e300, best_t = 1.0;
  for (double t = 0.01; t <= 20.0; t += 1e-3) {
    double loss = weighted_brier(batch, t, CalibrationMode::Recalibration);
    if (loss < best_loss) {
      best_loss = loss;
      best_t = t;
    }
  }
  CHECK(std::fabs(t_oracle_weights - best_t) <= 0.01);
}

TEST_CASE("unshifted world: target ECE stays near source ECE for Temp") {
  Scenario iid = make_box_iid();
  StageConfigs stages = desk_stages();
  stages.clamp_bound = 1.0;

  std::vector<double> target_ece, source_ece;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    MethodInputs inputs = sample_inputs(iid, small_sizes(), seed);
    MethodResult res = run_method(Method::Temp, inputs, stages, seed);
    target_ece.push_back(res.report.ece);

    // score the same forecaster on a fresh source-distribution sample
    Dataset src_eval = sample(iid, 800, mix_seed(seed, 99), SampleKind::SourceLabeled);
    Matrix logits = forecaster_logits(res.forecaster, src_eval.features);
    std::vector<int> pred(logits.rows);
    for (int i = 0; i < logits.rows; ++i) pred[i] = argmax_row(logits.row(i), logits.cols);
    source_ece.push_back(reliability_bins(res.forecaster, pred, src_eval, 15).ece);
  }
  double mt = 0.0, ms = 0.0;
  for (size_t i = 0; i < target_ece.size(); ++i) {
    mt += target_ece[i] / target_ece.size();
    ms += source_ece[i] / source_ece.size();
  }
  double var = 0.0;
  for (size_t i = 0; i < target_ece.size(); ++i)
    var += (target_ece[i] - mt) * (target_ece[i] - mt) / (target_ece.size() - 1);
  double band = 2.0 * std::sqrt(var / target_ece.size()) + 0.02;
  CHECK(std::fabs(mt - ms) <= band);
}

TEST_CASE("missing inputs are configuration errors") {
  Scenario box = make_box_shift();
  MethodInputs inputs = sample_inputs(box, small_sizes(), 5);
  inputs.target_unlabeled = Dataset{};
  StageConfigs stages = desk_stages();
  CHECK_THROWS_AS(run_method(Method::IwTemp, inputs, stages, 1), std::invalid_argument);

  MethodInputs unlabeled = sample_inputs(box, small_sizes(), 6);
  unlabeled.source_train.labels.clear();
  CHECK_THROWS_AS(run_method(Method::Temp, unlabeled, stages, 1), std::invalid_argument);
}

TEST_CASE("run config parsing") {
  const char* text = R"({
    "scenario": "box-shift",
    "methods": ["Temp", "IW+Temp"],
    "seeds": [1, 2],
    "data_seed": 7,
    "samples": {"source_train": 100, "source_val": 80, "target_unlabeled": 100, "target_eval": 200},
    "classifier": {"hidden": 6, "epochs": 40, "learning_rate": 0.5, "batch_size": 32},
    "temperature": {"epochs": 200},
    "clamp_bound": "auto",
    "zero_timing": true
  })";
  RunConfig cfg = RunConfig::from_json_text(text);
  CHECK(cfg.methods.size() == 2);
  CHECK(cfg.seeds == std::vector<uint64_t>{1, 2});
  CHECK(cfg.data_seed == 7);
  CHECK(cfg.samples.source_val == 80);
  CHECK(cfg.stages.classifier_hidden == 6);
  CHECK(cfg.stages.temperature.epochs == 200);
  CHECK(cfg.zero_timing);

  StageConfigs resolved;
  MethodInputs inputs = cfg.make_inputs(resolved);
  CHECK(inputs.source_train.size() == 100);
  CHECK(inputs.classes == 3);
  // auto clamp picked the scenario's known bound
  CHECK(resolved.clamp_bound == doctest::Approx(*make_box_shift().weight_bound));

  CHECK_THROWS(RunConfig::from_json_text("{\"scenario\":\"box-shift\",\"seeds\":[]}"));
  CHECK_THROWS(RunConfig::from_json_text("{\"seeds\":[1]}"));
}
