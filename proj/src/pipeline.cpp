#include "shiftcal/pipeline.hpp"

#include <chrono>
#include <cmath>

namespace shiftcal {

const char* method_name(Method m) {
  switch (m) {
    case Method::Temp: return "Temp";
    case Method::IwTemp: return "IW+Temp";
    case Method::FlTemp: return "FL+Temp";
    case Method::FlIwTemp: return "FL+IW+Temp";
  }
  return "Temp";
}

Method method_from_name(const std::string& name) {
  if (name == "Temp") return Method::Temp;
  if (name == "IW+Temp") return Method::IwTemp;
  if (name == "FL+Temp") return Method::FlTemp;
  if (name == "FL+IW+Temp") return Method::FlIwTemp;
  throw std::invalid_argument("unknown method: " + name);
}

bool method_uses_weights(Method m) { return m == Method::IwTemp || m == Method::FlIwTemp; }
bool method_uses_featlearn(Method m) { return m == Method::FlTemp || m == Method::FlIwTemp; }

void MethodInputs::validate(Method method) const {
  if (!source_train.labeled() || !source_val.labeled())
    throw std::invalid_argument("source train and validation data must be labeled");
  if (target_eval.size() > 0 && !target_eval.labeled())
    throw std::invalid_argument("target evaluation data must be labeled");
  if ((method_uses_weights(method) || method_uses_featlearn(method)) &&
      target_unlabeled.size() == 0)
    throw std::invalid_argument(std::string(method_name(method)) +
                                " needs unlabeled target data");
  if (classes < 2) throw std::invalid_argument("need at least two classes");
}

MethodInputs sample_inputs(const Scenario& scenario, const SampleSizes& sizes,
                           uint64_t data_seed) {
  MethodInputs inputs;
  inputs.source_train =
      sample(scenario, sizes.source_train, mix_seed(data_seed, 1), SampleKind::SourceLabeled);
  inputs.source_val =
      sample(scenario, sizes.source_val, mix_seed(data_seed, 2), SampleKind::SourceLabeled);
  inputs.target_unlabeled = sample(scenario, sizes.target_unlabeled, mix_seed(data_seed, 3),
                                   SampleKind::TargetUnlabeled);
  inputs.target_eval =
      sample(scenario, sizes.target_eval, mix_seed(data_seed, 4), SampleKind::TargetLabeledEval);
  inputs.classes = scenario.classes;
  return inputs;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Matrix take_rows(const Matrix& m, int start, int count) {
  Matrix out(count, m.cols);
  for (int r = 0; r < count; ++r)
    std::copy(m.row(start + r), m.row(start + r) + m.cols, out.row(r));
  return out;
}

double accuracy_against(const Matrix& logits, const std::vector<int>& labels) {
  int hits = 0;
  for (int i = 0; i < logits.rows; ++i)
    if (argmax_row(logits.row(i), logits.cols) == labels[i]) ++hits;
  return static_cast<double>(hits) / logits.rows;
}

}  // namespace

MethodResult run_method(Method method, const MethodInputs& inputs, const StageConfigs& configs,
                        uint64_t seed) {
  inputs.validate(method);
  MethodResult result;
  result.method = method;
  auto total_start = Clock::now();

  // Base classifier; its hidden layer is the feature map phi.
  auto stage_start = Clock::now();
  const int d = inputs.source_train.dim();
  const int K = inputs.classes;
  Rng init_rng(mix_seed(seed, 10));
  DenseNet classifier =
      make_dense_net({d, configs.classifier_hidden, K}, {Activation::Tanh, Activation::Identity},
                     init_rng);
  SgdConfig cls_config = configs.classifier;
  cls_config.seed = mix_seed(seed, 11);
  classifier = sgd_train(std::move(classifier), inputs.source_train.features,
                         one_hot(inputs.source_train.labels, K), {}, configs.classifier_loss,
                         cls_config);
  DenseNet phi = classifier.prefix(classifier.layers.size() - 1);
  DenseNet output_head = classifier.suffix(classifier.layers.size() - 1);
  result.timings.classifier_ms = ms_since(stage_start);

  FeaturePipeline pipeline;
  pipeline.stages.push_back(phi);
  DenseNet head = output_head;

  Matrix phi_train = forward_batch(phi, inputs.source_train.features);
  Matrix phi_target;
  if (inputs.target_unlabeled.size() > 0)
    phi_target = forward_batch(phi, inputs.target_unlabeled.features);
  const int target_half = inputs.target_unlabeled.size() / 2;

  // Indistinguishable feature learning replaces the head and extends the
  // pipeline with psi.
  if (method_uses_featlearn(method)) {
    stage_start = Clock::now();
    AdversarialConfig adv = configs.adversarial;
    adv.seed = mix_seed(seed, 12);
    Matrix target_pool = take_rows(phi_target, 0, target_half);
    PsiArtifacts art = train_indistinguishable(
        phi_train, one_hot(inputs.source_train.labels, K), target_pool, adv, &output_head);

    // Label-utility guard: the learned predictor must stay close to the base
    // classifier's source-validation accuracy.
    Matrix phi_val = forward_batch(phi, inputs.source_val.features);
    Matrix base_logits = forward_batch(output_head, phi_val);
    Matrix fl_logits = forward_batch(art.label_head, forward_batch(art.psi, phi_val));
    double drop = accuracy_against(base_logits, inputs.source_val.labels) -
                  accuracy_against(fl_logits, inputs.source_val.labels);
    art.degenerate = drop > 0.10;

    if (method == Method::FlIwTemp) {
      SgdConfig disc_config = configs.discriminator;
      disc_config.seed = mix_seed(seed, 13);
      art.retrained_disc = retrain_discriminator(art.psi, phi_train, target_pool, disc_config);
    }
    head = art.label_head;
    pipeline.stages.push_back(art.psi);
    result.psi = std::move(art);
    result.timings.featlearn_ms = ms_since(stage_start);
  }

  // Discriminator-calibrated importance weights for the validation pool.
  std::vector<double> weights(inputs.source_val.size(), 1.0);
  if (method_uses_weights(method)) {
    stage_start = Clock::now();
    Matrix feat_train = pipeline.apply(inputs.source_train.features);
    Matrix feat_val = pipeline.apply(inputs.source_val.features);
    Matrix feat_tgt = pipeline.apply(inputs.target_unlabeled.features);

    SourceDiscriminator disc;
    disc.features = pipeline;
    disc.clamp_bound = configs.clamp_bound;
    if (method == Method::FlIwTemp) {
      disc.head = *result.psi->retrained_disc;
    } else {
      DiscriminationSet train_set =
          build_discrimination_set(feat_train, take_rows(feat_tgt, 0, target_half),
                                   mix_seed(seed, 14));
      SgdConfig disc_config = configs.discriminator;
      disc_config.seed = mix_seed(seed, 15);
      disc.head = train_discriminator(train_set, disc_config, configs.discriminator_hidden);
    }

    DiscriminationSet cal_set = build_discrimination_set(
        feat_val, take_rows(feat_tgt, target_half, inputs.target_unlabeled.size() - target_half),
        mix_seed(seed, 16));
    SgdConfig temp_config = configs.temperature;
    temp_config.seed = mix_seed(seed, 17);
    disc.temperature = calibrate_discriminator(disc.head, cal_set, temp_config);

    std::vector<double> g = predict_g_batch(disc, inputs.source_val.features);
    for (size_t i = 0; i < g.size(); ++i) weights[i] = weight_from_g(g[i]);
    result.discriminator = std::move(disc);
    result.timings.discriminator_ms = ms_since(stage_start);
  }

  // Temperature fitting on the source validation pool.
  stage_start = Clock::now();
  result.forecaster.features = pipeline;
  result.forecaster.head = head;
  result.forecaster.mode = configs.mode;
  CalibrationBatch batch;
  batch.logits = forecaster_logits(result.forecaster, inputs.source_val.features);
  batch.onehot = one_hot(inputs.source_val.labels, K);
  batch.weights = weights;
  SgdConfig temp_config = configs.temperature;
  temp_config.seed = mix_seed(seed, 18);
  result.forecaster.temperature = fit_temperature(batch, temp_config, configs.mode);
  result.validation_weights = std::move(weights);
  result.timings.temperature_ms = ms_since(stage_start);

  // Evaluation on the held-out labeled target data.
  stage_start = Clock::now();
  if (inputs.target_eval.size() > 0) {
    Matrix logits = forecaster_logits(result.forecaster, inputs.target_eval.features);
    std::vector<int> pred(logits.rows);
    for (int i = 0; i < logits.rows; ++i) pred[i] = argmax_row(logits.row(i), logits.cols);
    result.report = reliability_bins(result.forecaster, pred, inputs.target_eval, configs.bins);
    int misses = 0;
    for (int i = 0; i < logits.rows; ++i)
      if (pred[i] != inputs.target_eval.labels[i]) ++misses;
    result.classification_error = static_cast<double>(misses) / logits.rows;
  }
  result.timings.evaluation_ms = ms_since(stage_start);
  result.timings.total_ms = ms_since(total_start);
  return result;
}

}  // namespace shiftcal
