#pragma once

#include <optional>
#include <string>
#include <vector>

#include "shiftcal/common.hpp"
#include "shiftcal/numerics.hpp"

namespace shiftcal {

struct AdversarialConfig {
  double lambda_d = 0.5;          // adversarial trade-off coefficient
  int disc_steps_per_gen = 2;     // discriminator updates per generator update
  double stop_threshold = 0.2;    // tau
  // Literal reading halts when the discriminator's training loss drops below
  // tau (features most distinguishable). The inverted reading halts when the
  // loss rises above tau (features aligned). Both are supported.
  bool stop_below_threshold = true;
  int min_epochs = 40;            // stop rules engage only after this
  int max_epochs = 150;
  double confident_hi = 0.95;     // early stop: mean output on source pool above this
  double confident_lo = 0.05;     // ... and on target pool below this
  int confident_patience = 5;     // ... for this many consecutive epochs
  double dropout = 0.0;           // discriminator hidden-layer dropout
  double gen_learning_rate = 0.15;
  double disc_learning_rate = 0.5;
  int batch_size = 64;
  uint64_t seed = 0;

  void validate() const {
    if (lambda_d < 0.0) throw std::invalid_argument("lambda_d must be nonnegative");
    if (!(stop_threshold > 0.0) || stop_threshold > 0.25)
      throw std::invalid_argument("stop threshold must lie in (0, 0.25]");
    if (disc_steps_per_gen < 1)
      throw std::invalid_argument("discriminator steps per generator step must be positive");
  }
};

struct PsiArtifacts {
  DenseNet psi;                        // auxiliary feature map
  DenseNet label_head;                 // K-logit predictor on psi features
  DenseNet disc_head;                  // adversarial-phase discriminator head
  std::optional<DenseNet> retrained_disc;  // fresh head on the frozen psi features
  std::vector<double> label_loss_trace;
  std::vector<double> disc_loss_trace;
  std::string halt_reason;             // "threshold", "early_stop" or "max_epochs"
  bool degenerate = false;             // set by the pipeline's label-utility guard
};

// Adversarial training of (psi, label head) against a discriminator head:
// the discriminator minimizes the squared discrimination loss on psi features;
// the generator pair minimizes label Brier loss minus lambda_d times the
// discrimination loss. psi mirrors the forecaster head (one affine layer,
// width = feature dimension) and starts at the identity, so when a label head
// is supplied as the warm start the learned forecaster begins exactly at the
// classifier being recalibrated. Deterministic per config seed.
PsiArtifacts train_indistinguishable(const Matrix& source_features, const Matrix& source_onehot,
                                     const Matrix& target_features,
                                     const AdversarialConfig& config,
                                     const DenseNet* label_head_init = nullptr);

// Fresh discriminator head trained on the frozen psi features of both pools.
DenseNet retrain_discriminator(const DenseNet& psi, const Matrix& source_features,
                               const Matrix& target_features, const SgdConfig& config);

}  // namespace shiftcal
