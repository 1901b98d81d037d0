#pragma once

#include <vector>

#include "shiftcal/common.hpp"
#include "shiftcal/numerics.hpp"

namespace shiftcal {

// Feature stages applied in order before a head net: the classifier's feature
// map, optionally followed by the learned auxiliary map.
struct FeaturePipeline {
  std::vector<DenseNet> stages;

  Matrix apply(const Matrix& x) const {
    Matrix cur = x;
    for (const auto& stage : stages) cur = forward_batch(stage, cur);
    return cur;
  }
  int output_dim(int input_dim) const {
    return stages.empty() ? input_dim : stages.back().output_dim();
  }
};

// Binary source-vs-target scorer with its temperature and clamp bound.
struct SourceDiscriminator {
  FeaturePipeline features;
  DenseNet head;              // scalar logit, sigmoid applied at prediction time
  double temperature = 1.0;
  double clamp_bound = 99.0;  // U; predictions live in [1/(1+U), 1]
};

struct DiscriminationSet {
  Matrix inputs;
  std::vector<double> s;  // 1 = source, 0 = target; counts are equal
};

// Subsamples the larger pool (without replacement) to the smaller pool's size
// and shuffles the combined set.
DiscriminationSet build_discrimination_set(const Matrix& source_features,
                                           const Matrix& target_features, uint64_t seed);

// A fresh head minimizing the squared discrimination loss on the set. The head
// has one tanh hidden layer; width defaults to the input dimension.
DenseNet train_discriminator(const DiscriminationSet& set, const SgdConfig& config,
                             int hidden = 0, TrainTrace* trace = nullptr);

// Temperature for the trained head, fit by SGD on the validation set. The
// returned T_g never does worse than T_g = 1 on that set.
double calibrate_discriminator(const DenseNet& head, const DiscriminationSet& validation,
                               const SgdConfig& config);

double discrimination_loss(const DenseNet& head, const DiscriminationSet& set,
                           double temperature = 1.0);

// sigmoid(T_g * head logit), clamped to [1/(1+U), 1].
double predict_g(const SourceDiscriminator& disc, const std::vector<double>& x);
std::vector<double> predict_g_batch(const SourceDiscriminator& disc, const Matrix& x);

// w = 1/g - 1. Composed with predict_g the result lies in [0, U].
double weight_from_g(double g);

}  // namespace shiftcal
