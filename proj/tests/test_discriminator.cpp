#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "shiftcal/discriminator.hpp"
#include "shiftcal/scenarios.hpp"

using namespace shiftcal;

namespace {

Matrix gaussian_pool(int n, int d, uint64_t seed, double shift = 0.0) {
  Rng rng(seed);
  Matrix m(n, d);
  for (double& v : m.data) v = rng.normal() + shift;
  return m;
}

}  // namespace

TEST_CASE("build_discrimination_set balances and subsamples") {
  Matrix src = gaussian_pool(100, 3, 1);
  Matrix tgt = gaussian_pool(100, 3, 2);
  DiscriminationSet set = build_discrimination_set(src, tgt, 7);
  CHECK(set.inputs.rows == 200);
  CHECK(std::count(set.s.begin(), set.s.end(), 1.0) == 100);
  CHECK(std::count(set.s.begin(), set.s.end(), 0.0) == 100);

  Matrix big = gaussian_pool(300, 3, 3);
  DiscriminationSet sub = build_discrimination_set(big, tgt, 7);
  CHECK(sub.inputs.rows == 200);
  CHECK(std::count(sub.s.begin(), sub.s.end(), 1.0) == 100);

  DiscriminationSet again = build_discrimination_set(big, tgt, 7);
  CHECK(sub.inputs.data == again.inputs.data);
  CHECK(sub.s == again.s);

  Matrix bad = gaussian_pool(10, 2, 4);
  CHECK_THROWS_AS(build_discrimination_set(src, bad, 1), std::invalid_argument);
}

TEST_CASE("discriminator training loss floors and separable fits") {
  // identical distributions: nothing to learn, loss stays near the 0.25 floor
  Matrix src = gaussian_pool(300, 2, 10);
  Matrix tgt = gaussian_pool(300, 2, 11);
  DiscriminationSet set = build_discrimination_set(src, tgt, 5);
  SgdConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.epochs = 120;
  cfg.batch_size = 64;
  cfg.seed = 2;
  DenseNet head = train_discriminator(set, cfg);
  CHECK(discrimination_loss(head, set) >= 0.20);

  // linearly separated pools
  Matrix far = gaussian_pool(300, 2, 12, 6.0);
  DiscriminationSet sep = build_discrimination_set(src, far, 5);
  DenseNet head2 = train_discriminator(sep, cfg);
  CHECK(discrimination_loss(head2, sep) <= 0.05);
}

TEST_CASE("zero-epoch training returns the data-independent initialization") {
  SgdConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 9;
  Matrix a = gaussian_pool(20, 2, 1);
  Matrix b = gaussian_pool(20, 2, 2, 3.0);
  DenseNet h1 = train_discriminator(build_discrimination_set(a, b, 1), cfg);
  DenseNet h2 = train_discriminator(build_discrimination_set(b, a, 8), cfg);
  for (size_t li = 0; li < h1.layers.size(); ++li) {
    CHECK(h1.layers[li].weights.data == h2.layers[li].weights.data);
    CHECK(h1.layers[li].bias == h2.layers[li].bias);
  }
}

namespace {

double grid_best_temperature(const DenseNet& head, const DiscriminationSet& set) {
  double best_loss = 1e300, best_t = 1.0;
  Matrix logits = forward_batch(head, set.inputs);
  for (double t = 0.01; t <= 100.0; t += 1e-3) {
    double loss = 0.0;
    for (int i = 0; i < logits.rows; ++i) {
      double diff = sigmoid(t * logits.at(i, 0)) - set.s[i];
      loss += diff * diff;
    }
    loss /= logits.rows;
    if (loss < best_loss) {
      best_loss = loss;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace

TEST_CASE("discriminator temperature calibration") {
  Matrix src = gaussian_pool(400, 2, 20);
  Matrix tgt = gaussian_pool(400, 2, 21, 1.5);
  DiscriminationSet train_set = build_discrimination_set(src, tgt, 3);
  SgdConfig fit_cfg;
  fit_cfg.learning_rate = 0.5;
  fit_cfg.epochs = 150;
  fit_cfg.batch_size = 64;
  fit_cfg.seed = 6;
  DenseNet head = train_discriminator(train_set, fit_cfg);

  Matrix src_v = gaussian_pool(400, 2, 22);
  Matrix tgt_v = gaussian_pool(400, 2, 23, 1.5);
  DiscriminationSet val = build_discrimination_set(src_v, tgt_v, 4);

  SgdConfig temp_cfg;
  temp_cfg.learning_rate = 0.4;
  temp_cfg.epochs = 1500;
  temp_cfg.batch_size = 1 << 20;
  temp_cfg.seed = 1;
  double tg = calibrate_discriminator(head, val, temp_cfg);
  double oracle = grid_best_temperature(head, val);
  CHECK(std::fabs(tg - oracle) <= 0.01);

  // over-confident head: logits scaled by 10 want a temperature below 1
  DenseNet hot = head;
  for (double& w : hot.layers.back().weights.data) w *= 10.0;
  for (double& b : hot.layers.back().bias) b *= 10.0;
  double tg_hot = calibrate_discriminator(hot, val, temp_cfg);
  CHECK(tg_hot < 1.0);
  CHECK(std::fabs(tg_hot - grid_best_temperature(hot, val)) <= 0.01);

  // fitted temperature never loses to T = 1 on the validation set
  CHECK(discrimination_loss(head, val, tg) <= discrimination_loss(head, val, 1.0) + 1e-9);
}

TEST_CASE("predict_g clamps and preserves order") {
  // identity head: the input is the logit
  SourceDiscriminator disc;
  DenseLayer l;
  l.weights = Matrix(1, 1);
  l.weights.at(0, 0) = 1.0;
  l.bias = {0.0};
  l.activation = Activation::Identity;
  disc.head.layers.push_back(l);
  disc.temperature = 1.0;
  disc.clamp_bound = 9.0;

  auto logit = [](double p) { return std::log(p / (1.0 - p)); };
  CHECK(predict_g(disc, {logit(0.001)}) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(predict_g(disc, {logit(0.8)}) == doctest::Approx(0.8).epsilon(1e-9));

  // any positive temperature preserves the ordering of scores
  Matrix xs(5, 1);
  for (int i = 0; i < 5; ++i) xs.at(i, 0) = -2.0 + i;
  for (double t : {0.1, 1.0, 7.0}) {
    disc.temperature = t;
    std::vector<double> g = predict_g_batch(disc, xs);
    for (int i = 1; i < 5; ++i) CHECK(g[i] >= g[i - 1]);
    CHECK(*std::min_element(g.begin(), g.end()) >= 1.0 / (1.0 + disc.clamp_bound));
    CHECK(*std::max_element(g.begin(), g.end()) <= 1.0);
  }
}

TEST_CASE("weight_from_g closed forms and round trip") {
  CHECK(weight_from_g(0.5) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(weight_from_g(1.0) == 0.0);
  double U = 9.0;
  CHECK(weight_from_g(1.0 / (1.0 + U)) == doctest::Approx(U).epsilon(1e-12));
  CHECK_THROWS_AS(weight_from_g(0.0), std::invalid_argument);
  CHECK_THROWS_AS(weight_from_g(-0.2), std::invalid_argument);

  for (double w : {0.0, 1e-6, 1.0, 10.0, 1e6}) {
    double back = weight_from_g(1.0 / (1.0 + w));
    CHECK(std::fabs(back - w) <= 1e-12 * std::max(1.0, w));
  }
}

TEST_CASE("discriminator approaches the oracle on grid-K3") {
  Scenario grid = make_grid_k3();
  const EnumerableDomain& dom = *grid.domain;
  const int n = 20000;
  Dataset src = sample(grid, n, 100, SampleKind::SourceLabeled);
  Dataset tgt = sample(grid, n, 101, SampleKind::TargetUnlabeled);

  DiscriminationSet set = build_discrimination_set(src.features, tgt.features, 9);
  SgdConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.epochs = 60;
  cfg.batch_size = 128;
  cfg.seed = 3;
  DenseNet head = train_discriminator(set, cfg, 16);

  SourceDiscriminator disc;
  disc.head = head;
  disc.clamp_bound = dom.max_weight();
  std::vector<double> g = predict_g_batch(disc, dom.points);
  double err = 0.0;
  for (int i = 0; i < dom.size(); ++i) err += std::fabs(g[i] - oracle_discriminator(dom, i));
  err /= dom.size();
  CHECK(err <= 0.05);

  // Bayes optimality of the oracle: the empirical discrimination loss of any
  // learned head cannot beat the oracle's by more than the sampling noise.
  double learned = 0.0, bayes = 0.0;
  Matrix logits = forward_batch(head, set.inputs);
  for (int i = 0; i < set.inputs.rows; ++i) {
    double diff = sigmoid(logits.at(i, 0)) - set.s[i];
    learned += diff * diff;
    // look up the point to get the oracle value
    for (int j = 0; j < dom.size(); ++j)
      if (set.inputs.at(i, 0) == dom.points.at(j, 0) &&
          set.inputs.at(i, 1) == dom.points.at(j, 1)) {
        double d2 = oracle_discriminator(dom, j) - set.s[i];
        bayes += d2 * d2;
        break;
      }
  }
  learned /= set.inputs.rows;
  bayes /= set.inputs.rows;
  CHECK(learned >= bayes - 3.0 / std::sqrt(static_cast<double>(set.inputs.rows)));
}
