#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "shiftcal/metrics.hpp"
#include "shiftcal/verify.hpp"

using namespace shiftcal;

TEST_CASE("ece hand-computed example") {
  std::vector<double> conf{0.4, 0.6, 0.8, 0.9};
  std::vector<double> corr{0.0, 1.0, 1.0, 0.0};
  EceReport report = ece(conf, corr, 2);
  CHECK(report.ece == doctest::Approx(0.175).epsilon(1e-12));
  CHECK(report.overconfident_ece == doctest::Approx(0.175).epsilon(1e-12));
  CHECK(report.bins[0].count == 1);
  CHECK(report.bins[1].count == 3);
  CHECK(report.bins[1].mean_confidence == doctest::Approx(2.3 / 3.0).epsilon(1e-12));
  CHECK(report.bins[1].accuracy == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("ece trivial cases") {
  // all confident and correct
  std::vector<double> ones(10, 1.0);
  CHECK(ece(ones, ones, 15).ece == 0.0);

  // a single bin collapses to |mean conf - mean corr|
  std::vector<double> conf{0.2, 0.5, 0.9};
  std::vector<double> corr{1.0, 0.0, 1.0};
  double mc = (0.2 + 0.5 + 0.9) / 3.0, ma = 2.0 / 3.0;
  CHECK(ece(conf, corr, 1).ece == doctest::Approx(std::fabs(mc - ma)).epsilon(1e-12));

  // under-confident bins contribute nothing one-sidedly
  std::vector<double> low{0.1, 0.2};
  std::vector<double> hit{1.0, 1.0};
  CHECK(overconfident_ece(low, hit, 5) == 0.0);
  CHECK(ece(low, hit, 5).ece > 0.0);

  CHECK_THROWS_AS(ece({0.5}, {1.0, 0.0}, 5), std::invalid_argument);
  CHECK_THROWS_AS(ece({1.5}, {1.0}, 5), std::invalid_argument);
}

TEST_CASE("ece fuzz: range ordering, mass and permutation invariance") {
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    int n = 1 + static_cast<int>(rng.index(60));
    std::vector<double> conf(n), corr(n);
    for (int i = 0; i < n; ++i) {
      conf[i] = rng.uniform();
      corr[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    }
    EceReport r = ece(conf, corr, 15);
    CHECK(r.overconfident_ece >= 0.0);
    CHECK(r.overconfident_ece <= r.ece + 1e-15);
    CHECK(r.ece <= 1.0);
    double mass = 0.0;
    for (const auto& b : r.bins) mass += b.mass;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<double> conf2(n), corr2(n);
    for (int i = 0; i < n; ++i) {
      conf2[i] = conf[perm[i]];
      corr2[i] = corr[perm[i]];
    }
    CHECK(ece(conf2, corr2, 15).ece == doctest::Approx(r.ece).epsilon(1e-12));
  }
}

TEST_CASE("reliability bins reproduce the underlying vectors") {
  // deterministic always-correct classifier with confidence ~1
  Forecaster f;
  DenseLayer l;
  l.weights = Matrix(2, 2);
  l.weights.at(0, 0) = 60.0;
  l.weights.at(1, 1) = 60.0;
  l.bias = {0.0, 0.0};
  l.activation = Activation::Identity;
  f.head.layers.push_back(l);

  Dataset data;
  data.features = Matrix(6, 2);
  data.labels.resize(6);
  for (int i = 0; i < 6; ++i) {
    int y = i % 2;
    data.features.at(i, y) = 1.0;
    data.labels[i] = y;
  }
  std::vector<int> pred;
  Matrix logits = forecaster_logits(f, data.features);
  for (int i = 0; i < 6; ++i) pred.push_back(argmax_row(logits.row(i), 2));

  EceReport r = reliability_bins(f, pred, data, 15);
  CHECK(r.ece <= 1e-9);
  int nonempty = 0;
  for (const auto& b : r.bins) nonempty += b.count > 0 ? 1 : 0;
  CHECK(nonempty == 1);
  CHECK(r.bins.back().accuracy == 1.0);
  CHECK(r.bins.back().mean_confidence == doctest::Approx(1.0).epsilon(1e-9));

  // the report is the same as running ece on the extracted vectors
  Matrix probs = scaled_probabilities(logits, f.temperature);
  std::vector<double> conf(6), corr(6);
  for (int i = 0; i < 6; ++i) {
    conf[i] = probs.at(i, pred[i]);
    corr[i] = data.labels[i] == pred[i] ? 1.0 : 0.0;
  }
  EceReport direct = ece(conf, corr, 15);
  CHECK(direct.ece == r.ece);
  CHECK(direct.overconfident_ece == r.overconfident_ece);

  Dataset unlabeled = data;
  unlabeled.labels.clear();
  CHECK_THROWS_AS(reliability_bins(f, pred, unlabeled, 15), std::invalid_argument);
}

TEST_CASE("brier decomposition closed cases and identity") {
  Scenario grid = make_grid_k3();
  const EnumerableDomain& dom = *grid.domain;
  const int m = dom.size();
  const int K = dom.classes();

  // base-rate forecaster: calibration error 0, sharpness ||E y||^2
  std::vector<double> base(K, 0.0);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < K; ++k) base[k] += dom.p[i] * dom.label_table.at(i, k);
  Matrix cst(m, K);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < K; ++k) cst.at(i, k) = base[k];
  BrierDecomposition d = brier_decomposition(dom, cst, Measure::P);
  double base_norm = 0.0;
  for (int k = 0; k < K; ++k) base_norm += base[k] * base[k];
  CHECK(d.calibration_error <= 1e-12);
  CHECK(d.sharpness == doctest::Approx(base_norm).epsilon(1e-12));
  CHECK(d.classification_error == doctest::Approx(1.0 - base_norm).epsilon(1e-10));

  // forecasting the exact conditional accuracy: calibration error 0
  Matrix truth = dom.label_table;
  BrierDecomposition d2 = brier_decomposition(dom, truth, Measure::Q);
  CHECK(d2.calibration_error <= 1e-12);

  // identity on random forecasters
  Rng rng(77);
  for (int t = 0; t < 10; ++t) {
    Matrix fhat(m, K);
    for (int i = 0; i < m; ++i) {
      for (int k = 0; k < K; ++k) fhat.at(i, k) = rng.normal();
      softmax_inplace(fhat.row(i), K);
    }
    BrierDecomposition r = brier_decomposition(dom, fhat, Measure::Q);
    double resid = r.classification_error - (r.calibration_error + 1.0 - r.sharpness);
    CHECK(std::fabs(resid) <= 1e-10);
  }
}

TEST_CASE("theorem 1 bound on random, tight and stress instances") {
  Scenario grid = make_grid_k3();
  const EnumerableDomain& dom = *grid.domain;
  double U = dom.max_weight();

  CHECK(std::pow(1.0 + 1.0, 4) == 16.0);  // lambda at U = 1

  Rng rng(5);
  for (int t = 0; t < 30; ++t) {
    BoundInstance inst = random_bound_instance(dom, U, rng);
    BoundReport report = theorem1_bound(dom, inst.forecasts, inst.ghat, U);
    CHECK(report.slack() >= -1e-9);
    CHECK(report.lambda == doctest::Approx(std::pow(1.0 + U, 4)));
    // the chain orders correctly
    const BoundChain& c = report.chain;
    CHECK(c.target_cls_error ==
          doctest::Approx(c.iw_term + c.remainder_term).epsilon(1e-12));
    CHECK(c.remainder_term <= c.remainder_bound + 1e-9);
    CHECK(c.weight_mse == doctest::Approx(c.weight_mse_ratio_form).epsilon(1e-9));
    CHECK(c.weight_mse_ratio_form <= c.disc_gap_p + 1e-9);
    CHECK(c.disc_gap_p == doctest::Approx(c.disc_gap_mixture).epsilon(1e-9));
    CHECK(c.disc_gap_mixture <= c.disc_gap_bound + 1e-9);
    CHECK(c.disc_gap_bound == doctest::Approx(c.disc_excess_form).epsilon(1e-9));
  }

  TightCase tight = tight_bound_case(dom);
  BoundReport tr = theorem1_bound(tight.domain, tight.instance.forecasts, tight.instance.ghat, U);
  CHECK(std::fabs(tr.lhs) <= 1e-12);
  CHECK(std::fabs(tr.slack()) <= 1e-12);

  BoundInstance stress = stress_bound_instance(dom);
  BoundReport sr = theorem1_bound(dom, stress.forecasts, stress.ghat, U);
  CHECK(sr.slack() >= 0.0);

  // clamp violations are rejected
  BoundInstance bad = stress;
  bad.ghat[0] = 1.0 / (1.0 + U) / 2.0;
  CHECK_THROWS_AS(theorem1_bound(dom, bad.forecasts, bad.ghat, U), std::invalid_argument);
}

TEST_CASE("bound chain degenerate cases") {
  Scenario grid = make_grid_k3();
  const EnumerableDomain& dom = *grid.domain;
  double U = dom.max_weight();

  // oracle ghat: the weight-estimation error collapses to zero
  std::vector<double> oracle(dom.size());
  for (int i = 0; i < dom.size(); ++i) oracle[i] = oracle_discriminator(dom, i);
  Rng rng(3);
  BoundInstance inst = random_bound_instance(dom, U, rng);
  BoundChain chain = bound_chain(dom, inst.forecasts, oracle, U);
  CHECK(chain.weight_mse <= 1e-18);
  CHECK(chain.disc_gap_bound <= 1e-12);

  // p = q with what == 1: both sides of the split equal the plain Brier score
  EnumerableDomain iid = dom;
  iid.q = iid.p;
  std::vector<double> half(dom.size(), 0.5);
  BoundChain c2 = bound_chain(iid, inst.forecasts, half, 1.0);
  CHECK(c2.target_cls_error == doctest::Approx(c2.iw_term).epsilon(1e-12));
  CHECK(std::fabs(c2.remainder_term) <= 1e-12);
  CHECK(c2.target_cls_error == doctest::Approx(c2.source_cls_error).epsilon(1e-12));
}

TEST_CASE("verify suite outcome on grid-K3") {
  Scenario grid = make_grid_k3();
  VerifyOptions opt;
  opt.trials = 50;
  opt.seed = 7;
  VerifyOutcome out = verify_bound_suite(*grid.domain, opt);
  CHECK(out.ok());
  CHECK(out.tight_slack <= 1e-12);
  CHECK(out.min_slack > 0.0);

  // corrupting lambda must be detected
  opt.corrupt_lambda = true;
  VerifyOutcome bad = verify_bound_suite(*grid.domain, opt);
  CHECK(bad.violations > 0);
  CHECK(!bad.first_violation.empty());
}

TEST_CASE("importance-weight distribution report") {
  std::vector<std::vector<double>> runs{{1.0, 5.0, 2.0}, {3.0, 5.0, 2.0}};
  auto stats = iw_distribution_report(runs, 2);
  REQUIRE(stats.size() == 2);
  CHECK(stats[0].example == 1);  // mean 5 ranks first
  CHECK(stats[0].min == 5.0);
  CHECK(stats[0].max == 5.0);
  CHECK(stats[1].example == 0);  // mean 2 beats mean 2? no: means are 5, 2, 2
  CHECK(stats[1].median == doctest::Approx(2.0));
  CHECK(stats[1].min == 1.0);
  CHECK(stats[1].max == 3.0);

  // identical runs have zero spread
  std::vector<std::vector<double>> same{{0.5, 2.5}, {0.5, 2.5}, {0.5, 2.5}};
  auto zs = iw_distribution_report(same, 2);
  for (const auto& st : zs) {
    CHECK(st.min == st.max);
    CHECK(st.min == st.median);
  }

  // ranking agrees with a naive sort oracle
  Rng rng(99);
  std::vector<std::vector<double>> wide(4, std::vector<double>(40));
  for (auto& run : wide)
    for (double& v : run) v = rng.uniform(0.0, 10.0);
  auto top = iw_distribution_report(wide, 40);
  std::vector<double> means(40, 0.0);
  for (const auto& run : wide)
    for (int i = 0; i < 40; ++i) means[i] += run[i] / 4.0;
  std::vector<int> order(40);
  for (int i = 0; i < 40; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return means[a] > means[b]; });
  for (int i = 0; i < 40; ++i) CHECK(top[i].example == order[i]);

  CHECK_THROWS_AS(iw_distribution_report({{1.0}}, 1), std::invalid_argument);
}
