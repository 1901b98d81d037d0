#include "shiftcal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace shiftcal {

EceReport ece(const std::vector<double>& confidences, const std::vector<double>& correctness,
              int bins) {
  if (confidences.size() != correctness.size())
    throw std::invalid_argument("ece: confidence/correctness lengths differ");
  if (bins < 1) throw std::invalid_argument("ece: need at least one bin");
  if (confidences.empty()) throw std::invalid_argument("ece: empty input");

  EceReport report;
  report.bin_count = bins;
  report.bins.resize(bins);
  std::vector<double> conf_sum(bins, 0.0), corr_sum(bins, 0.0);
  for (int b = 0; b < bins; ++b) {
    report.bins[b].lo = static_cast<double>(b) / bins;
    report.bins[b].hi = static_cast<double>(b + 1) / bins;
  }
  const size_t n = confidences.size();
  for (size_t i = 0; i < n; ++i) {
    double c = confidences[i];
    if (!(c >= 0.0) || c > 1.0)
      throw std::invalid_argument("ece: confidence out of [0, 1]: " + std::to_string(c));
    int b = std::min(static_cast<int>(c * bins), bins - 1);
    ++report.bins[b].count;
    conf_sum[b] += c;
    corr_sum[b] += correctness[i];
  }
  for (int b = 0; b < bins; ++b) {
    EceBin& bin = report.bins[b];
    if (bin.count == 0) continue;
    bin.mean_confidence = conf_sum[b] / bin.count;
    bin.accuracy = corr_sum[b] / bin.count;
    bin.mass = static_cast<double>(bin.count) / static_cast<double>(n);
    double gap = bin.mean_confidence - bin.accuracy;
    report.ece += bin.mass * std::fabs(gap);
    report.overconfident_ece += bin.mass * std::max(0.0, gap);
  }
  return report;
}

double overconfident_ece(const std::vector<double>& confidences,
                         const std::vector<double>& correctness, int bins) {
  return ece(confidences, correctness, bins).overconfident_ece;
}

EceReport reliability_bins(const Forecaster& forecaster,
                           const std::vector<int>& predicted_labels, const Dataset& eval_data,
                           int bins) {
  if (!eval_data.labeled())
    throw std::invalid_argument("reliability_bins: evaluation data has no labels");
  if (static_cast<int>(predicted_labels.size()) != eval_data.size())
    throw std::invalid_argument("reliability_bins: prediction count does not match data");
  Matrix logits = forecaster_logits(forecaster, eval_data.features);
  Matrix probs = scaled_probabilities(logits, forecaster.temperature);
  std::vector<double> conf(eval_data.size()), corr(eval_data.size());
  for (int i = 0; i < eval_data.size(); ++i) {
    int k = predicted_labels[i];
    conf[i] = probs.at(i, k);
    corr[i] = eval_data.labels[i] == k ? 1.0 : 0.0;
  }
  return ece(conf, corr, bins);
}

namespace {

// E||f(x) - y||^2 at one point, exactly over the labeling distribution:
// sum_k pi_k (||f||^2 - 2 f_k + 1), and the same with the square for the
// fourth-moment variant.
void pointwise_cls_error(const EnumerableDomain& domain, const Matrix& forecasts,
                         std::vector<double>& second, std::vector<double>* fourth = nullptr) {
  const int m = domain.size();
  const int K = domain.classes();
  second.assign(m, 0.0);
  if (fourth) fourth->assign(m, 0.0);
  for (int i = 0; i < m; ++i) {
    double norm2 = 0.0;
    for (int k = 0; k < K; ++k) norm2 += forecasts.at(i, k) * forecasts.at(i, k);
    for (int k = 0; k < K; ++k) {
      double t2 = norm2 - 2.0 * forecasts.at(i, k) + 1.0;
      double pi = domain.label_table.at(i, k);
      second[i] += pi * t2;
      if (fourth) (*fourth)[i] += pi * t2 * t2;
    }
  }
}

}  // namespace

BrierDecomposition brier_decomposition(const EnumerableDomain& domain, const Matrix& forecasts,
                                       Measure measure) {
  const std::vector<double>& mass = measure == Measure::P ? domain.p : domain.q;
  std::vector<double> cls;
  pointwise_cls_error(domain, forecasts, cls);
  Matrix c = oracle_true_calibration(domain, forecasts, measure);

  BrierDecomposition out;
  for (int i = 0; i < domain.size(); ++i) {
    out.classification_error += mass[i] * cls[i];
    double gap = 0.0, norm = 0.0;
    for (int k = 0; k < domain.classes(); ++k) {
      double d = forecasts.at(i, k) - c.at(i, k);
      gap += d * d;
      norm += c.at(i, k) * c.at(i, k);
    }
    out.calibration_error += mass[i] * gap;
    out.sharpness += mass[i] * norm;
  }
  return out;
}

BoundChain bound_chain(const EnumerableDomain& domain, const Matrix& forecasts,
                       const std::vector<double>& ghat, double clamp_bound) {
  const int m = domain.size();
  const double U = clamp_bound;
  const double lambda = std::pow(1.0 + U, 4);
  const double floor = 1.0 / (1.0 + U);
  if (static_cast<int>(ghat.size()) != m)
    throw std::invalid_argument("bound_chain: ghat size mismatch");
  for (double g : ghat)
    if (g < floor - 1e-12 || g > 1.0 + 1e-12)
      throw std::invalid_argument("bound_chain: ghat escapes the clamp band");

  std::vector<double> cls2, cls4;
  pointwise_cls_error(domain, forecasts, cls2, &cls4);

  BoundChain chain;
  for (int i = 0; i < m; ++i) {
    double p = domain.p[i], q = domain.q[i];
    double what = 1.0 / ghat[i] - 1.0;
    chain.target_cls_error += q * cls2[i];
    chain.iw_term += p * cls2[i] * what;
    if (p > 0.0) {
      double w = q / p;
      if (w > U + 1e-9)
        throw std::invalid_argument("bound_chain: oracle weight exceeds the clamp bound");
      double g = oracle_discriminator(domain, i);
      double werr = w - what;
      chain.remainder_term += p * cls2[i] * werr;
      chain.source_cls_error += p * cls2[i];
      chain.weight_mse += p * werr * werr;
      double ratio = (g - ghat[i]) / (g * ghat[i]);
      chain.weight_mse_ratio_form += p * ratio * ratio;
      chain.disc_gap_p += lambda * p * (g - ghat[i]) * (g - ghat[i]);
    }
    double r = 0.5 * (p + q);
    if (r > 0.0) {
      double g = oracle_discriminator(domain, i);
      double gap2 = (g - ghat[i]) * (g - ghat[i]);
      chain.disc_gap_mixture += lambda * r * gap2 * (p / r);
      chain.disc_gap_bound += 2.0 * lambda * r * gap2;
      // E_r[(ghat-s)^2] - E_r[(g-s)^2] expands to E_r[(g-ghat)^2]; keep the
      // two-term form so the identity itself is exercised.
      double disc_err = 0.5 * (p * (ghat[i] - 1.0) * (ghat[i] - 1.0) + q * ghat[i] * ghat[i]);
      double bayes_err = 0.5 * (p * (g - 1.0) * (g - 1.0) + q * g * g);
      chain.disc_excess_form += 2.0 * lambda * (disc_err - bayes_err);
    }
  }
  chain.remainder_bound = 0.5 * (chain.source_cls_error + chain.weight_mse);
  return chain;
}

BoundReport theorem1_bound(const EnumerableDomain& domain, const Matrix& forecasts,
                           const std::vector<double>& ghat, double clamp_bound) {
  const int m = domain.size();
  const double U = clamp_bound;

  BoundReport report;
  report.lambda = std::pow(1.0 + U, 4);
  report.clamp_bound = U;
  report.chain = bound_chain(domain, forecasts, ghat, clamp_bound);

  std::vector<double> cls2;
  pointwise_cls_error(domain, forecasts, cls2);
  Matrix c = oracle_true_calibration(domain, forecasts, Measure::Q);
  for (int i = 0; i < m; ++i) {
    double p = domain.p[i], q = domain.q[i];
    double gap = 0.0;
    for (int k = 0; k < domain.classes(); ++k) {
      double d = forecasts.at(i, k) - c.at(i, k);
      gap += d * d;
    }
    report.lhs += q * gap;
    report.term_weighted_cls += p * cls2[i] * (1.0 / ghat[i] - 0.5);
    if (p + q > 0.0) {
      double g = oracle_discriminator(domain, i);
      double disc = 0.5 * (p * (ghat[i] - 1.0) * (ghat[i] - 1.0) + q * ghat[i] * ghat[i]);
      double bayes = 0.5 * (p * (g - 1.0) * (g - 1.0) + q * g * g);
      report.term_disc_error += disc;
      report.term_bayes_disc -= report.lambda * bayes;
      report.disc_excess += disc - bayes;
    }
  }
  return report;
}

std::vector<IwExampleStat> iw_distribution_report(const std::vector<std::vector<double>>& runs,
                                                  int top_k) {
  if (runs.size() < 2)
    throw std::invalid_argument("iw_distribution_report: need at least two runs");
  const size_t n = runs.front().size();
  for (const auto& r : runs)
    if (r.size() != n)
      throw std::invalid_argument("iw_distribution_report: runs cover different example counts");

  std::vector<IwExampleStat> stats(n);
  std::vector<double> values(runs.size());
  for (size_t i = 0; i < n; ++i) {
    for (size_t r = 0; r < runs.size(); ++r) values[r] = runs[r][i];
    std::sort(values.begin(), values.end());
    IwExampleStat& st = stats[i];
    st.example = static_cast<int>(i);
    st.min = values.front();
    st.max = values.back();
    size_t mid = values.size() / 2;
    st.median = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
    st.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  }
  std::stable_sort(stats.begin(), stats.end(),
                   [](const IwExampleStat& a, const IwExampleStat& b) { return a.mean > b.mean; });
  if (static_cast<size_t>(top_k) < stats.size()) stats.resize(top_k);
  return stats;
}

}  // namespace shiftcal
