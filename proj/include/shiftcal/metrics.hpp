#pragma once

#include <string>
#include <vector>

#include "shiftcal/calibrator.hpp"
#include "shiftcal/scenarios.hpp"

namespace shiftcal {

struct EceBin {
  double lo = 0.0;
  double hi = 0.0;
  long count = 0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  double mass = 0.0;
};

struct EceReport {
  std::vector<EceBin> bins;
  double ece = 0.0;
  double overconfident_ece = 0.0;
  int bin_count = 15;
};

// Equal-width bins c_b = b/B, membership c_{b-1} <= conf < c_b, last bin
// closed at 1. Empty bins contribute nothing.
EceReport ece(const std::vector<double>& confidences, const std::vector<double>& correctness,
              int bins = 15);
// One-sided variant: per-bin contribution max{0, mean confidence - accuracy}.
double overconfident_ece(const std::vector<double>& confidences,
                         const std::vector<double>& correctness, int bins = 15);

// Confidence/correctness pairs for a forecaster recalibrating the given
// predicted labels, evaluated on labeled data, then binned.
EceReport reliability_bins(const Forecaster& forecaster,
                           const std::vector<int>& predicted_labels, const Dataset& eval_data,
                           int bins = 15);

struct BrierDecomposition {
  double classification_error = 0.0;
  double calibration_error = 0.0;
  double sharpness = 0.0;
};

// Exact decomposition on an enumerable domain:
// classification error = calibration error + 1 - sharpness.
BrierDecomposition brier_decomposition(const EnumerableDomain& domain, const Matrix& forecasts,
                                       Measure measure);

// Every intermediate value of the derivation, evaluated by enumeration.
struct BoundChain {
  // Importance-weighting split: E_q||f-y||^2 = E_p[||f-y||^2 w-hat] + remainder.
  double target_cls_error = 0.0;
  double iw_term = 0.0;
  double remainder_term = 0.0;
  // Remainder bound: remainder <= (E_p||f-y||^2 + E_p[(w - w-hat)^2]) / 2.
  double source_cls_error = 0.0;
  double weight_mse = 0.0;
  double remainder_bound = 0.0;
  // Weight-error chain through the discriminator.
  double weight_mse_ratio_form = 0.0;   // E_p[((g - g-hat)/(g g-hat))^2]
  double disc_gap_p = 0.0;              // (1+U)^4 E_p[(g - g-hat)^2]
  double disc_gap_mixture = 0.0;        // same, rewritten under the mixture r
  double disc_gap_bound = 0.0;          // 2 (1+U)^4 E_r[(g - g-hat)^2]
  double disc_excess_form = 0.0;        // 2 (1+U)^4 (E_r[(ghat-s)^2] - E_r[(g-s)^2])
};

struct BoundReport {
  double lhs = 0.0;                // E_q||f - c||^2, exact c under q
  double term_weighted_cls = 0.0;  // E_p[||f - y||^2 (1/ghat - 1/2)]
  double term_disc_error = 0.0;    // E_r[(ghat - s)^2]
  double term_bayes_disc = 0.0;    // -lambda E_r[(g - s)^2]
  // E_r[(ghat - s)^2 - (g - s)^2], accumulated pointwise so the two terms
  // cancel exactly (not just to rounding) when ghat equals the oracle.
  double disc_excess = 0.0;
  double lambda = 0.0;
  double clamp_bound = 0.0;
  BoundChain chain;

  double rhs() const { return term_weighted_cls + lambda * term_disc_error + term_bayes_disc; }
  double slack() const { return term_weighted_cls + lambda * disc_excess - lhs; }
};

// Exact evaluation of the calibration-error bound. Throws if any ghat value
// escapes [1/(1+U), 1] or the oracle weight exceeds U on supp(p).
BoundReport theorem1_bound(const EnumerableDomain& domain, const Matrix& forecasts,
                           const std::vector<double>& ghat, double clamp_bound);

BoundChain bound_chain(const EnumerableDomain& domain, const Matrix& forecasts,
                       const std::vector<double>& ghat, double clamp_bound);

struct IwExampleStat {
  int example = 0;
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// Ranks source examples by mean estimated weight across runs; returns the
// top_k with their median/min/max spread.
std::vector<IwExampleStat> iw_distribution_report(const std::vector<std::vector<double>>& runs,
                                                  int top_k = 15);

}  // namespace shiftcal
