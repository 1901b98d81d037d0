#include "shiftcal/verify.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "shiftcal/numerics.hpp"

namespace shiftcal {

BoundInstance random_bound_instance(const EnumerableDomain& domain, double clamp_bound,
                                    Rng& rng) {
  const int m = domain.size();
  const int K = domain.classes();
  static const double kScales[] = {0.6, 1.0, 1.6};
  double scale = kScales[rng.index(3)];

  BoundInstance inst;
  inst.forecasts = Matrix(m, K);
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < K; ++k) inst.forecasts.at(i, k) = scale * rng.normal();
    softmax_inplace(inst.forecasts.row(i), K);
  }
  double floor = 1.0 / (1.0 + clamp_bound);
  inst.ghat.resize(m);
  for (int i = 0; i < m; ++i) inst.ghat[i] = floor + (1.0 - floor) * rng.uniform();
  return inst;
}

TightCase tight_bound_case(const EnumerableDomain& domain) {
  TightCase tc;
  tc.domain = domain;
  const int m = domain.size();
  const int K = domain.classes();
  tc.domain.label_table = Matrix(m, K);
  tc.instance.forecasts = Matrix(m, K);
  tc.instance.ghat.resize(m);
  for (int i = 0; i < m; ++i) {
    int best = 0;
    for (int k = 1; k < K; ++k)
      if (domain.label_table.at(i, k) > domain.label_table.at(i, best)) best = k;
    tc.domain.label_table.at(i, best) = 1.0;
    tc.instance.forecasts.at(i, best) = 1.0;
    tc.instance.ghat[i] = oracle_discriminator(domain, i);
  }
  return tc;
}

BoundInstance stress_bound_instance(const EnumerableDomain& domain) {
  const int m = domain.size();
  const int K = domain.classes();
  BoundInstance inst;
  inst.forecasts = Matrix(m, K);
  inst.ghat.assign(m, 1.0);
  for (int i = 0; i < m; ++i) {
    int worst = 0;
    for (int k = 1; k < K; ++k)
      if (domain.label_table.at(i, k) < domain.label_table.at(i, worst)) worst = k;
    inst.forecasts.at(i, worst) = 1.0;
  }
  return inst;
}

std::string bound_instance_to_json(const BoundInstance& instance, const BoundReport& report) {
  nlohmann::json j{{"forecasts", instance.forecasts.data},
                   {"classes", instance.forecasts.cols},
                   {"ghat", instance.ghat},
                   {"lhs", report.lhs},
                   {"rhs", report.rhs()},
                   {"slack", report.slack()},
                   {"lambda", report.lambda},
                   {"clamp_bound", report.clamp_bound}};
  return j.dump();
}

namespace {

double corrupted_slack(const BoundReport& report) {
  // lambda forced to 1 in both discriminator terms.
  return report.term_weighted_cls + report.disc_excess - report.lhs;
}

bool near(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

int chain_check(const BoundChain& c, double eq_tol, double slack_tol) {
  int failures = 0;
  // Importance-weighting split holds as an exact identity.
  if (!near(c.target_cls_error, c.iw_term + c.remainder_term, eq_tol)) ++failures;
  // Remainder term is bounded by the averaged second moments.
  if (c.remainder_term > c.remainder_bound + slack_tol) ++failures;
  // Weight-error chain: identity, clamp bound, mixture identity, density
  // bound, and the excess-risk identity.
  if (!near(c.weight_mse, c.weight_mse_ratio_form, eq_tol)) ++failures;
  if (c.weight_mse_ratio_form > c.disc_gap_p + slack_tol) ++failures;
  if (!near(c.disc_gap_p, c.disc_gap_mixture, eq_tol)) ++failures;
  if (c.disc_gap_mixture > c.disc_gap_bound + slack_tol) ++failures;
  if (!near(c.disc_gap_bound, c.disc_excess_form, 1e-9)) ++failures;
  return failures;
}

}  // namespace

VerifyOutcome verify_bound_suite(const EnumerableDomain& domain, const VerifyOptions& options) {
  const double U = domain.max_weight();
  Rng rng(options.seed);
  VerifyOutcome outcome;
  outcome.min_slack = std::numeric_limits<double>::infinity();

  auto check = [&](const EnumerableDomain& dom, const BoundInstance& inst, bool with_chain) {
    BoundReport report = theorem1_bound(dom, inst.forecasts, inst.ghat, U);
    double slack = options.corrupt_lambda ? corrupted_slack(report) : report.slack();
    outcome.min_slack = std::min(outcome.min_slack, slack);
    if (slack < -options.slack_tol) {
      ++outcome.violations;
      if (outcome.first_violation.empty())
        outcome.first_violation = bound_instance_to_json(inst, report);
    }
    if (with_chain)
      outcome.chain_failures += chain_check(report.chain, options.equality_tol,
                                            options.slack_tol);
  };

  for (int t = 0; t < options.trials; ++t) {
    check(domain, random_bound_instance(domain, U, rng), true);
    ++outcome.trials;
  }
  check(domain, stress_bound_instance(domain), false);

  TightCase tight = tight_bound_case(domain);
  BoundReport tight_report =
      theorem1_bound(tight.domain, tight.instance.forecasts, tight.instance.ghat, U);
  outcome.tight_slack = std::fabs(tight_report.slack()) + std::fabs(tight_report.lhs);
  return outcome;
}

}  // namespace shiftcal
