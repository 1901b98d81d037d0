#pragma once

#include <string>
#include <vector>

#include "shiftcal/metrics.hpp"
#include "shiftcal/scenarios.hpp"

namespace shiftcal {

struct BoundInstance {
  Matrix forecasts;          // [m x K] probability rows
  std::vector<double> ghat;  // clamped discriminator values
};

// Random forecaster/discriminator pair: softmax of Gaussian logits (one scale
// per instance) and uniform draws over the clamp band.
BoundInstance random_bound_instance(const EnumerableDomain& domain, double clamp_bound,
                                    Rng& rng);

// The equality case: deterministic labels, correct one-hot forecasts and the
// oracle discriminator. Returns the label-collapsed domain alongside.
struct TightCase {
  EnumerableDomain domain;
  BoundInstance instance;
};
TightCase tight_bound_case(const EnumerableDomain& domain);

// Hard valid case: one-hot forecasts on the least likely label and a
// discriminator that claims everything is source. The bound still holds with
// the correct lambda but fails if lambda is corrupted to 1.
BoundInstance stress_bound_instance(const EnumerableDomain& domain);

struct VerifyOptions {
  int trials = 100;
  uint64_t seed = 0;
  bool corrupt_lambda = false;  // debug: evaluate the bound with lambda = 1
  double slack_tol = 1e-9;
  double equality_tol = 1e-12;
};

struct VerifyOutcome {
  int trials = 0;
  int violations = 0;          // theorem violations (random + stress instances)
  int chain_failures = 0;      // intermediate (in)equality failures
  double min_slack = 0.0;      // over random + stress instances
  double tight_slack = 0.0;
  std::string first_violation;  // serialized offending instance, if any

  bool ok() const { return violations == 0 && chain_failures == 0; }
};

// Runs the random suite plus the tight and stress cases on an enumerable
// domain, checking the bound and every intermediate step of its derivation.
VerifyOutcome verify_bound_suite(const EnumerableDomain& domain, const VerifyOptions& options);

std::string bound_instance_to_json(const BoundInstance& instance, const BoundReport& report);

}  // namespace shiftcal
