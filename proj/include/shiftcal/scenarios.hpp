#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "shiftcal/common.hpp"

namespace shiftcal {

struct Dataset {
  Matrix features;          // [n x d]
  std::vector<int> labels;  // empty for unlabeled data

  int size() const { return features.rows; }
  int dim() const { return features.cols; }
  bool labeled() const { return !labels.empty(); }
};

Matrix one_hot(const std::vector<int>& labels, int classes);

// Finite domain with exact p, q and labeling tables. Everything the bound
// machinery needs can be computed by enumeration here.
struct EnumerableDomain {
  Matrix points;       // [m x d]
  std::vector<double> p;
  std::vector<double> q;
  Matrix label_table;  // [m x K], rows are probability vectors

  int size() const { return points.rows; }
  int classes() const { return label_table.cols; }

  // Throws if the tables are not probability vectors or supp(q) escapes supp(p).
  void validate() const;
  // U = max over supp(p) of q_i / p_i.
  double max_weight() const;
};

enum class ScenarioKind { Continuous, Enumerable };

struct Scenario {
  std::string name;
  ScenarioKind kind = ScenarioKind::Continuous;
  int dim = 0;
  int classes = 0;

  // Continuous worlds: seeded point samplers and the shared labeling rule.
  std::function<void(Rng&, double*)> draw_source;
  std::function<void(Rng&, double*)> draw_target;
  std::function<std::vector<double>(const double*)> label_probs;

  // Enumerable worlds carry their tables instead.
  std::optional<EnumerableDomain> domain;

  // Known importance-weight bound, when the world has one.
  std::optional<double> weight_bound;
};

enum class SampleKind { SourceLabeled, TargetUnlabeled, TargetLabeledEval };

double oracle_weight(const EnumerableDomain& domain, int i);
double oracle_discriminator(const EnumerableDomain& domain, int i);

// Exact conditional accuracy c(x)_k = E[y_k | f(x)_k], grouping points by
// exactly equal forecast value per coordinate, weighted by the chosen measure.
enum class Measure { P, Q };
Matrix oracle_true_calibration(const EnumerableDomain& domain, const Matrix& forecasts,
                               Measure measure);

Dataset sample(const Scenario& scenario, int n, uint64_t seed, SampleKind which);

// Built-in worlds.
Scenario make_box_shift();   // uniform box with shifted, floored target mass
Scenario make_box_iid();     // p = q, the unshifted control
Scenario make_gauss_shift(); // shifted Gaussians, unbounded weights
Scenario make_grid_k3(uint64_t table_seed = 424242);  // 64-point enumerable, K = 3
Scenario scenario_by_name(const std::string& name);

// CSV dataset format: header f0,...,f{d-1},label; label empty for unlabeled.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& dataset, const std::string& path);

}  // namespace shiftcal
