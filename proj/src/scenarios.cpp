#include "shiftcal/scenarios.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "shiftcal/numerics.hpp"

namespace shiftcal {

Matrix one_hot(const std::vector<int>& labels, int classes) {
  Matrix out(static_cast<int>(labels.size()), classes);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes)
      throw std::invalid_argument("label out of range: " + std::to_string(labels[i]));
    out.at(static_cast<int>(i), labels[i]) = 1.0;
  }
  return out;
}

void EnumerableDomain::validate() const {
  const int m = size();
  if (static_cast<int>(p.size()) != m || static_cast<int>(q.size()) != m ||
      label_table.rows != m)
    throw std::invalid_argument("enumerable domain: table sizes do not match");
  double sp = 0.0, sq = 0.0;
  for (int i = 0; i < m; ++i) {
    if (p[i] < 0.0 || q[i] < 0.0)
      throw std::invalid_argument("enumerable domain: negative mass");
    if (q[i] > 0.0 && p[i] == 0.0)
      throw std::invalid_argument("enumerable domain: q escapes the support of p");
    sp += p[i];
    sq += q[i];
    double sl = 0.0;
    for (int k = 0; k < classes(); ++k) {
      double v = label_table.at(i, k);
      if (v < 0.0) throw std::invalid_argument("enumerable domain: negative label probability");
      sl += v;
    }
    if (std::fabs(sl - 1.0) > 1e-12)
      throw std::invalid_argument("enumerable domain: label row does not sum to 1");
  }
  if (std::fabs(sp - 1.0) > 1e-12 || std::fabs(sq - 1.0) > 1e-12)
    throw std::invalid_argument("enumerable domain: p or q does not sum to 1");
}

double EnumerableDomain::max_weight() const {
  double u = 0.0;
  for (int i = 0; i < size(); ++i)
    if (p[i] > 0.0) u = std::max(u, q[i] / p[i]);
  return u;
}

double oracle_weight(const EnumerableDomain& domain, int i) {
  if (domain.p[i] <= 0.0)
    throw std::invalid_argument("oracle_weight: point " + std::to_string(i) +
                                " is outside the source support");
  return domain.q[i] / domain.p[i];
}

double oracle_discriminator(const EnumerableDomain& domain, int i) {
  double denom = domain.p[i] + domain.q[i];
  if (denom <= 0.0)
    throw std::invalid_argument("oracle_discriminator: point " + std::to_string(i) +
                                " is outside the mixture support");
  return domain.p[i] / denom;
}

Matrix oracle_true_calibration(const EnumerableDomain& domain, const Matrix& forecasts,
                               Measure measure) {
  const int m = domain.size();
  const int K = domain.classes();
  if (forecasts.rows != m || forecasts.cols != K)
    throw std::invalid_argument("oracle_true_calibration: forecast table shape mismatch");
  const std::vector<double>& mass = measure == Measure::P ? domain.p : domain.q;
  Matrix c(m, K);
  for (int k = 0; k < K; ++k) {
    std::map<double, std::pair<double, double>> groups;  // value -> (mass, mass*label)
    for (int i = 0; i < m; ++i) {
      auto& g = groups[forecasts.at(i, k)];
      g.first += mass[i];
      g.second += mass[i] * domain.label_table.at(i, k);
    }
    for (int i = 0; i < m; ++i) {
      const auto& g = groups[forecasts.at(i, k)];
      c.at(i, k) = g.first > 0.0 ? g.second / g.first : 0.0;
    }
  }
  return c;
}

static int draw_label(Rng& rng, const std::vector<double>& probs) {
  double u = rng.uniform();
  double acc = 0.0;
  for (size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

Dataset sample(const Scenario& scenario, int n, uint64_t seed, SampleKind which) {
  if (n < 1) throw std::invalid_argument("sample: n must be at least 1");
  Rng rng(seed);
  Dataset ds;
  ds.features = Matrix(n, scenario.dim);
  bool labeled = which != SampleKind::TargetUnlabeled;
  bool from_source = which == SampleKind::SourceLabeled;
  if (labeled) ds.labels.resize(n);

  if (scenario.kind == ScenarioKind::Enumerable) {
    const EnumerableDomain& dom = *scenario.domain;
    const std::vector<double>& mass = from_source ? dom.p : dom.q;
    std::vector<double> cdf(mass.size());
    double acc = 0.0;
    for (size_t i = 0; i < mass.size(); ++i) {
      acc += mass[i];
      cdf[i] = acc;
    }
    for (int r = 0; r < n; ++r) {
      int i = static_cast<int>(rng.categorical_from_cdf(cdf));
      std::copy(dom.points.row(i), dom.points.row(i) + dom.points.cols, ds.features.row(r));
      if (labeled) {
        std::vector<double> row(dom.label_table.row(i), dom.label_table.row(i) + dom.classes());
        ds.labels[r] = draw_label(rng, row);
      }
    }
    return ds;
  }

  const auto& draw = from_source ? scenario.draw_source : scenario.draw_target;
  for (int r = 0; r < n; ++r) {
    draw(rng, ds.features.row(r));
    if (labeled) ds.labels[r] = draw_label(rng, scenario.label_probs(ds.features.row(r)));
  }
  return ds;
}

namespace {

constexpr double kBoxFloor = 0.03;   // target mass spread over all of supp(p)
constexpr double kBoxInner = 0.3;    // lower corner of the concentrated box
// Labeling map shared by the box worlds. Labels are crisp outside the inner
// box and noisy inside it, so the shifted target is harder to calibrate.
constexpr double kBoxSharpOuter = 8.0;
constexpr double kBoxSharpInner = 1.0;
const double kBoxW[3][2] = {{2.0, -1.0}, {-1.5, 2.5}, {0.5, -2.0}};
const double kBoxB[3] = {0.3, -0.2, -0.1};

std::vector<double> box_label_probs(const double* x) {
  bool inner = x[0] >= kBoxInner && x[1] >= kBoxInner;
  double beta = inner ? kBoxSharpInner : kBoxSharpOuter;
  std::vector<double> z(3);
  for (int k = 0; k < 3; ++k)
    z[k] = beta * (kBoxW[k][0] * x[0] + kBoxW[k][1] * x[1] + kBoxB[k]);
  softmax_inplace(z.data(), 3);
  return z;
}

}  // namespace

Scenario make_box_shift() {
  Scenario s;
  s.name = "box-shift";
  s.kind = ScenarioKind::Continuous;
  s.dim = 2;
  s.classes = 3;
  s.draw_source = [](Rng& rng, double* x) {
    x[0] = rng.uniform();
    x[1] = rng.uniform();
  };
  s.draw_target = [](Rng& rng, double* x) {
    if (rng.uniform() < kBoxFloor) {
      x[0] = rng.uniform();
      x[1] = rng.uniform();
    } else {
      x[0] = kBoxInner + rng.uniform() * (1.0 - kBoxInner);
      x[1] = kBoxInner + rng.uniform() * (1.0 - kBoxInner);
    }
  };
  s.label_probs = box_label_probs;
  double inner_area = (1.0 - kBoxInner) * (1.0 - kBoxInner);
  s.weight_bound = kBoxFloor + (1.0 - kBoxFloor) / inner_area;
  return s;
}

Scenario make_box_iid() {
  Scenario s = make_box_shift();
  s.name = "box-iid";
  s.draw_target = s.draw_source;
  s.weight_bound = 1.0;
  return s;
}

Scenario make_gauss_shift() {
  Scenario s;
  s.name = "gauss-shift";
  s.kind = ScenarioKind::Continuous;
  s.dim = 2;
  s.classes = 3;
  s.draw_source = [](Rng& rng, double* x) {
    x[0] = rng.normal();
    x[1] = rng.normal();
  };
  s.draw_target = [](Rng& rng, double* x) {
    x[0] = 0.75 + 0.75 * rng.normal();
    x[1] = 0.75 + 0.75 * rng.normal();
  };
  s.label_probs = [](const double* x) {
    std::vector<double> z(3);
    for (int k = 0; k < 3; ++k)
      z[k] = kBoxW[k][0] * x[0] + kBoxW[k][1] * x[1] + kBoxB[k];
    softmax_inplace(z.data(), 3);
    return z;
  };
  // w(x) is unbounded here; the clamp hyperparameter has to do the work.
  return s;
}

Scenario make_grid_k3(uint64_t table_seed) {
  Scenario s;
  s.name = "grid-K3";
  s.kind = ScenarioKind::Enumerable;
  s.dim = 2;
  s.classes = 3;

  EnumerableDomain dom;
  const int side = 8;
  const int m = side * side;
  dom.points = Matrix(m, 2);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) {
      dom.points.at(i * side + j, 0) = static_cast<double>(j) / (side - 1);
      dom.points.at(i * side + j, 1) = static_cast<double>(i) / (side - 1);
    }

  Rng rng(table_seed);
  // Random smooth log-densities over the grid. Smoothness keeps the Bayes
  // discriminator learnable from samples; the masses are still seeded draws.
  auto draw_table = [&]() {
    double c[5];
    for (double& v : c) v = 1.5 * rng.normal();
    std::vector<double> t(m);
    double sum = 0.0;
    for (int i = 0; i < m; ++i) {
      double x = dom.points.at(i, 0), y = dom.points.at(i, 1);
      t[i] = std::exp(c[0] * x + c[1] * y + c[2] * x * y + c[3] * x * x + c[4] * y * y);
      sum += t[i];
    }
    for (double& v : t) v /= sum;
    return t;
  };
  dom.p = draw_table();
  dom.q = draw_table();

  // Fixed random linear labeling map; scale keeps labels crisp but not hard.
  double W[3][2], b[3];
  for (int k = 0; k < 3; ++k) {
    W[k][0] = 2.5 * rng.normal();
    W[k][1] = 2.5 * rng.normal();
    b[k] = rng.normal();
  }
  dom.label_table = Matrix(m, 3);
  for (int i = 0; i < m; ++i) {
    double z[3];
    for (int k = 0; k < 3; ++k)
      z[k] = W[k][0] * dom.points.at(i, 0) + W[k][1] * dom.points.at(i, 1) + b[k];
    softmax_inplace(z, 3);
    for (int k = 0; k < 3; ++k) dom.label_table.at(i, k) = z[k];
  }
  dom.validate();
  s.weight_bound = dom.max_weight();
  s.domain = std::move(dom);
  return s;
}

Scenario scenario_by_name(const std::string& name) {
  if (name == "box-shift") return make_box_shift();
  if (name == "box-iid") return make_box_iid();
  if (name == "gauss-shift") return make_gauss_shift();
  if (name == "grid-K3") return make_grid_k3();
  throw std::invalid_argument("unknown scenario: " + name);
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  long lineno = 0;

  if (!std::getline(in, line)) throw ParseError("empty file", 1);
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header.back() != "label")
    throw ParseError("header must be f0,...,f{d-1},label", lineno);
  const int d = static_cast<int>(header.size()) - 1;
  for (int j = 0; j < d; ++j)
    if (header[j] != "f" + std::to_string(j))
      throw ParseError("unexpected feature column name '" + header[j] + "'", lineno);

  std::vector<double> values;
  std::vector<int> labels;
  bool any_label = false, any_row = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    size_t start = 0;
    while (true) {
      size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (static_cast<int>(cells.size()) != d + 1)
      throw ParseError("expected " + std::to_string(d + 1) + " cells, found " +
                           std::to_string(cells.size()),
                       lineno);
    for (int j = 0; j < d; ++j) {
      const std::string& c = cells[j];
      double v = 0.0;
      auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size() || !std::isfinite(v))
        throw ParseError("non-numeric feature cell '" + c + "'", lineno);
      values.push_back(v);
    }
    const std::string& lc = cells[d];
    if (lc.empty()) {
      if (any_label) throw ParseError("mixed labeled and unlabeled rows", lineno);
      labels.clear();
    } else {
      int lv = 0;
      auto res = std::from_chars(lc.data(), lc.data() + lc.size(), lv);
      if (res.ec != std::errc() || res.ptr != lc.data() + lc.size() || lv < 0)
        throw ParseError("label must be a nonnegative integer, got '" + lc + "'", lineno);
      if (any_row && !any_label) throw ParseError("mixed labeled and unlabeled rows", lineno);
      labels.push_back(lv);
      any_label = true;
    }
    any_row = true;
  }
  if (!any_row) throw ParseError("no data rows", lineno);

  Dataset ds;
  const int n = static_cast<int>(values.size()) / d;
  ds.features = Matrix(n, d);
  ds.features.data = std::move(values);
  ds.labels = std::move(labels);
  return ds;
}

void save_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (int j = 0; j < dataset.dim(); ++j) out << "f" << j << ",";
  out << "label\n";
  char buf[64];
  for (int i = 0; i < dataset.size(); ++i) {
    for (int j = 0; j < dataset.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", dataset.features.at(i, j));
      out << buf << ",";
    }
    if (dataset.labeled()) out << dataset.labels[i];
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace shiftcal
