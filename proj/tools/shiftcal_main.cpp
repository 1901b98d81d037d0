#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shiftcal/checkpoint.hpp"
#include "shiftcal/metrics.hpp"
#include "shiftcal/pipeline.hpp"
#include "shiftcal/runconfig.hpp"
#include "shiftcal/svg.hpp"
#include "shiftcal/verify.hpp"

namespace fs = std::filesystem;
using namespace shiftcal;

namespace {

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

struct RunRow {
  std::string method;
  uint64_t seed;
  double ece, overconf, cls_error, wall_ms;
};

std::string results_csv(const std::vector<RunRow>& rows) {
  std::ostringstream out;
  out << "method,seed,ece,overconf_ece,cls_error,wall_ms\n";
  for (const auto& r : rows)
    out << r.method << "," << r.seed << "," << fmt(r.ece) << "," << fmt(r.overconf) << ","
        << fmt(r.cls_error) << "," << fmt(r.wall_ms, "%.3f") << "\n";
  return out.str();
}

struct Summary {
  double ece_mean, ece_std, over_mean, over_std, cls_mean, cls_std;
};

Summary summarize(const std::vector<RunRow>& rows) {
  auto stat = [&](auto pick) {
    double mean = 0.0;
    for (const auto& r : rows) mean += pick(r);
    mean /= rows.size();
    double var = 0.0;
    for (const auto& r : rows) var += (pick(r) - mean) * (pick(r) - mean);
    double sd = rows.size() > 1 ? std::sqrt(var / (rows.size() - 1)) : 0.0;
    return std::pair<double, double>(mean, sd);
  };
  auto [em, es] = stat([](const RunRow& r) { return r.ece; });
  auto [om, os] = stat([](const RunRow& r) { return r.overconf; });
  auto [cm, cs] = stat([](const RunRow& r) { return r.cls_error; });
  return {em, es, om, os, cm, cs};
}

std::string reliability_csv(const EceReport& report) {
  std::ostringstream out;
  out << "bin,mean_conf,accuracy,mass\n";
  for (size_t b = 0; b < report.bins.size(); ++b) {
    const EceBin& bin = report.bins[b];
    if (bin.count == 0) continue;
    out << b << "," << fmt(bin.mean_confidence) << "," << fmt(bin.accuracy) << ","
        << fmt(bin.mass) << "\n";
  }
  return out.str();
}

int cmd_run(const std::string& config_path, const std::string& out_flag) {
  RunConfig config = RunConfig::from_json_file(config_path);
  std::string out_dir = config.resolve_output_dir(out_flag);
  fs::create_directories(out_dir);

  StageConfigs stages;
  MethodInputs inputs = config.make_inputs(stages);

  std::vector<RunRow> rows;
  std::map<std::string, std::vector<RunRow>> by_method;
  StageTimings totals;

  for (Method method : config.methods) {
    bool first_seed = true;
    for (uint64_t seed : config.seeds) {
      MethodResult res = run_method(method, inputs, stages, seed);
      RunRow row{method_name(method), seed, res.report.ece, res.report.overconfident_ece,
                 res.classification_error,
                 config.zero_timing ? 0.0 : res.timings.total_ms};
      rows.push_back(row);
      by_method[row.method].push_back(row);
      totals.classifier_ms += res.timings.classifier_ms;
      totals.featlearn_ms += res.timings.featlearn_ms;
      totals.discriminator_ms += res.timings.discriminator_ms;
      totals.temperature_ms += res.timings.temperature_ms;
      totals.evaluation_ms += res.timings.evaluation_ms;
      atomic_write(out_dir + "/results.csv", results_csv(rows));

      bool save = config.save_checkpoints == "all" ||
                  (config.save_checkpoints == "first" && first_seed);
      if (save) {
        fs::create_directories(out_dir + "/checkpoints");
        std::string tag = std::string(method_name(method)) + "_seed" + std::to_string(seed);
        save_forecaster(res.forecaster, out_dir + "/checkpoints/forecaster_" + tag + ".json");
        if (res.discriminator)
          save_discriminator(*res.discriminator,
                             out_dir + "/checkpoints/discriminator_" + tag + ".json");
      }
      first_seed = false;
    }
  }

  std::ostringstream summary;
  summary << "method,ece_mean,ece_std,overconf_ece_mean,overconf_ece_std,cls_error_mean,"
             "cls_error_std\n";
  for (Method method : config.methods) {
    const auto& mrows = by_method[method_name(method)];
    Summary s = summarize(mrows);
    summary << method_name(method) << "," << fmt(s.ece_mean) << "," << fmt(s.ece_std) << ","
            << fmt(s.over_mean) << "," << fmt(s.over_std) << "," << fmt(s.cls_mean) << ","
            << fmt(s.cls_std) << "\n";
  }
  atomic_write(out_dir + "/summary.csv", summary.str());

  for (Method method : config.methods) {
    Summary s = summarize(by_method[method_name(method)]);
    std::printf("%-12s ece %.4f +/- %.4f   overconf %.4f +/- %.4f   cls_err %.4f\n",
                method_name(method), s.ece_mean, s.ece_std, s.over_mean, s.over_std, s.cls_mean);
  }
  if (!config.zero_timing)
    std::printf(
        "wall clock: classifier %.0f ms, feature learning %.0f ms, discriminator %.0f ms, "
        "temperature %.0f ms, evaluation %.0f ms\n",
        totals.classifier_ms, totals.featlearn_ms, totals.discriminator_ms,
        totals.temperature_ms, totals.evaluation_ms);
  std::printf("wrote %s/results.csv and %s/summary.csv\n", out_dir.c_str(), out_dir.c_str());
  return 0;
}

int cmd_reliability(const std::string& checkpoint, const std::string& data_path,
                    const std::string& scenario_name, int n, uint64_t seed, int bins,
                    const std::string& out_flag) {
  Forecaster forecaster = load_forecaster(checkpoint);
  Dataset eval_data;
  if (!data_path.empty()) {
    eval_data = load_csv(data_path);
  } else if (!scenario_name.empty()) {
    eval_data = sample(scenario_by_name(scenario_name), n, seed, SampleKind::TargetLabeledEval);
  } else {
    std::cerr << "reliability: need --data or --scenario\n";
    return 1;
  }
  if (!eval_data.labeled()) {
    std::cerr << "reliability: evaluation data has no labels\n";
    return 1;
  }

  Matrix logits = forecaster_logits(forecaster, eval_data.features);
  std::vector<int> pred(logits.rows);
  for (int i = 0; i < logits.rows; ++i) pred[i] = argmax_row(logits.row(i), logits.cols);
  EceReport report = reliability_bins(forecaster, pred, eval_data, bins);

  std::string out_dir = out_flag.empty()
                            ? (std::getenv("SHIFTCAL_OUT_DIR") ? std::getenv("SHIFTCAL_OUT_DIR")
                                                               : ".")
                            : out_flag;
  fs::create_directories(out_dir);
  atomic_write(out_dir + "/reliability.csv", reliability_csv(report));
  atomic_write(out_dir + "/reliability.svg", reliability_svg(report));
  std::printf("ece %.6f  overconfident_ece %.6f  (%d bins)\n", report.ece,
              report.overconfident_ece, report.bin_count);
  std::printf("wrote %s/reliability.csv and %s/reliability.svg\n", out_dir.c_str(),
              out_dir.c_str());
  return 0;
}

int cmd_verify_bound(const std::string& scenario_name, int trials, uint64_t seed,
                     bool debug_lambda_one) {
  Scenario scenario = scenario_by_name(scenario_name);
  if (scenario.kind != ScenarioKind::Enumerable || !scenario.domain) {
    std::cerr << "verify-bound: scenario '" << scenario_name << "' is not enumerable\n";
    return 1;
  }
  VerifyOptions options;
  options.trials = trials;
  options.seed = seed;
  options.corrupt_lambda = debug_lambda_one;
  VerifyOutcome outcome = verify_bound_suite(*scenario.domain, options);

  std::printf("scenario %s, %d random instances, seed %llu%s\n", scenario_name.c_str(),
              outcome.trials, static_cast<unsigned long long>(seed),
              debug_lambda_one ? " [lambda corrupted to 1]" : "");
  std::printf("min slack:           %.6e\n", outcome.min_slack);
  std::printf("tight-instance gap:  %.3e\n", outcome.tight_slack);
  std::printf("chain failures:      %d\n", outcome.chain_failures);
  std::printf("violations:          %d\n", outcome.violations);
  if (!outcome.ok()) {
    if (!outcome.first_violation.empty())
      std::cerr << "offending instance: " << outcome.first_violation << "\n";
    return 2;
  }
  return 0;
}

int cmd_iw_report(const std::string& config_path, const std::string& out_flag) {
  RunConfig config = RunConfig::from_json_file(config_path);
  if (config.seeds.size() < 2) {
    std::cerr << "iw-report: need at least two seeds\n";
    return 1;
  }
  std::string out_dir = config.resolve_output_dir(out_flag);
  fs::create_directories(out_dir);

  StageConfigs stages;
  MethodInputs inputs = config.make_inputs(stages);
  if (!method_uses_weights(config.iw_method)) {
    std::cerr << "iw-report: iw_method must use importance weights\n";
    return 1;
  }

  std::vector<std::vector<double>> runs;
  for (uint64_t seed : config.seeds) {
    MethodResult res = run_method(config.iw_method, inputs, stages, seed);
    runs.push_back(res.validation_weights);
  }
  std::vector<IwExampleStat> stats = iw_distribution_report(runs, config.iw_top_k);

  std::ostringstream csv;
  csv << "rank,example,w_mean,w_median,w_min,w_max\n";
  for (size_t r = 0; r < stats.size(); ++r)
    csv << r + 1 << "," << stats[r].example << "," << fmt(stats[r].mean) << ","
        << fmt(stats[r].median) << "," << fmt(stats[r].min) << "," << fmt(stats[r].max) << "\n";
  atomic_write(out_dir + "/iw_report.csv", csv.str());
  atomic_write(out_dir + "/iw_report.svg", iw_box_svg(stats));
  std::printf("wrote %s/iw_report.csv and %s/iw_report.svg (%zu examples, %zu runs)\n",
              out_dir.c_str(), out_dir.c_str(), stats.size(), runs.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shiftcal: probability recalibration under covariate shift"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  auto* run = app.add_subcommand("run", "run calibration methods and write results");
  run->add_option("-c,--config", config_path, "JSON run config")->required();
  run->add_option("-o,--out", out_dir, "output directory");

  std::string checkpoint, data_path, rel_scenario;
  int rel_n = 2000, bins = 15;
  uint64_t rel_seed = 1;
  auto* rel = app.add_subcommand("reliability", "reliability diagram for a checkpoint");
  rel->add_option("--checkpoint", checkpoint, "forecaster checkpoint JSON")->required();
  rel->add_option("--data", data_path, "labeled evaluation CSV");
  rel->add_option("--scenario", rel_scenario, "built-in scenario to sample instead of --data");
  rel->add_option("--n", rel_n, "evaluation sample size with --scenario");
  rel->add_option("--seed", rel_seed, "sampling seed with --scenario");
  rel->add_option("--bins", bins, "number of bins");
  rel->add_option("-o,--out", out_dir, "output directory");

  std::string vb_scenario = "grid-K3";
  int trials = 100;
  uint64_t vb_seed = 0;
  bool lambda_one = false;
  auto* vb = app.add_subcommand("verify-bound", "check the calibration-error bound by enumeration");
  vb->add_option("--scenario", vb_scenario, "enumerable scenario");
  vb->add_option("--trials", trials, "number of random instances");
  vb->add_option("--seed", vb_seed, "instance generator seed");
  vb->add_flag("--debug-lambda-one", lambda_one, "corrupt lambda to 1 (must detect violations)");

  auto* iw = app.add_subcommand("iw-report", "importance-weight spread across runs");
  iw->add_option("-c,--config", config_path, "JSON run config")->required();
  iw->add_option("-o,--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir);
    if (rel->parsed())
      return cmd_reliability(checkpoint, data_path, rel_scenario, rel_n, rel_seed, bins, out_dir);
    if (vb->parsed()) return cmd_verify_bound(vb_scenario, trials, vb_seed, lambda_one);
    if (iw->parsed()) return cmd_iw_report(config_path, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
