#include "shiftcal/runconfig.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace shiftcal {

using nlohmann::json;

namespace {

void parse_sgd(const json& j, SgdConfig& cfg) {
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.dropout = j.value("dropout", cfg.dropout);
}

void parse_adversarial(const json& j, AdversarialConfig& cfg) {
  cfg.lambda_d = j.value("lambda_d", cfg.lambda_d);
  cfg.disc_steps_per_gen = j.value("disc_steps_per_gen", cfg.disc_steps_per_gen);
  cfg.stop_threshold = j.value("stop_threshold", cfg.stop_threshold);
  if (j.contains("stop_rule")) {
    std::string rule = j.at("stop_rule").get<std::string>();
    if (rule == "below")
      cfg.stop_below_threshold = true;
    else if (rule == "above")
      cfg.stop_below_threshold = false;
    else
      throw std::invalid_argument("stop_rule must be 'below' or 'above'");
  }
  cfg.min_epochs = j.value("min_epochs", cfg.min_epochs);
  cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
  cfg.confident_hi = j.value("confident_hi", cfg.confident_hi);
  cfg.confident_lo = j.value("confident_lo", cfg.confident_lo);
  cfg.confident_patience = j.value("confident_patience", cfg.confident_patience);
  cfg.dropout = j.value("dropout", cfg.dropout);
  cfg.gen_learning_rate = j.value("gen_learning_rate", cfg.gen_learning_rate);
  cfg.disc_learning_rate = j.value("disc_learning_rate", cfg.disc_learning_rate);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j = json::parse(text);
  RunConfig cfg;

  if (j.contains("scenario")) {
    const json& sc = j.at("scenario");
    if (sc.is_string()) {
      cfg.scenario_name = sc.get<std::string>();
    } else {
      CsvInputs csv;
      csv.source_train = sc.at("source_train").get<std::string>();
      csv.source_val = sc.at("source_val").get<std::string>();
      csv.target_unlabeled = sc.value("target_unlabeled", "");
      csv.target_eval = sc.value("target_eval", "");
      csv.classes = sc.at("classes").get<int>();
      cfg.csv = std::move(csv);
    }
  } else {
    throw std::invalid_argument("config: missing 'scenario'");
  }

  for (const auto& name : j.value("methods", std::vector<std::string>{"Temp"}))
    cfg.methods.push_back(method_from_name(name));
  cfg.seeds = j.value("seeds", std::vector<uint64_t>{});
  if (cfg.seeds.empty()) throw std::invalid_argument("config: 'seeds' must be nonempty");
  cfg.data_seed = j.value("data_seed", cfg.data_seed);

  if (j.contains("samples")) {
    const json& s = j.at("samples");
    cfg.samples.source_train = s.value("source_train", cfg.samples.source_train);
    cfg.samples.source_val = s.value("source_val", cfg.samples.source_val);
    cfg.samples.target_unlabeled = s.value("target_unlabeled", cfg.samples.target_unlabeled);
    cfg.samples.target_eval = s.value("target_eval", cfg.samples.target_eval);
  }

  // Stage defaults: training for 500 epochs, temperature fitting for 1000.
  cfg.stages.classifier.epochs = 500;
  cfg.stages.classifier.learning_rate = 0.5;
  cfg.stages.discriminator.epochs = 500;
  cfg.stages.discriminator.learning_rate = 0.5;
  cfg.stages.temperature.epochs = 1000;
  cfg.stages.temperature.learning_rate = 0.4;
  cfg.stages.temperature.batch_size = 1 << 20;  // full batch unless overridden

  if (j.contains("classifier")) {
    parse_sgd(j.at("classifier"), cfg.stages.classifier);
    cfg.stages.classifier_hidden = j.at("classifier").value("hidden", cfg.stages.classifier_hidden);
    if (j.at("classifier").contains("loss"))
      cfg.stages.classifier_loss =
          loss_kind_from_name(j.at("classifier").at("loss").get<std::string>());
  }
  if (j.contains("discriminator")) {
    parse_sgd(j.at("discriminator"), cfg.stages.discriminator);
    cfg.stages.discriminator_hidden =
        j.at("discriminator").value("hidden", cfg.stages.discriminator_hidden);
  }
  if (j.contains("temperature")) parse_sgd(j.at("temperature"), cfg.stages.temperature);
  if (j.contains("adversarial")) parse_adversarial(j.at("adversarial"), cfg.stages.adversarial);

  cfg.stages.mode = calibration_mode_from_name(j.value("mode", "recalibration"));
  cfg.stages.bins = j.value("bins", 15);

  if (j.contains("clamp_bound")) {
    const json& u = j.at("clamp_bound");
    if (u.is_string()) {
      if (u.get<std::string>() != "auto")
        throw std::invalid_argument("clamp_bound must be a number or 'auto'");
      cfg.clamp_auto = true;
    } else {
      cfg.stages.clamp_bound = u.get<double>();
      cfg.clamp_auto = false;
    }
  }

  cfg.output_dir = j.value("output_dir", "");
  cfg.zero_timing = j.value("zero_timing", false);
  cfg.save_checkpoints = j.value("save_checkpoints", "first");
  if (cfg.save_checkpoints != "none" && cfg.save_checkpoints != "first" &&
      cfg.save_checkpoints != "all")
    throw std::invalid_argument("save_checkpoints must be none, first or all");
  cfg.iw_top_k = j.value("iw_top_k", 15);
  if (j.contains("iw_method")) cfg.iw_method = method_from_name(j.at("iw_method"));
  return cfg;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string RunConfig::resolve_output_dir(const std::string& flag_value) const {
  if (!flag_value.empty()) return flag_value;
  if (!output_dir.empty()) return output_dir;
  if (const char* env = std::getenv("SHIFTCAL_OUT_DIR"); env && *env) return env;
  return ".";
}

MethodInputs RunConfig::make_inputs(StageConfigs& resolved) const {
  resolved = stages;
  MethodInputs inputs;
  if (csv) {
    auto require = [](const std::string& path, const char* what) {
      if (path.empty()) return;
      if (!std::filesystem::exists(path))
        throw std::invalid_argument(std::string(what) + " file does not exist: " + path);
    };
    require(csv->source_train, "source_train");
    require(csv->source_val, "source_val");
    require(csv->target_unlabeled, "target_unlabeled");
    require(csv->target_eval, "target_eval");
    inputs.source_train = load_csv(csv->source_train);
    inputs.source_val = load_csv(csv->source_val);
    if (!csv->target_unlabeled.empty()) inputs.target_unlabeled = load_csv(csv->target_unlabeled);
    if (!csv->target_eval.empty()) inputs.target_eval = load_csv(csv->target_eval);
    inputs.classes = csv->classes;
  } else {
    Scenario scenario = scenario_by_name(scenario_name);
    inputs = sample_inputs(scenario, samples, data_seed);
    if (clamp_auto && scenario.weight_bound) resolved.clamp_bound = *scenario.weight_bound;
  }
  return inputs;
}

}  // namespace shiftcal
