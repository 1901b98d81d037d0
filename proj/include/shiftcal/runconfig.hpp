#pragma once

#include <optional>
#include <string>
#include <vector>

#include "shiftcal/pipeline.hpp"

namespace shiftcal {

// Per-run settings parsed from a JSON config document.
struct RunConfig {
  std::string scenario_name;  // empty when CSV paths are given
  struct CsvInputs {
    std::string source_train;
    std::string source_val;
    std::string target_unlabeled;
    std::string target_eval;
    int classes = 0;
  };
  std::optional<CsvInputs> csv;

  std::vector<Method> methods;
  std::vector<uint64_t> seeds;
  uint64_t data_seed = 1;
  SampleSizes samples;
  StageConfigs stages;
  bool clamp_auto = true;  // use the scenario's known weight bound when it has one
  std::string output_dir;  // empty = env SHIFTCAL_OUT_DIR, else "."
  bool zero_timing = false;
  std::string save_checkpoints = "first";  // none | first | all
  int iw_top_k = 15;
  Method iw_method = Method::IwTemp;

  static RunConfig from_json_file(const std::string& path);
  static RunConfig from_json_text(const std::string& text);

  // Resolves output_dir against the flag, the config and the environment.
  std::string resolve_output_dir(const std::string& flag_value) const;

  // Loads or samples the four pools; fills stages.clamp_bound when auto.
  MethodInputs make_inputs(StageConfigs& resolved) const;
};

}  // namespace shiftcal
