#pragma once

// Flat key=value run configuration.  Lines are `key = value`; `#` starts a
// comment.  Unknown keys are rejected.  to_text() prints every key with
// doubles at 17 significant digits, so a resolved file reloads bit-exactly.

#include <cstddef>
#include <filesystem>
#include <string>

#include "stgnrde/datasets.hpp"
#include "stgnrde/model.hpp"
#include "stgnrde/solver.hpp"
#include "stgnrde/trainer.hpp"

namespace stgnrde {

struct RunConfig {
  DatasetSpec data;
  ModelConfig model;  // num_nodes and in_channels are taken from the data
  TrainConfig train;
  SolveSpec solve;
  SplitPlan split;
  std::size_t input_len = 12;
  double drop_rate = 0.0;
  std::size_t substeps = 1;
  std::filesystem::path out = "run";

  void validate() const;
};

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
RunConfig parse_config(const std::string& text, RunConfig base = {});
// Relative data paths resolve against the config file's directory, or
// against the working directory when `relative_to_file` is false (presets).
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {},
                      bool relative_to_file = true);
std::string to_text(const RunConfig& cfg);

// Directory holding the bundled presets (pemsd4.cfg, synth.cfg, ...).
std::filesystem::path preset_dir();

}  // namespace stgnrde
