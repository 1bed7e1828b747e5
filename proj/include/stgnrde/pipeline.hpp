#pragma once

// End-to-end runs driven by a RunConfig: load, window, drop, split,
// normalize, train, evaluate and write artifacts.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <json.hpp>

#include "stgnrde/config.hpp"

namespace stgnrde {

struct FoldOutcome {
  std::size_t fold = 0;
  std::filesystem::path dir;
  MetricReport train, val, test, ha_test;
  FitResult fit;
};

struct TrainOutcome {
  std::vector<FoldOutcome> folds;
  nlohmann::json metrics;
};

// Writes checkpoint.bin, history.csv, config.resolved and metrics.json under
// cfg.out (one fold_<k> subdirectory per fold for cross-validation, plus a
// summary metrics.json with mean and std).  `log` receives per-epoch lines.
TrainOutcome run_training(const RunConfig& cfg, std::ostream* log = nullptr);

// Recomputes the validation and test metrics of the fold a checkpoint was
// trained on.  `data` replaces the values file named in the stored config.
nlohmann::json evaluate_checkpoint(const std::filesystem::path& checkpoint,
                                   const std::filesystem::path& data);

// Forecasts for every window of `data` as CSV `window,node,horizon,value`
// (a `channel` column follows `horizon` when out_channels > 1).  Returns
// the number of data rows.
std::size_t predict_to_csv(const std::filesystem::path& checkpoint,
                           const std::filesystem::path& data, const std::filesystem::path& out);

}  // namespace stgnrde
