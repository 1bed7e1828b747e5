#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stgnrde/datasets.hpp"
#include "stgnrde/logsig.hpp"
#include "stgnrde/model.hpp"
#include "stgnrde/solver.hpp"

namespace stgnrde {

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  double weight_decay = 1e-3;
  std::size_t patience = 15;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MetricReport {
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;  // fraction, not percent
  std::vector<double> horizon_mae, horizon_rmse, horizon_mape;
};

void to_json(nlohmann::json& j, const MetricReport& r);

// Metrics over samples x nodes x horizon x channels arrays of raw-unit
// values.  Targets with |y| < 1e-3 are left out of MAPE.
MetricReport compute_metrics(std::span<const double> pred, std::span<const double> target,
                             std::size_t horizon, std::size_t out_channels);

// Mean absolute deviation over every entry.
Tensor l1_loss(const Tensor& pred, const Tensor& target);

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::size_t step = 0;
};

// Adam (0.9, 0.999, 1e-8) on grad + weight_decay * param.  Parameters
// without a gradient are treated as having a zero task gradient.
void adam_step(ParamStore& params, AdamState& state, double lr, double weight_decay);

// Windows converted to model inputs: normalized first frame, log-signature
// controls and targets in both normalized and raw units.
struct PreparedSample {
  std::vector<double> first_frame;   // nodes x channels
  std::vector<double> logsig;        // windows x nodes x coords
  std::vector<double> target_norm;   // nodes x horizon x out_channels
  std::vector<double> target_raw;
  std::vector<double> history_raw;   // nodes x input_len x out_channels, raw units
  std::vector<std::uint8_t> history_mask;
};

struct PreparedData {
  std::size_t nodes = 0;
  std::size_t channels = 0;
  std::size_t input_len = 0;
  std::size_t horizon = 0;
  std::size_t out_channels = 0;
  std::size_t coords = 0;
  std::vector<double> boundaries;
  std::vector<double> divisors;
  std::vector<PreparedSample> samples;

  std::size_t size() const { return samples.size(); }
};

PreparedData prepare(const WindowSet& windows, const Normalizer& norm, std::size_t sig_depth,
                     std::size_t subpath, std::size_t substeps = 1);

struct Batch {
  ModelInput input;
  Tensor target;  // [rows, horizon*out_channels], normalized
};

Batch make_batch(const PreparedData& data, std::span<const std::size_t> indices);

// Raw-unit predictions for every sample: samples x nodes x horizon x channels.
std::vector<double> predict(const GraphRde& model, const PreparedData& data, const Normalizer& norm,
                            const SolveSpec& spec, std::size_t batch_size = 64);

MetricReport evaluate(const GraphRde& model, const PreparedData& data, const Normalizer& norm,
                      const SolveSpec& spec, std::size_t batch_size = 64);

// Baseline predicting, for every horizon, the mean of the observed inputs.
MetricReport historical_average(const PreparedData& data);

struct HistoryRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_mae = 0.0;
};

std::string history_csv(const std::vector<HistoryRow>& history);

struct FitResult {
  std::vector<HistoryRow> history;
  std::size_t best_epoch = 0;
  double best_val_mae = 0.0;
};

struct FitOptions {
  // Written every time validation improves.
  std::optional<std::filesystem::path> checkpoint;
  nlohmann::json checkpoint_extra = nlohmann::json::object();
  std::function<void(const HistoryRow&)> on_epoch;
};

// Mini-batch Adam with early stopping on validation MAE.  On return the model
// holds the best-validation parameters.
FitResult fit(GraphRde& model, const PreparedData& train, const PreparedData& val,
              const Normalizer& norm, const TrainConfig& cfg, const SolveSpec& spec,
              const FitOptions& options = {});

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::vector<std::pair<std::string, double>> per_param;
};

// Taped gradient of l1_loss on one random batch against central differences
// (eps = 1e-5) for every parameter tensor.  The error of a tensor is
// ||taped - numeric|| / max(||taped||, ||numeric||).
GradcheckResult gradcheck(const ModelConfig& config, const SolveSpec& spec, std::uint64_t seed,
                          std::size_t input_len = 6, std::size_t batch = 2);

}  // namespace stgnrde
