#pragma once

// Data ingestion, normalization, sliding windows, splits, irregular
// observation dropping and the synthetic ring-diffusion generator.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace stgnrde {

struct DatasetSpec {
  std::filesystem::path values;
  std::optional<std::filesystem::path> adjacency;
  std::size_t channels = 1;
  double interval_minutes = 5.0;
  std::string name;
};

// values: nodes x timesteps x channels, row-major.
struct Dataset {
  std::size_t nodes = 0;
  std::size_t timesteps = 0;
  std::size_t channels = 0;
  std::vector<double> values;

  double& at(std::size_t node, std::size_t t, std::size_t ch) {
    return values[(node * timesteps + t) * channels + ch];
  }
  double at(std::size_t node, std::size_t t, std::size_t ch) const {
    return values[(node * timesteps + t) * channels + ch];
  }
};

using Edge = std::tuple<std::size_t, std::size_t, double>;

// CSV: one row per timestep; columns are channel-blocked node readings
// (all nodes of channel 0, then all nodes of channel 1, ...).  A first row
// that does not parse as numbers is treated as a header.
Dataset load_values(const std::filesystem::path& path, std::size_t channels);
Dataset load(const DatasetSpec& spec);
void save_values(const std::filesystem::path& path, const Dataset& data);

// Edge list CSV with header `src,dst,weight`.
std::vector<Edge> load_edges(const std::filesystem::path& path);
void save_edges(const std::filesystem::path& path, const std::vector<Edge>& edges);

// Writes via a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
// %.17g
std::string format_double(double x);

struct Normalizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  double normalize(double x, std::size_t ch) const { return (x - mean[ch]) / stddev[ch]; }
  double denormalize(double x, std::size_t ch) const { return x * stddev[ch] + mean[ch]; }
};

// Per-channel z-score statistics over timesteps [t_begin, t_end).
Normalizer fit_normalizer(const Dataset& data, std::size_t t_begin, std::size_t t_end);
Dataset normalize(const Dataset& data, const Normalizer& norm);
Dataset denormalize(const Dataset& data, const Normalizer& norm);

struct Window {
  std::size_t offset = 0;
  std::vector<double> input;        // nodes x input_len x channels
  std::vector<std::uint8_t> mask;   // nodes x input_len
  std::vector<double> target;       // nodes x horizon x out_channels
};

struct WindowSet {
  std::size_t nodes = 0;
  std::size_t channels = 0;
  std::size_t input_len = 12;
  std::size_t horizon = 12;
  std::size_t out_channels = 1;
  std::vector<Window> windows;

  std::size_t size() const { return windows.size(); }
  WindowSet subset(const std::vector<std::size_t>& indices) const;
};

// One window per valid offset: timesteps - input_len - horizon + 1 of them.
WindowSet make_windows(const Dataset& data, std::size_t input_len, std::size_t horizon,
                       std::size_t out_channels = 1);

enum class SplitKind { chronological, rolling_cv, blocked_cv };

std::string to_string(SplitKind k);
SplitKind parse_split_kind(const std::string& s);

struct SplitPlan {
  SplitKind kind = SplitKind::chronological;
  std::array<double, 3> ratios{6.0, 2.0, 2.0};
  std::size_t folds = 4;

  void validate() const;
};

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Window-index splits; one entry for chronological, `folds` entries for CV.
std::vector<SplitIndices> split(std::size_t window_count, const SplitPlan& plan);

// Timestep range [begin, end) covered by the training windows of a split,
// clipped so it never reaches the first test timestep.
std::pair<std::size_t, std::size_t> training_range(const WindowSet& windows,
                                                   const SplitIndices& indices);

// Masks each interior input timestep of every node independently with
// probability `rate`; the first and last input timestep stay observed.
void drop_observations(WindowSet& windows, double rate, std::uint64_t seed);

struct SynthSpec {
  std::size_t nodes = 8;
  std::size_t timesteps = 600;
  std::uint64_t seed = 1;
  double base = 200.0;
  double amplitude = 50.0;
  double period = 12.0;
  double coupling = 0.3;
  double noise_fraction = 0.05;  // noise sigma relative to amplitude
};

struct SynthData {
  Dataset data;
  std::vector<Edge> edges;
};

// Ring of sensors: node v carries base + A sin(2 pi t / period + phi_v) plus
// coupling * A * (mean of its two ring neighbours' sinusoids) plus Gaussian
// noise.  Phases are drawn from the seed.
SynthData synth(const SynthSpec& spec);

// Writes values.csv and adjacency.csv under `dir`.
DatasetSpec write_synth(const SynthSpec& spec, const std::filesystem::path& dir);

}  // namespace stgnrde
