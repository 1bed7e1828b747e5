#include "stgnrde/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "stgnrde/error.hpp"

namespace stgnrde {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) lines.push_back(line);
  }
  return lines;
}

bool row_is_numeric(const std::vector<std::string_view>& fields) {
  for (auto f : fields)
    if (!parse_number(f)) return false;
  return true;
}

// Splits n items by ratio; leftovers from flooring go to the earliest part.
std::array<std::size_t, 3> ratio_sizes(std::size_t n, const std::array<double, 3>& ratios) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  std::size_t val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios[1] / total + 1e-9));
  std::size_t test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios[2] / total + 1e-9));
  return {n - val - test, val, test};
}

SplitIndices contiguous(std::size_t begin, std::size_t n, const std::array<double, 3>& ratios,
                        const std::string& label) {
  auto sizes = ratio_sizes(n, ratios);
  if (sizes[0] == 0 || sizes[1] == 0 || sizes[2] == 0) {
    throw DataError(label + ": " + std::to_string(n) + " windows are not enough for a " +
                    "train/val/test split");
  }
  SplitIndices s;
  std::size_t i = begin;
  for (std::size_t k = 0; k < sizes[0]; ++k) s.train.push_back(i++);
  for (std::size_t k = 0; k < sizes[1]; ++k) s.val.push_back(i++);
  for (std::size_t k = 0; k < sizes[2]; ++k) s.test.push_back(i++);
  return s;
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << contents;
    if (!out) throw DataError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Dataset load_values(const std::filesystem::path& path, std::size_t channels) {
  if (channels < 1) throw ConfigError("channels must be >= 1");
  auto lines = read_lines(path);
  std::size_t first = 0;
  if (!lines.empty() && !row_is_numeric(split_fields(lines[0]))) first = 1;
  if (lines.size() <= first) throw DataError(path.string() + ": no data rows");

  const std::size_t cols = split_fields(lines[first]).size();
  if (cols % channels != 0) {
    throw DataError(path.string() + ": " + std::to_string(cols) + " columns are not divisible by " +
                    std::to_string(channels) + " channels");
  }
  Dataset d;
  d.channels = channels;
  d.nodes = cols / channels;
  d.timesteps = lines.size() - first;
  d.values.resize(d.nodes * d.timesteps * d.channels);
  for (std::size_t r = first; r < lines.size(); ++r) {
    auto fields = split_fields(lines[r]);
    const std::size_t row = r + 1;  // 1-based line number for messages
    if (fields.size() != cols) {
      throw DataError(path.string() + ": row " + std::to_string(row) + " has " +
                      std::to_string(fields.size()) + " fields, expected " + std::to_string(cols));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      auto v = parse_number(fields[c]);
      if (!v || !std::isfinite(*v)) {
        throw DataError(path.string() + ": row " + std::to_string(row) + ", column " +
                        std::to_string(c + 1) + " is not a finite number");
      }
      d.at(c % d.nodes, r - first, c / d.nodes) = *v;
    }
  }
  return d;
}

Dataset load(const DatasetSpec& spec) { return load_values(spec.values, spec.channels); }

void save_values(const std::filesystem::path& path, const Dataset& data) {
  std::string out;
  for (std::size_t t = 0; t < data.timesteps; ++t) {
    for (std::size_t ch = 0; ch < data.channels; ++ch) {
      for (std::size_t v = 0; v < data.nodes; ++v) {
        if (ch || v) out += ',';
        out += format_double(data.at(v, t, ch));
      }
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<Edge> load_edges(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  std::vector<Edge> edges;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    auto fields = split_fields(lines[r]);
    if (r == 0 && !row_is_numeric(fields)) continue;
    if (fields.size() != 3) {
      throw DataError(path.string() + ": row " + std::to_string(r + 1) + " needs src,dst,weight");
    }
    auto s = parse_number(fields[0]);
    auto t = parse_number(fields[1]);
    auto w = parse_number(fields[2]);
    if (!s || !t || !w || *s < 0 || *t < 0) {
      throw DataError(path.string() + ": row " + std::to_string(r + 1) + " is malformed");
    }
    edges.emplace_back(static_cast<std::size_t>(*s), static_cast<std::size_t>(*t), *w);
  }
  return edges;
}

void save_edges(const std::filesystem::path& path, const std::vector<Edge>& edges) {
  std::string out = "src,dst,weight\n";
  for (const auto& [s, t, w] : edges) {
    out += std::to_string(s) + ',' + std::to_string(t) + ',' + format_double(w) + '\n';
  }
  write_file_atomic(path, out);
}

Normalizer fit_normalizer(const Dataset& data, std::size_t t_begin, std::size_t t_end) {
  if (t_end > data.timesteps || t_begin >= t_end) throw DataError("empty normalization range");
  Normalizer n;
  n.mean.assign(data.channels, 0.0);
  n.stddev.assign(data.channels, 0.0);
  const double count = static_cast<double>(data.nodes * (t_end - t_begin));
  for (std::size_t ch = 0; ch < data.channels; ++ch) {
    double s = 0.0;
    for (std::size_t v = 0; v < data.nodes; ++v)
      for (std::size_t t = t_begin; t < t_end; ++t) s += data.at(v, t, ch);
    const double mu = s / count;
    double ss = 0.0;
    for (std::size_t v = 0; v < data.nodes; ++v)
      for (std::size_t t = t_begin; t < t_end; ++t) ss += (data.at(v, t, ch) - mu) * (data.at(v, t, ch) - mu);
    const double sd = std::sqrt(ss / count);
    if (!(sd > 1e-12 * std::max(1.0, std::fabs(mu)))) {
      throw DataError("channel " + std::to_string(ch) + " has zero standard deviation over the training range");
    }
    n.mean[ch] = mu;
    n.stddev[ch] = sd;
  }
  return n;
}

Dataset normalize(const Dataset& data, const Normalizer& norm) {
  Dataset out = data;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = norm.normalize(out.values[i], i % out.channels);
  }
  return out;
}

Dataset denormalize(const Dataset& data, const Normalizer& norm) {
  Dataset out = data;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = norm.denormalize(out.values[i], i % out.channels);
  }
  return out;
}

WindowSet WindowSet::subset(const std::vector<std::size_t>& indices) const {
  WindowSet out;
  out.nodes = nodes;
  out.channels = channels;
  out.input_len = input_len;
  out.horizon = horizon;
  out.out_channels = out_channels;
  for (std::size_t i : indices) out.windows.push_back(windows.at(i));
  return out;
}

WindowSet make_windows(const Dataset& data, std::size_t input_len, std::size_t horizon,
                       std::size_t out_channels) {
  if (input_len < 2 || horizon < 1) throw ConfigError("input length must be >= 2 and horizon >= 1");
  if (out_channels < 1 || out_channels > data.channels) {
    throw ConfigError("out_channels must be between 1 and the channel count");
  }
  if (data.timesteps < input_len + horizon) {
    throw DataError(std::to_string(data.timesteps) + " timesteps cannot hold a window of " +
                    std::to_string(input_len) + " inputs and " + std::to_string(horizon) + " targets");
  }
  WindowSet ws;
  ws.nodes = data.nodes;
  ws.channels = data.channels;
  ws.input_len = input_len;
  ws.horizon = horizon;
  ws.out_channels = out_channels;
  const std::size_t count = data.timesteps - input_len - horizon + 1;
  ws.windows.resize(count);
  for (std::size_t w = 0; w < count; ++w) {
    Window& win = ws.windows[w];
    win.offset = w;
    win.input.resize(data.nodes * input_len * data.channels);
    win.mask.assign(data.nodes * input_len, 1);
    win.target.resize(data.nodes * horizon * out_channels);
    for (std::size_t v = 0; v < data.nodes; ++v) {
      for (std::size_t t = 0; t < input_len; ++t)
        for (std::size_t ch = 0; ch < data.channels; ++ch)
          win.input[(v * input_len + t) * data.channels + ch] = data.at(v, w + t, ch);
      for (std::size_t s = 0; s < horizon; ++s)
        for (std::size_t ch = 0; ch < out_channels; ++ch)
          win.target[(v * horizon + s) * out_channels + ch] = data.at(v, w + input_len + s, ch);
    }
  }
  return ws;
}

std::string to_string(SplitKind k) {
  switch (k) {
    case SplitKind::chronological: return "chronological";
    case SplitKind::rolling_cv: return "rolling";
    case SplitKind::blocked_cv: return "blocked";
  }
  return "?";
}

SplitKind parse_split_kind(const std::string& s) {
  if (s == "chronological") return SplitKind::chronological;
  if (s == "rolling" || s == "rolling_cv") return SplitKind::rolling_cv;
  if (s == "blocked" || s == "blocked_cv") return SplitKind::blocked_cv;
  throw ConfigError("unknown split kind '" + s + "' (expected chronological|rolling|blocked)");
}

void SplitPlan::validate() const {
  for (double r : ratios)
    if (!(r > 0.0)) throw ConfigError("split ratios must be positive");
  if (kind != SplitKind::chronological && folds < 2) {
    throw ConfigError("cross-validation needs at least 2 folds");
  }
}

std::vector<SplitIndices> split(std::size_t window_count, const SplitPlan& plan) {
  plan.validate();
  std::vector<SplitIndices> out;
  switch (plan.kind) {
    case SplitKind::chronological:
      out.push_back(contiguous(0, window_count, plan.ratios, "chronological split"));
      break;
    case SplitKind::rolling_cv:
      // Fold k uses the prefix of (k + 1) / folds of the windows.
      for (std::size_t k = 0; k < plan.folds; ++k) {
        std::size_t prefix = window_count * (k + 1) / plan.folds;
        out.push_back(contiguous(0, prefix, plan.ratios, "rolling fold " + std::to_string(k)));
      }
      break;
    case SplitKind::blocked_cv: {
      const std::size_t block = window_count / plan.folds;
      for (std::size_t k = 0; k < plan.folds; ++k) {
        out.push_back(contiguous(k * block, block, plan.ratios, "blocked fold " + std::to_string(k)));
      }
      break;
    }
  }
  return out;
}

std::pair<std::size_t, std::size_t> training_range(const WindowSet& windows,
                                                   const SplitIndices& indices) {
  if (indices.train.empty()) throw DataError("empty training split");
  const std::size_t span = windows.input_len + windows.horizon;
  std::size_t begin = windows.windows.at(indices.train.front()).offset;
  std::size_t end = windows.windows.at(indices.train.back()).offset + span;
  if (!indices.test.empty()) end = std::min(end, windows.windows.at(indices.test.front()).offset);
  if (end <= begin) throw DataError("training range is empty after excluding test timesteps");
  return {begin, end};
}

void drop_observations(WindowSet& windows, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("drop rate must be in [0, 1)");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution drop(rate);
  const std::size_t len = windows.input_len;
  for (auto& win : windows.windows) {
    std::fill(win.mask.begin(), win.mask.end(), 1);
    if (rate == 0.0) continue;
    for (std::size_t v = 0; v < windows.nodes; ++v)
      for (std::size_t t = 1; t + 1 < len; ++t)
        if (drop(rng)) win.mask[v * len + t] = 0;
  }
}

SynthData synth(const SynthSpec& spec) {
  if (spec.nodes < 2) throw ConfigError("synthetic ring needs at least 2 nodes");
  if (spec.timesteps < 1) throw ConfigError("timesteps must be >= 1");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, spec.noise_fraction * spec.amplitude);

  std::vector<double> phase(spec.nodes);
  for (double& p : phase) p = phase_dist(rng);

  SynthData out;
  Dataset& d = out.data;
  d.nodes = spec.nodes;
  d.timesteps = spec.timesteps;
  d.channels = 1;
  d.values.resize(d.nodes * d.timesteps);
  auto wave = [&](std::size_t v, std::size_t t) {
    return std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / spec.period + phase[v]);
  };
  for (std::size_t t = 0; t < spec.timesteps; ++t) {
    for (std::size_t v = 0; v < spec.nodes; ++v) {
      const std::size_t left = (v + spec.nodes - 1) % spec.nodes;
      const std::size_t right = (v + 1) % spec.nodes;
      double x = spec.base + spec.amplitude * wave(v, t) +
                 spec.coupling * spec.amplitude * 0.5 * (wave(left, t) + wave(right, t));
      if (spec.noise_fraction > 0.0) x += noise(rng);
      d.at(v, t, 0) = x;
    }
  }
  for (std::size_t v = 0; v < spec.nodes; ++v) {
    const std::size_t right = (v + 1) % spec.nodes;
    if (spec.nodes == 2 && v == 1) break;  // the two-node ring has a single edge pair
    out.edges.emplace_back(v, right, 1.0);
    out.edges.emplace_back(right, v, 1.0);
  }
  return out;
}

DatasetSpec write_synth(const SynthSpec& spec, const std::filesystem::path& dir) {
  SynthData s = synth(spec);
  std::filesystem::create_directories(dir);
  DatasetSpec ds;
  ds.values = dir / "values.csv";
  ds.adjacency = dir / "adjacency.csv";
  ds.channels = 1;
  ds.name = "synth";
  save_values(ds.values, s.data);
  save_edges(*ds.adjacency, s.edges);
  return ds;
}

}  // namespace stgnrde
