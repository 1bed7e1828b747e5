#include "stgnrde/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "stgnrde/error.hpp"

namespace stgnrde {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  if (v.empty() || v[0] == '-') throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  char* end = nullptr;
  errno = 0;
  unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (errno != 0 || *end != '\0') throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return static_cast<std::size_t>(x);
}

double parse_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  double x = std::strtod(v.c_str(), &end);
  if (v.empty() || errno != 0 || *end != '\0' || !std::isfinite(x)) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return x;
}

std::array<double, 3> parse_ratios(const std::string& v) {
  std::array<double, 3> r{};
  std::stringstream ss(v);
  std::string part;
  std::size_t i = 0;
  while (std::getline(ss, part, ':')) {
    if (i == 3) throw ConfigError("ratios: expected train:val:test, got '" + v + "'");
    r[i++] = parse_real("ratios", trim(part));
  }
  if (i != 3) throw ConfigError("ratios: expected train:val:test, got '" + v + "'");
  return r;
}

}  // namespace

void RunConfig::validate() const {
  if (data.values.empty()) throw ConfigError("data: no values file given");
  if (data.channels < 1) throw ConfigError("channels must be >= 1");
  if (input_len < 2) throw ConfigError("input_len must be >= 2");
  if (!(drop_rate >= 0.0 && drop_rate < 1.0)) throw ConfigError("drop_rate must be in [0, 1)");
  if (substeps < 1) throw ConfigError("substeps must be >= 1");
  if (model.out_channels > data.channels) throw ConfigError("out_channels exceeds channels");
  if (model.subpath > input_len - 1) throw ConfigError("subpath exceeds the input span");
  ModelConfig m = model;
  m.num_nodes = std::max<std::size_t>(m.num_nodes, 1);
  m.in_channels = data.channels;
  m.validate();
  train.validate();
  solve.validate();
  split.validate();
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  const std::string& v = value;
  if (key == "data") c.data.values = v;
  else if (key == "adjacency") {
    if (v.empty() || v == "none") c.data.adjacency.reset();
    else c.data.adjacency = v;
  }
  else if (key == "channels") c.data.channels = parse_size(key, v);
  else if (key == "interval") c.data.interval_minutes = parse_real(key, v);
  else if (key == "name") c.data.name = v;
  else if (key == "input_len") c.input_len = parse_size(key, v);
  else if (key == "horizon") c.model.horizon = parse_size(key, v);
  else if (key == "out_channels") c.model.out_channels = parse_size(key, v);
  else if (key == "hidden") c.model.dim_h = c.model.dim_z = parse_size(key, v);
  else if (key == "dim_h") c.model.dim_h = parse_size(key, v);
  else if (key == "dim_z") c.model.dim_z = parse_size(key, v);
  else if (key == "k") c.model.depth_k = parse_size(key, v);
  else if (key == "embed_dim") c.model.embed_dim = parse_size(key, v);
  else if (key == "sig_depth") c.model.sig_depth = parse_size(key, v);
  else if (key == "subpath") c.model.subpath = parse_size(key, v);
  else if (key == "variant") c.model.variant = parse_variant(v);
  else if (key == "gnn") c.model.gnn = parse_gnn_kind(v);
  else if (key == "epochs") c.train.epochs = parse_size(key, v);
  else if (key == "batch_size") c.train.batch_size = parse_size(key, v);
  else if (key == "lr") c.train.lr = parse_real(key, v);
  else if (key == "weight_decay") c.train.weight_decay = parse_real(key, v);
  else if (key == "patience") c.train.patience = parse_size(key, v);
  else if (key == "seed") c.train.seed = parse_size(key, v);
  else if (key == "method") c.solve.method = parse_method(v);
  else if (key == "steps_per_window") c.solve.steps_per_window = parse_size(key, v);
  else if (key == "split") c.split.kind = parse_split_kind(v);
  else if (key == "ratios") c.split.ratios = parse_ratios(v);
  else if (key == "folds") c.split.folds = parse_size(key, v);
  else if (key == "drop_rate") c.drop_rate = parse_real(key, v);
  else if (key == "substeps") c.substeps = parse_size(key, v);
  else if (key == "out") c.out = v;
  else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    try {
      apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base, bool relative_to_file) {
  std::ifstream in(path);
  if (!std::filesystem::is_regular_file(path) || !in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_config(ss.str(), std::move(base));
  auto resolve = [&](std::filesystem::path& p) {
    if (p.empty() || p.is_absolute()) return;
    p = std::filesystem::absolute(relative_to_file ? path.parent_path() / p : p);
  };
  resolve(cfg.data.values);
  if (cfg.data.adjacency) resolve(*cfg.data.adjacency);
  return cfg;
}

std::string to_text(const RunConfig& c) {
  std::ostringstream o;
  auto kv = [&](const char* k, const std::string& v) { o << k << " = " << v << '\n'; };
  auto sz = [&](const char* k, std::size_t v) { kv(k, std::to_string(v)); };
  auto re = [&](const char* k, double v) { kv(k, format_double(v)); };
  o << "# data\n";
  kv("data", c.data.values.string());
  kv("adjacency", c.data.adjacency ? c.data.adjacency->string() : "none");
  sz("channels", c.data.channels);
  re("interval", c.data.interval_minutes);
  kv("name", c.data.name);
  sz("input_len", c.input_len);
  re("drop_rate", c.drop_rate);
  o << "# model\n";
  sz("horizon", c.model.horizon);
  sz("out_channels", c.model.out_channels);
  sz("dim_h", c.model.dim_h);
  sz("dim_z", c.model.dim_z);
  sz("k", c.model.depth_k);
  sz("embed_dim", c.model.embed_dim);
  sz("sig_depth", c.model.sig_depth);
  sz("subpath", c.model.subpath);
  sz("substeps", c.substeps);
  kv("variant", to_string(c.model.variant));
  kv("gnn", to_string(c.model.gnn));
  o << "# solver\n";
  kv("method", to_string(c.solve.method));
  sz("steps_per_window", c.solve.steps_per_window);
  o << "# training\n";
  sz("epochs", c.train.epochs);
  sz("batch_size", c.train.batch_size);
  re("lr", c.train.lr);
  re("weight_decay", c.train.weight_decay);
  sz("patience", c.train.patience);
  sz("seed", c.train.seed);
  kv("split", to_string(c.split.kind));
  kv("ratios", format_double(c.split.ratios[0]) + ":" + format_double(c.split.ratios[1]) + ":" +
                   format_double(c.split.ratios[2]));
  sz("folds", c.split.folds);
  kv("out", c.out.string());
  return o.str();
}

std::filesystem::path preset_dir() { return STGNRDE_PRESET_DIR; }

}  // namespace stgnrde
