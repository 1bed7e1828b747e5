#include "stgnrde/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "stgnrde/error.hpp"
#include "stgnrde/logsig.hpp"
#include "stgnrde/solver.hpp"

namespace stgnrde {

namespace {

constexpr char kMagic[8] = {'S', 'T', 'G', 'N', 'R', 'D', 'E', '1'};
constexpr int kFormatVersion = 1;
constexpr double kAttentionSlope = 0.2;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

Tensor uniform_param(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = dist(rng);
  Tensor t = Tensor::from(std::move(shape), std::move(v));
  t.set_requires_grad();
  return t;
}

void add_fc(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
            std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  store.add(name + ".w", uniform_param({in, out}, bound, rng));
  store.add(name + ".b", uniform_param({1, out}, bound, rng));
}

Tensor fc(const ParamStore& p, const std::string& name, const Tensor& x, Activation act) {
  return linear(x, p.get(name + ".w"), p.get(name + ".b"), act);
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::temporal_only: return "temporal";
    case Variant::spatial_only: return "spatial";
  }
  return "?";
}

std::string to_string(GnnKind g) {
  switch (g) {
    case GnnKind::adaptive: return "adaptive";
    case GnnKind::chebyshev: return "chebyshev";
    case GnnKind::plain_gcn: return "plain_gcn";
    case GnnKind::attention: return "attention";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "temporal" || s == "temporal_only") return Variant::temporal_only;
  if (s == "spatial" || s == "spatial_only") return Variant::spatial_only;
  throw ConfigError("unknown variant '" + s + "' (expected full|temporal|spatial)");
}

GnnKind parse_gnn_kind(const std::string& s) {
  if (s == "adaptive") return GnnKind::adaptive;
  if (s == "chebyshev") return GnnKind::chebyshev;
  if (s == "plain_gcn") return GnnKind::plain_gcn;
  if (s == "attention") return GnnKind::attention;
  throw ConfigError("unknown gnn kind '" + s + "' (expected adaptive|chebyshev|plain_gcn|attention)");
}

std::size_t ModelConfig::logsig_dim() const { return witt_dimension(path_channels(), sig_depth); }

void ModelConfig::validate() const {
  const std::pair<const char*, std::size_t> extents[] = {
      {"num_nodes", num_nodes}, {"in_channels", in_channels}, {"horizon", horizon},
      {"out_channels", out_channels}, {"dim_h", dim_h}, {"dim_z", dim_z},
      {"k", depth_k}, {"embed_dim", embed_dim}, {"sig_depth", sig_depth},
      {"subpath", subpath}};
  for (const auto& [name, value] : extents) {
    if (value < 1) throw ConfigError(std::string(name) + " must be >= 1");
  }
  if (out_channels > in_channels) throw ConfigError("out_channels cannot exceed in_channels");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"num_nodes", c.num_nodes}, {"in_channels", c.in_channels},
                     {"horizon", c.horizon},     {"out_channels", c.out_channels},
                     {"dim_h", c.dim_h},         {"dim_z", c.dim_z},
                     {"k", c.depth_k},           {"embed_dim", c.embed_dim},
                     {"sig_depth", c.sig_depth}, {"subpath", c.subpath},
                     {"variant", to_string(c.variant)}, {"gnn", to_string(c.gnn)}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("num_nodes").get_to(c.num_nodes);
  j.at("in_channels").get_to(c.in_channels);
  j.at("horizon").get_to(c.horizon);
  j.at("out_channels").get_to(c.out_channels);
  j.at("dim_h").get_to(c.dim_h);
  j.at("dim_z").get_to(c.dim_z);
  j.at("k").get_to(c.depth_k);
  j.at("embed_dim").get_to(c.embed_dim);
  j.at("sig_depth").get_to(c.sig_depth);
  j.at("subpath").get_to(c.subpath);
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.gnn = parse_gnn_kind(j.at("gnn").get<std::string>());
}

// ---- ParamStore -----------------------------------------------------------

Tensor& ParamStore::add(std::string name, Tensor value) {
  if (contains(name)) throw ContractError("duplicate parameter " + name);
  entries_.emplace_back(std::move(name), std::move(value));
  return entries_.back().second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  throw ContractError("unknown parameter " + name);
}

Tensor& ParamStore::get(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const ParamStore&>(*this).get(name));
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& entry : entries_)
    if (entry.first == name) return true;
  return false;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& entry : entries_) n += entry.second.size();
  return n;
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& [name, t] : entries_) out.add(name, t.detach().set_requires_grad());
  return out;
}

void ParamStore::zero_grad() {
  for (auto& entry : entries_) entry.second.zero_grad();
}

HiddenState axpy(const HiddenState& state, const HiddenState& delta, double factor) {
  HiddenState out;
  if (state.h) out.h = add(*state.h, scale(*delta.h, factor));
  if (state.z) out.z = add(*state.z, scale(*delta.z, factor));
  return out;
}

// ---- GraphRde -------------------------------------------------------------

GraphRde::GraphRde(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  build_params(seed);
}

GraphRde::GraphRde(ModelConfig config, ParamStore params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  GraphRde reference(config_, 0);
  if (reference.params_.size() != params_.size()) {
    throw DataError("parameter set does not match the model configuration");
  }
  for (const auto& [name, t] : reference.params_) {
    if (!params_.contains(name) || params_.get(name).shape() != t.shape()) {
      throw DataError("parameter " + name + " missing or mis-shaped for this configuration");
    }
  }
}

void GraphRde::build_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& c = config_;
  const std::size_t L = c.logsig_dim();
  const bool temporal = c.variant != Variant::spatial_only;
  const bool spatial = c.variant != Variant::temporal_only;

  add_fc(params_, "init.h", c.in_channels, c.dim_h, rng);
  if (spatial) add_fc(params_, "init.z", c.dim_h, c.dim_z, rng);
  if (temporal) {
    for (std::size_t k = 0; k <= c.depth_k; ++k) {
      add_fc(params_, "f.trunk" + std::to_string(k), c.dim_h, c.dim_h, rng);
    }
    add_fc(params_, "f.head", c.dim_h, c.dim_h * L, rng);
  }
  if (spatial) {
    add_fc(params_, "g.in", c.dim_z, c.dim_z, rng);
    const double bound = 1.0 / std::sqrt(static_cast<double>(c.dim_z));
    switch (c.gnn) {
      case GnnKind::adaptive:
        params_.add("embed", uniform_param({c.num_nodes, c.embed_dim},
                                           1.0 / std::sqrt(static_cast<double>(c.embed_dim)), rng));
        params_.add("g.spatial.w", uniform_param({c.dim_z, c.dim_z}, bound, rng));
        break;
      case GnnKind::plain_gcn:
        params_.add("g.spatial.w", uniform_param({c.dim_z, c.dim_z}, bound, rng));
        break;
      case GnnKind::chebyshev:
        params_.add("g.spatial.w", uniform_param({c.dim_z, c.dim_z}, bound, rng));
        params_.add("g.spatial1.w", uniform_param({c.dim_z, c.dim_z}, bound, rng));
        break;
      case GnnKind::attention:
        params_.add("g.spatial.w", uniform_param({c.dim_z, c.dim_z}, bound, rng));
        params_.add("g.attn.src", uniform_param({c.dim_z, 1}, bound, rng));
        params_.add("g.attn.dst", uniform_param({c.dim_z, 1}, bound, rng));
        break;
    }
    const std::size_t head_cols = c.variant == Variant::spatial_only ? L : c.dim_h;
    add_fc(params_, "g.head", c.dim_z, c.dim_z * head_cols, rng);
  }
  add_fc(params_, "out", c.readout_dim(), c.horizon * c.out_channels, rng);
}

void GraphRde::set_graph(const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges) {
  const std::size_t n = config_.num_nodes;
  std::vector<double> a(n * n, 0.0);
  for (const auto& [src, dst, w] : edges) {
    if (src >= n || dst >= n) throw DataError("adjacency edge references a node outside the graph");
    a[src * n + dst] = w;
  }
  std::vector<double> support(n * n, 0.0);
  if (config_.gnn == GnnKind::plain_gcn) {
    // D^{-1/2} (A + I) D^{-1/2}
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] += 1.0;
    std::vector<double> deg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) deg[i] += a[i * n + j];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        support[i * n + j] = a[i * n + j] / std::sqrt(deg[i] * deg[j]);
  } else {
    // Rescaled Laplacian 2L/lambda_max - I with lambda_max = 2: -D^{-1/2} A D^{-1/2}.
    std::vector<double> deg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) deg[i] += a[i * n + j];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (deg[i] > 0.0 && deg[j] > 0.0)
          support[i * n + j] = -a[i * n + j] / std::sqrt(deg[i] * deg[j]);
  }
  support_ = Tensor::from({n, n}, std::move(support));
}

Tensor GraphRde::adaptive_adjacency() const {
  const Tensor& e = params_.get("embed");
  return softmax_rows(relu(matmul(e, transpose(e))));
}

Tensor GraphRde::field_f(const Tensor& h) const {
  Tensor a = fc(params_, "f.trunk0", h, Activation::relu);
  for (std::size_t k = 1; k <= config_.depth_k; ++k) {
    a = fc(params_, "f.trunk" + std::to_string(k), a, Activation::relu);
  }
  return fc(params_, "f.head", a, Activation::tanh);
}

Tensor GraphRde::message_passing(const Tensor& b0) const {
  const Tensor& w = params_.get("g.spatial.w");
  switch (config_.gnn) {
    case GnnKind::adaptive: {
      Tensor adj = adjacency_override_ ? *adjacency_override_ : adaptive_adjacency();
      Tensor propagate = add(Tensor::eye(config_.num_nodes), adj);
      return matmul(graph_mix(propagate, b0), w);
    }
    case GnnKind::plain_gcn:
      if (!support_) throw ConfigError("plain_gcn needs an adjacency file");
      return matmul(graph_mix(*support_, b0), w);
    case GnnKind::chebyshev:
      if (!support_) throw ConfigError("chebyshev needs an adjacency file");
      return add(matmul(b0, w), matmul(graph_mix(*support_, b0), params_.get("g.spatial1.w")));
    case GnnKind::attention: {
      Tensor hw = matmul(b0, w);
      Tensor scores = outer_sum_blocks(matmul(hw, params_.get("g.attn.src")),
                                       matmul(hw, params_.get("g.attn.dst")), config_.num_nodes);
      return block_mix(softmax_rows(leaky_relu(scores, kAttentionSlope)), hw);
    }
  }
  throw ConfigError("unsupported gnn kind");
}

Tensor GraphRde::field_g(const Tensor& z) const {
  Tensor b0 = fc(params_, "g.in", z, Activation::relu);
  Tensor b1 = message_passing(b0);
  return fc(params_, "g.head", b1, Activation::tanh);
}

HiddenState GraphRde::init_state(const Tensor& first_frame) const {
  HiddenState s;
  Tensor h0 = fc(params_, "init.h", first_frame, Activation::none);
  if (config_.variant != Variant::spatial_only) s.h = h0;
  if (config_.variant != Variant::temporal_only) s.z = fc(params_, "init.z", h0, Activation::none);
  return s;
}

HiddenState GraphRde::rhs(const HiddenState& state, const Tensor& control, double divisor) const {
  HiddenState d;
  const double inv = 1.0 / divisor;
  switch (config_.variant) {
    case Variant::full: {
      Tensor dh = scale(row_matvec(field_f(*state.h), control), inv);
      d.z = row_matvec(field_g(*state.z), dh);
      d.h = dh;
      break;
    }
    case Variant::temporal_only:
      d.h = scale(row_matvec(field_f(*state.h), control), inv);
      break;
    case Variant::spatial_only:
      d.z = scale(row_matvec(field_g(*state.z), control), inv);
      break;
  }
  return d;
}

Tensor GraphRde::readout(const HiddenState& state) const {
  const Tensor& x = config_.variant == Variant::temporal_only ? *state.h : *state.z;
  return fc(params_, "out", x, Activation::none);
}

Tensor GraphRde::forward(const ModelInput& input, const SolveSpec& spec) const {
  HiddenState final_state = integrate(*this, init_state(input.first_frame), input, spec);
  return readout(final_state);
}

// ---- checkpoints ----------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const GraphRde& model,
                     const nlohmann::json& extra) {
  nlohmann::json header;
  header["format_version"] = kFormatVersion;
  header["config"] = model.config();
  header["extra"] = extra;
  nlohmann::json manifest = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : model.params()) {
    manifest.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size() * sizeof(double);
  }
  header["tensors"] = manifest;
  const std::string text = header.dump();

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& entry : model.params()) {
      auto data = entry.second.data();
      out.write(reinterpret_cast<const char*>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(double)));
    }
    if (!out) throw DataError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a checkpoint (bad magic bytes): " + path.string());
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1u << 30)) throw DataError("corrupt checkpoint header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("truncated checkpoint header");

  Checkpoint ck;
  try {
    auto header = nlohmann::json::parse(text);
    if (header.at("format_version").get<int>() != kFormatVersion) {
      throw DataError("unsupported checkpoint format version");
    }
    ck.config = header.at("config").get<ModelConfig>();
    ck.extra = header.value("extra", nlohmann::json::object());
    const std::streamoff blob_start = in.tellg();
    for (const auto& entry : header.at("tensors")) {
      auto shape = entry.at("shape").get<Shape>();
      std::vector<double> data(shape_size(shape));
      in.seekg(blob_start + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
      in.read(reinterpret_cast<char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
      if (!in) throw DataError("truncated checkpoint data for " + entry.at("name").get<std::string>());
      Tensor t = Tensor::from(std::move(shape), std::move(data));
      t.set_requires_grad();
      ck.params.add(entry.at("name").get<std::string>(), std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }
  // Validates the manifest against the configuration.
  GraphRde check(ck.config, ck.params.clone());
  return ck;
}

}  // namespace stgnrde
