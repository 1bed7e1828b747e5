#pragma once

// Spatio-temporal graph neural RDE: the temporal vector field f, the spatial
// vector field g over a learned adaptive adjacency, initial-value maps, the
// augmented right-hand side and the output layer.
//
// All node-indexed tensors are batched row-wise: a batch of B samples over
// |V| nodes is a [B*|V|, k] matrix whose consecutive blocks of |V| rows
// belong to one sample.  Vector-field outputs are returned flattened as
// [rows, m*n] and are read as one m x n matrix per row.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stgnrde/tensor.hpp"

namespace stgnrde {

enum class Variant { full, temporal_only, spatial_only };
enum class GnnKind { adaptive, chebyshev, plain_gcn, attention };

std::string to_string(Variant v);
std::string to_string(GnnKind g);
Variant parse_variant(const std::string& s);
GnnKind parse_gnn_kind(const std::string& s);

struct ModelConfig {
  std::size_t num_nodes = 1;
  std::size_t in_channels = 1;
  std::size_t horizon = 12;
  std::size_t out_channels = 1;
  std::size_t dim_h = 32;
  std::size_t dim_z = 32;
  std::size_t depth_k = 1;
  std::size_t embed_dim = 2;
  std::size_t sig_depth = 2;
  std::size_t subpath = 2;
  Variant variant = Variant::full;
  GnnKind gnn = GnnKind::adaptive;

  std::size_t path_channels() const { return in_channels + 1; }
  std::size_t logsig_dim() const;
  // Width of the state fed to the output layer.
  std::size_t readout_dim() const { return variant == Variant::temporal_only ? dim_h : dim_z; }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Named parameter tensors in a fixed insertion order.
class ParamStore {
 public:
  Tensor& add(std::string name, Tensor value);
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool contains(const std::string& name) const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  // Deep copy of the values (fresh leaves that track gradients).
  ParamStore clone() const;
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

// Parts a variant does not evolve (e.g. Z for temporal-only) are absent.
struct HiddenState {
  std::optional<Tensor> h;
  std::optional<Tensor> z;
};

// state + factor * delta, part by part.
HiddenState axpy(const HiddenState& state, const HiddenState& delta, double factor);

// Per-batch inputs to the model: first frame and per-window log-signature
// controls (each [rows, L]) with their window lengths.
struct ModelInput {
  Tensor first_frame;
  std::vector<Tensor> controls;
  std::vector<double> divisors;
  std::vector<double> boundaries;
};

struct SolveSpec;

class GraphRde {
 public:
  GraphRde(ModelConfig config, std::uint64_t seed);
  GraphRde(ModelConfig config, ParamStore params);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Normalized external adjacency for the chebyshev / plain_gcn kinds, built
  // from a weighted edge list.
  void set_graph(const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges);
  bool has_graph() const { return support_.has_value(); }
  // Test hook: replaces the learned adjacency inside field_g.
  void override_adjacency(std::optional<Tensor> adjacency) { adjacency_override_ = std::move(adjacency); }

  Tensor adaptive_adjacency() const;
  Tensor field_f(const Tensor& h) const;
  Tensor field_g(const Tensor& z) const;
  HiddenState init_state(const Tensor& first_frame) const;
  HiddenState rhs(const HiddenState& state, const Tensor& control, double divisor) const;
  Tensor readout(const HiddenState& state) const;

  // init_state -> integrate -> readout; returns [rows, horizon*out_channels].
  Tensor forward(const ModelInput& input, const SolveSpec& spec) const;

 private:
  void build_params(std::uint64_t seed);
  Tensor message_passing(const Tensor& b0) const;

  ModelConfig config_;
  ParamStore params_;
  std::optional<Tensor> support_;
  std::optional<Tensor> adjacency_override_;
};

// Binary checkpoint: magic "STGNRDE1", u64 little-endian header length, JSON
// header, then float64 little-endian blobs in manifest order.
void save_checkpoint(const std::filesystem::path& path, const GraphRde& model,
                     const nlohmann::json& extra = nlohmann::json::object());

struct Checkpoint {
  ModelConfig config;
  ParamStore params;
  nlohmann::json extra;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace stgnrde
