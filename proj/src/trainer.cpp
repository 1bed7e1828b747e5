#include "stgnrde/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "stgnrde/error.hpp"
#include "stgnrde/path.hpp"

namespace stgnrde {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kMapeFloor = 1e-3;

void copy_values(ParamStore& dst, const ParamStore& src) {
  for (auto& [name, t] : dst) {
    auto from = src.get(name).data();
    std::copy(from.begin(), from.end(), t.mutable_data().begin());
  }
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("lr must be non-negative");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (patience < 1) throw ConfigError("patience must be >= 1");
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  j = nlohmann::json{{"mae", r.mae},
                     {"rmse", r.rmse},
                     {"mape", r.mape},
                     {"per_horizon",
                      {{"mae", r.horizon_mae}, {"rmse", r.horizon_rmse}, {"mape", r.horizon_mape}}}};
}

MetricReport compute_metrics(std::span<const double> pred, std::span<const double> target,
                             std::size_t horizon, std::size_t out_channels) {
  if (pred.size() != target.size()) throw DimensionError("prediction and target sizes differ");
  if (pred.empty()) throw DataError("cannot compute metrics on an empty split");
  const std::size_t per_row = horizon * out_channels;
  if (per_row == 0 || pred.size() % per_row != 0) {
    throw DimensionError("metric arrays are not a multiple of horizon x channels");
  }
  std::vector<double> abs_sum(horizon, 0.0), sq_sum(horizon, 0.0), pct_sum(horizon, 0.0);
  std::vector<std::size_t> count(horizon, 0), pct_count(horizon, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::size_t s = (i % per_row) / out_channels;
    const double err = pred[i] - target[i];
    abs_sum[s] += std::fabs(err);
    sq_sum[s] += err * err;
    ++count[s];
    if (std::fabs(target[i]) >= kMapeFloor) {
      pct_sum[s] += std::fabs(err) / std::fabs(target[i]);
      ++pct_count[s];
    }
  }
  MetricReport r;
  double a = 0.0, q = 0.0, p = 0.0;
  std::size_t n = 0, np = 0;
  for (std::size_t s = 0; s < horizon; ++s) {
    r.horizon_mae.push_back(abs_sum[s] / static_cast<double>(count[s]));
    r.horizon_rmse.push_back(std::sqrt(sq_sum[s] / static_cast<double>(count[s])));
    r.horizon_mape.push_back(pct_count[s] ? pct_sum[s] / static_cast<double>(pct_count[s]) : 0.0);
    a += abs_sum[s];
    q += sq_sum[s];
    p += pct_sum[s];
    n += count[s];
    np += pct_count[s];
  }
  r.mae = a / static_cast<double>(n);
  r.rmse = std::sqrt(q / static_cast<double>(n));
  r.mape = np ? p / static_cast<double>(np) : 0.0;
  return r;
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("l1_loss: prediction " + shape_string(pred.shape()) + " vs target " +
                         shape_string(target.shape()));
  }
  return mean(abs(sub(pred, target)));
}

void adam_step(ParamStore& params, AdamState& state, double lr, double weight_decay) {
  if (state.m.empty()) {
    for (const auto& entry : params) {
      state.m.emplace_back(entry.second.size(), 0.0);
      state.v.emplace_back(entry.second.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ContractError("optimizer state does not match parameters");
  ++state.step;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  std::size_t k = 0;
  for (auto& [name, t] : params) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    ++k;
    if (m.size() != t.size()) throw ContractError("optimizer state shape differs for " + name);
    auto values = t.mutable_data();
    const bool has_grad = t.has_grad();
    std::span<const double> grad = has_grad ? t.grad() : std::span<const double>{};
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = (has_grad ? grad[i] : 0.0) + weight_decay * values[i];
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
      values[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kAdamEps);
    }
  }
}

PreparedData prepare(const WindowSet& windows, const Normalizer& norm, std::size_t sig_depth,
                     std::size_t subpath, std::size_t substeps) {
  PreparedData out;
  out.nodes = windows.nodes;
  out.channels = windows.channels;
  out.input_len = windows.input_len;
  out.horizon = windows.horizon;
  out.out_channels = windows.out_channels;
  const LyndonBasis basis(windows.channels + 1, sig_depth);
  out.coords = basis.size();

  const std::size_t len = windows.input_len, ch = windows.channels, m = windows.out_channels;
  out.samples.reserve(windows.size());
  for (const Window& win : windows.windows) {
    RawSeries series;
    series.nodes = windows.nodes;
    series.timesteps = len;
    series.channels = ch;
    series.values.resize(win.input.size());
    for (std::size_t i = 0; i < win.input.size(); ++i) series.values[i] = norm.normalize(win.input[i], i % ch);
    series.mask = win.mask;
    series.times.resize(len);
    std::iota(series.times.begin(), series.times.end(), 0.0);

    LogSigSequence seq = window_logsig(fit_spline(series), subpath, basis, substeps);
    if (out.boundaries.empty()) {
      out.boundaries = seq.boundaries;
      out.divisors = seq.divisors;
    }

    PreparedSample s;
    s.logsig = std::move(seq.data);
    s.first_frame.resize(windows.nodes * ch);
    for (std::size_t v = 0; v < windows.nodes; ++v)
      for (std::size_t c = 0; c < ch; ++c) s.first_frame[v * ch + c] = series.value(v, 0, c);
    s.target_raw = win.target;
    s.target_norm.resize(win.target.size());
    for (std::size_t i = 0; i < win.target.size(); ++i) s.target_norm[i] = norm.normalize(win.target[i], i % m);
    s.history_raw.resize(windows.nodes * len * m);
    for (std::size_t v = 0; v < windows.nodes; ++v)
      for (std::size_t t = 0; t < len; ++t)
        for (std::size_t c = 0; c < m; ++c)
          s.history_raw[(v * len + t) * m + c] = win.input[(v * len + t) * ch + c];
    s.history_mask = win.mask;
    out.samples.push_back(std::move(s));
  }
  return out;
}

Batch make_batch(const PreparedData& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ContractError("empty batch");
  const std::size_t rows = indices.size() * data.nodes;
  const std::size_t windows = data.divisors.size();
  std::vector<double> frame;
  frame.reserve(rows * data.channels);
  std::vector<std::vector<double>> controls(windows);
  for (auto& c : controls) c.reserve(rows * data.coords);
  std::vector<double> target;
  target.reserve(rows * data.horizon * data.out_channels);
  for (std::size_t idx : indices) {
    const PreparedSample& s = data.samples.at(idx);
    frame.insert(frame.end(), s.first_frame.begin(), s.first_frame.end());
    const std::size_t block = data.nodes * data.coords;
    for (std::size_t w = 0; w < windows; ++w) {
      auto first = s.logsig.begin() + static_cast<std::ptrdiff_t>(w * block);
      controls[w].insert(controls[w].end(), first, first + static_cast<std::ptrdiff_t>(block));
    }
    target.insert(target.end(), s.target_norm.begin(), s.target_norm.end());
  }
  Batch b;
  b.input.first_frame = Tensor::from({rows, data.channels}, std::move(frame));
  for (auto& c : controls) b.input.controls.push_back(Tensor::from({rows, data.coords}, std::move(c)));
  b.input.divisors = data.divisors;
  b.input.boundaries = data.boundaries;
  b.target = Tensor::from({rows, data.horizon * data.out_channels}, std::move(target));
  return b;
}

std::vector<double> predict(const GraphRde& model, const PreparedData& data, const Normalizer& norm,
                            const SolveSpec& spec, std::size_t batch_size) {
  NoGradGuard no_grad;
  std::vector<double> out;
  out.reserve(data.size() * data.nodes * data.horizon * data.out_channels);
  auto idx = iota_indices(data.size());
  for (std::size_t start = 0; start < idx.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, idx.size() - start);
    Batch b = make_batch(data, std::span(idx).subspan(start, n));
    Tensor pred = model.forward(b.input, spec);
    auto values = pred.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      out.push_back(norm.denormalize(values[i], i % data.out_channels));
    }
  }
  return out;
}

MetricReport evaluate(const GraphRde& model, const PreparedData& data, const Normalizer& norm,
                      const SolveSpec& spec, std::size_t batch_size) {
  if (data.size() == 0) throw DataError("cannot evaluate on an empty split");
  auto pred = predict(model, data, norm, spec, batch_size);
  std::vector<double> target;
  target.reserve(pred.size());
  for (const auto& s : data.samples) target.insert(target.end(), s.target_raw.begin(), s.target_raw.end());
  return compute_metrics(pred, target, data.horizon, data.out_channels);
}

MetricReport historical_average(const PreparedData& data) {
  if (data.size() == 0) throw DataError("cannot evaluate on an empty split");
  const std::size_t len = data.input_len, m = data.out_channels;
  std::vector<double> pred, target;
  for (const auto& s : data.samples) {
    for (std::size_t v = 0; v < data.nodes; ++v) {
      std::vector<double> avg(m, 0.0);
      std::size_t seen = 0;
      for (std::size_t t = 0; t < len; ++t) {
        if (!s.history_mask[v * len + t]) continue;
        ++seen;
        for (std::size_t c = 0; c < m; ++c) avg[c] += s.history_raw[(v * len + t) * m + c];
      }
      for (double& a : avg) a /= static_cast<double>(seen);
      for (std::size_t h = 0; h < data.horizon; ++h)
        for (std::size_t c = 0; c < m; ++c) pred.push_back(avg[c]);
    }
    target.insert(target.end(), s.target_raw.begin(), s.target_raw.end());
  }
  return compute_metrics(pred, target, data.horizon, m);
}

std::string history_csv(const std::vector<HistoryRow>& history) {
  std::string out = "epoch,train_loss,val_mae\n";
  for (const auto& row : history) {
    out += std::to_string(row.epoch) + ',' + format_double(row.train_loss) + ',' +
           format_double(row.val_mae) + '\n';
  }
  return out;
}

FitResult fit(GraphRde& model, const PreparedData& train, const PreparedData& val,
              const Normalizer& norm, const TrainConfig& cfg, const SolveSpec& spec,
              const FitOptions& options) {
  cfg.validate();
  spec.validate();
  if (train.size() == 0 || val.size() == 0) throw DataError("training and validation splits must be non-empty");

  FitResult result;
  AdamState adam;
  ParamStore best = model.params().clone();
  result.best_val_mae = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  auto order = iota_indices(train.size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::mt19937_64 rng(cfg.seed + epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t n = std::min(cfg.batch_size, order.size() - start);
        Batch b = make_batch(train, std::span(order).subspan(start, n));
        model.params().zero_grad();
        Tensor loss = l1_loss(model.forward(b.input, spec), b.target);
        backward(loss);
        adam_step(model.params(), adam, cfg.lr, cfg.weight_decay);
        loss_sum += loss.item() * static_cast<double>(n);
      }
    } catch (const NumericError& e) {
      Tape::active().clear();
      copy_values(model.params(), best);
      std::string where = options.checkpoint ? " (last good checkpoint: " + options.checkpoint->string() + ")" : "";
      throw NumericError("training diverged in epoch " + std::to_string(epoch) + ": " + e.what() + where);
    }

    HistoryRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(train.size());
    row.val_mae = evaluate(model, val, norm, spec, cfg.batch_size).mae;
    result.history.push_back(row);
    if (options.on_epoch) options.on_epoch(row);

    if (row.val_mae < result.best_val_mae) {
      result.best_val_mae = row.val_mae;
      result.best_epoch = epoch;
      best = model.params().clone();
      stale = 0;
      if (options.checkpoint) save_checkpoint(*options.checkpoint, model, options.checkpoint_extra);
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  copy_values(model.params(), best);
  return result;
}

GradcheckResult gradcheck(const ModelConfig& config, const SolveSpec& spec, std::uint64_t seed,
                          std::size_t input_len, std::size_t batch) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  Dataset data;
  data.nodes = config.num_nodes;
  data.channels = config.in_channels;
  data.timesteps = input_len + config.horizon + batch - 1;
  data.values.resize(data.nodes * data.timesteps * data.channels);
  for (double& x : data.values) x = unit(rng);
  WindowSet windows = make_windows(data, input_len, config.horizon, config.out_channels);
  Normalizer identity{std::vector<double>(data.channels, 0.0), std::vector<double>(data.channels, 1.0)};
  PreparedData prepared = prepare(windows, identity, config.sig_depth, config.subpath);
  auto idx = iota_indices(prepared.size());
  Batch b = make_batch(prepared, idx);

  GraphRde model(config, seed + 1);
  if (config.gnn == GnnKind::chebyshev || config.gnn == GnnKind::plain_gcn) {
    std::vector<Edge> ring;
    for (std::size_t v = 0; v < config.num_nodes; ++v) {
      ring.emplace_back(v, (v + 1) % config.num_nodes, 1.0);
      ring.emplace_back((v + 1) % config.num_nodes, v, 1.0);
    }
    model.set_graph(ring);
  }

  model.params().zero_grad();
  backward(l1_loss(model.forward(b.input, spec), b.target));

  auto loss_at = [&]() {
    NoGradGuard no_grad;
    return l1_loss(model.forward(b.input, spec), b.target).item();
  };

  constexpr double eps = 1e-5;
  GradcheckResult result;
  for (auto& [name, t] : model.params()) {
    if (!t.has_grad()) continue;
    std::vector<double> taped(t.grad().begin(), t.grad().end());
    auto values = t.mutable_data();
    double diff2 = 0.0, taped2 = 0.0, numeric2 = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = loss_at();
      values[i] = saved - eps;
      const double down = loss_at();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      diff2 += (taped[i] - numeric) * (taped[i] - numeric);
      taped2 += taped[i] * taped[i];
      numeric2 += numeric * numeric;
    }
    const double denom = std::max({std::sqrt(taped2), std::sqrt(numeric2), 1e-300});
    const double rel = std::sqrt(diff2) / denom;
    result.per_param.emplace_back(name, rel);
    if (rel >= result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_param = name;
    }
  }
  return result;
}

}  // namespace stgnrde
