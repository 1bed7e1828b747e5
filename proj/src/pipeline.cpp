#include "stgnrde/pipeline.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "stgnrde/error.hpp"

namespace stgnrde {

namespace {

bool needs_graph(GnnKind g) { return g == GnnKind::chebyshev || g == GnnKind::plain_gcn; }

struct RunData {
  Dataset data;
  std::vector<Edge> edges;
  WindowSet windows;
};

RunData load_run_data(const RunConfig& cfg) {
  RunData r;
  r.data = load(cfg.data);
  if (cfg.data.adjacency) r.edges = load_edges(*cfg.data.adjacency);
  for (const auto& [s, d, w] : r.edges) {
    if (s >= r.data.nodes || d >= r.data.nodes) {
      throw DataError("adjacency references node " + std::to_string(std::max(s, d)) + " but the data has " +
                      std::to_string(r.data.nodes) + " nodes");
    }
  }
  r.windows = make_windows(r.data, cfg.input_len, cfg.model.horizon, cfg.model.out_channels);
  if (cfg.drop_rate > 0.0) drop_observations(r.windows, cfg.drop_rate, cfg.train.seed);
  return r;
}

ModelConfig model_config(const RunConfig& cfg, const Dataset& data) {
  ModelConfig m = cfg.model;
  m.num_nodes = data.nodes;
  m.in_channels = data.channels;
  m.validate();
  return m;
}

nlohmann::json normalizer_json(const Normalizer& n) { return {{"mean", n.mean}, {"std", n.stddev}}; }

Normalizer normalizer_from(const nlohmann::json& j) {
  Normalizer n;
  n.mean = j.at("mean").get<std::vector<double>>();
  n.stddev = j.at("std").get<std::vector<double>>();
  return n;
}

nlohmann::json fold_json(const MetricReport& train, const MetricReport& val, const MetricReport& test,
                         const MetricReport& ha) {
  nlohmann::json j = test;
  j["val"] = val;
  j["train"] = train;
  j["ha"] = ha;
  return j;
}

struct Evaluated {
  MetricReport train, val, test, ha;
};

Evaluated evaluate_fold(const GraphRde& model, const RunConfig& cfg, const WindowSet& windows,
                        const SplitIndices& idx, const Normalizer& norm) {
  auto prep = [&](const std::vector<std::size_t>& which) {
    return prepare(windows.subset(which), norm, cfg.model.sig_depth, cfg.model.subpath, cfg.substeps);
  };
  PreparedData train = prep(idx.train), val = prep(idx.val), test = prep(idx.test);
  Evaluated e;
  e.train = evaluate(model, train, norm, cfg.solve, cfg.train.batch_size);
  e.val = evaluate(model, val, norm, cfg.solve, cfg.train.batch_size);
  e.test = evaluate(model, test, norm, cfg.solve, cfg.train.batch_size);
  e.ha = historical_average(test);
  return e;
}

void check_inputs(const RunConfig& cfg) {
  cfg.validate();
  if (!std::filesystem::exists(cfg.data.values)) throw DataError("data file not found: " + cfg.data.values.string());
  if (needs_graph(cfg.model.gnn) && !cfg.data.adjacency) {
    throw ConfigError("gnn = " + to_string(cfg.model.gnn) + " needs an adjacency file");
  }
  if (cfg.data.adjacency && !std::filesystem::exists(*cfg.data.adjacency)) {
    throw DataError("adjacency file not found: " + cfg.data.adjacency->string());
  }
}

struct Loaded {
  RunConfig cfg;
  Checkpoint ckpt;
  Normalizer norm;
  std::size_t fold = 0;
};

Loaded load_for_inference(const std::filesystem::path& checkpoint, const std::filesystem::path& data) {
  Loaded l;
  l.ckpt = load_checkpoint(checkpoint);
  const auto& extra = l.ckpt.extra;
  if (!extra.contains("run_config") || !extra.contains("normalizer")) {
    throw DataError("checkpoint " + checkpoint.string() + " carries no run configuration");
  }
  try {
    l.cfg = parse_config(extra.at("run_config").get<std::string>());
    l.norm = normalizer_from(extra.at("normalizer"));
    l.fold = extra.value("fold", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + checkpoint.string() + ": bad header: " + e.what());
  }
  l.cfg.data.values = data;
  return l;
}

GraphRde make_model(const Loaded& l, const RunData& run) {
  if (model_config(l.cfg, run.data) != l.ckpt.config) {
    throw DataError("checkpoint model configuration does not match the data (" +
                    std::to_string(run.data.nodes) + " nodes, " + std::to_string(run.data.channels) +
                    " channels)");
  }
  GraphRde model(l.ckpt.config, l.ckpt.params);
  if (needs_graph(l.ckpt.config.gnn)) model.set_graph(run.edges);
  return model;
}

}  // namespace

TrainOutcome run_training(const RunConfig& input, std::ostream* log) {
  input.validate();
  RunConfig cfg = input;
  cfg.data.values = std::filesystem::absolute(cfg.data.values);
  if (cfg.data.adjacency) cfg.data.adjacency = std::filesystem::absolute(*cfg.data.adjacency);
  check_inputs(cfg);

  RunData run = load_run_data(cfg);
  const ModelConfig mcfg = model_config(cfg, run.data);
  const auto splits = split(run.windows.size(), cfg.split);
  const bool cv = splits.size() > 1;
  const std::string resolved = to_text(cfg);

  std::filesystem::create_directories(cfg.out);
  write_file_atomic(cfg.out / "config.resolved", resolved);

  TrainOutcome outcome;
  for (std::size_t k = 0; k < splits.size(); ++k) {
    const SplitIndices& idx = splits[k];
    FoldOutcome fo;
    fo.fold = k;
    fo.dir = cv ? cfg.out / ("fold_" + std::to_string(k)) : cfg.out;
    std::filesystem::create_directories(fo.dir);
    if (cv) write_file_atomic(fo.dir / "config.resolved", resolved);

    const auto [t0, t1] = training_range(run.windows, idx);
    const Normalizer norm = fit_normalizer(run.data, t0, t1);
    auto prep = [&](const std::vector<std::size_t>& which) {
      return prepare(run.windows.subset(which), norm, mcfg.sig_depth, mcfg.subpath, cfg.substeps);
    };
    const PreparedData train = prep(idx.train), val = prep(idx.val);

    GraphRde model(mcfg, cfg.train.seed);
    if (needs_graph(mcfg.gnn)) model.set_graph(run.edges);

    FitOptions opts;
    opts.checkpoint = fo.dir / "checkpoint.bin";
    opts.checkpoint_extra = {{"run_config", resolved}, {"fold", k}, {"normalizer", normalizer_json(norm)}};
    if (log) {
      opts.on_epoch = [&](const HistoryRow& row) {
        *log << (cv ? "fold " + std::to_string(k) + " " : std::string()) << "epoch " << row.epoch
             << " train_loss " << row.train_loss << " val_mae " << row.val_mae << '\n';
      };
    }
    fo.fit = fit(model, train, val, norm, cfg.train, cfg.solve, opts);
    write_file_atomic(fo.dir / "history.csv", history_csv(fo.fit.history));

    Evaluated e = evaluate_fold(model, cfg, run.windows, idx, norm);
    fo.train = e.train;
    fo.val = e.val;
    fo.test = e.test;
    fo.ha_test = e.ha;
    nlohmann::json fj = fold_json(e.train, e.val, e.test, e.ha);
    fj["best_epoch"] = fo.fit.best_epoch;
    fj["epochs_run"] = fo.fit.history.size();
    write_file_atomic(fo.dir / "metrics.json", fj.dump(2) + "\n");
    if (!cv) outcome.metrics = fj;
    outcome.folds.push_back(std::move(fo));
  }

  if (cv) {
    nlohmann::json rows = nlohmann::json::array();
    nlohmann::json mean, stddev;
    for (const char* key : {"mae", "rmse", "mape"}) {
      std::vector<double> xs;
      for (const auto& f : outcome.folds) {
        nlohmann::json t = f.test;
        xs.push_back(t.at(key).get<double>());
      }
      double m = 0.0;
      for (double x : xs) m += x;
      m /= static_cast<double>(xs.size());
      double var = 0.0;
      for (double x : xs) var += (x - m) * (x - m);
      mean[key] = m;
      stddev[key] = std::sqrt(var / static_cast<double>(xs.size()));
    }
    for (const auto& f : outcome.folds) {
      rows.push_back({{"fold", f.fold}, {"mae", f.test.mae}, {"rmse", f.test.rmse}, {"mape", f.test.mape}});
    }
    outcome.metrics = {{"split", to_string(cfg.split.kind)}, {"folds", rows}, {"mean", mean}, {"std", stddev}};
    write_file_atomic(cfg.out / "metrics.json", outcome.metrics.dump(2) + "\n");
  }
  return outcome;
}

nlohmann::json evaluate_checkpoint(const std::filesystem::path& checkpoint,
                                   const std::filesystem::path& data) {
  Loaded l = load_for_inference(checkpoint, data);
  RunData run = load_run_data(l.cfg);
  GraphRde model = make_model(l, run);
  const auto splits = split(run.windows.size(), l.cfg.split);
  if (l.fold >= splits.size()) throw DataError("checkpoint fold " + std::to_string(l.fold) + " does not exist");
  Evaluated e = evaluate_fold(model, l.cfg, run.windows, splits[l.fold], l.norm);
  nlohmann::json j = fold_json(e.train, e.val, e.test, e.ha);
  j["fold"] = l.fold;
  return j;
}

std::size_t predict_to_csv(const std::filesystem::path& checkpoint, const std::filesystem::path& data,
                           const std::filesystem::path& out) {
  Loaded l = load_for_inference(checkpoint, data);
  RunData run = load_run_data(l.cfg);
  GraphRde model = make_model(l, run);
  const ModelConfig& m = l.ckpt.config;
  PreparedData prepared = prepare(run.windows, l.norm, m.sig_depth, m.subpath, l.cfg.substeps);
  auto pred = predict(model, prepared, l.norm, l.cfg.solve, l.cfg.train.batch_size);

  const bool multi = m.out_channels > 1;
  std::string csv = multi ? "window,node,horizon,channel,value\n" : "window,node,horizon,value\n";
  std::size_t i = 0, rows = 0;
  for (std::size_t w = 0; w < prepared.size(); ++w)
    for (std::size_t v = 0; v < m.num_nodes; ++v)
      for (std::size_t h = 0; h < m.horizon; ++h)
        for (std::size_t c = 0; c < m.out_channels; ++c, ++rows) {
          csv += std::to_string(w) + ',' + std::to_string(v) + ',' + std::to_string(h) + ',';
          if (multi) csv += std::to_string(c) + ',';
          csv += format_double(pred[i++]) + '\n';
        }
  write_file_atomic(out, csv);
  return rows;
}

}  // namespace stgnrde
