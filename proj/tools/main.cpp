// stgnrde: synthesize data, dump log-signatures, train, evaluate, predict
// and run the verification suites.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stgnrde/config.hpp"
#include "stgnrde/error.hpp"
#include "stgnrde/logsig.hpp"
#include "stgnrde/pipeline.hpp"
#include "stgnrde/verify.hpp"

using namespace stgnrde;

namespace {

int cmd_synth(const SynthSpec& spec, const std::string& out) {
  DatasetSpec ds = write_synth(spec, out);
  std::cout << "wrote " << ds.values.string() << " and " << ds.adjacency->string() << '\n';
  return 0;
}

int cmd_logsig(const std::string& data, std::size_t channels, std::size_t input_len, std::size_t depth,
               std::size_t subpath, std::size_t substeps, const std::string& out) {
  if (depth < 1) throw ConfigError("--depth must be >= 1");
  if (subpath < 1) throw ConfigError("--subpath must be >= 1");
  if (substeps < 1) throw ConfigError("--substeps must be >= 1");
  if (input_len < 2) throw ConfigError("--input-len must be >= 2");
  Dataset d = load_values(data, channels);
  if (d.timesteps < input_len) {
    throw DataError("data has " + std::to_string(d.timesteps) + " timesteps, the first window needs " +
                    std::to_string(input_len));
  }
  std::vector<double> first;
  first.reserve(d.nodes * input_len * channels);
  for (std::size_t v = 0; v < d.nodes; ++v)
    for (std::size_t t = 0; t < input_len; ++t)
      for (std::size_t c = 0; c < channels; ++c) first.push_back(d.at(v, t, c));
  const SplinePath path = fit_spline(RawSeries::dense(d.nodes, input_len, channels, std::move(first)));
  const LyndonBasis basis(path.path_channels(), depth);
  const LogSigSequence seq = window_logsig(path, subpath, basis, substeps);

  std::string csv = "window,node";
  for (std::size_t i = 0; i < seq.coords; ++i) csv += ",coord_" + std::to_string(i);
  csv += '\n';
  for (std::size_t w = 0; w < seq.windows; ++w)
    for (std::size_t v = 0; v < seq.nodes; ++v) {
      csv += std::to_string(w) + ',' + std::to_string(v);
      for (double x : seq.at(w, v)) csv += ',' + format_double(x);
      csv += '\n';
    }
  write_file_atomic(out, csv);
  std::cout << "wrote " << seq.windows << " windows x " << seq.nodes << " nodes x " << seq.coords
            << " coordinates to " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal graph neural rough differential equations"};
  app.require_subcommand(1);

  SynthSpec synth_spec;
  std::string synth_out = "synth";
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic ring-graph dataset");
  synth_cmd->add_option("--nodes", synth_spec.nodes, "Number of sensors");
  synth_cmd->add_option("--timesteps", synth_spec.timesteps, "Number of timesteps");
  synth_cmd->add_option("--seed", synth_spec.seed, "Random seed");
  synth_cmd->add_option("--period", synth_spec.period, "Sinusoid period in timesteps");
  synth_cmd->add_option("--amplitude", synth_spec.amplitude, "Sinusoid amplitude");
  synth_cmd->add_option("--coupling", synth_spec.coupling, "Ring coupling strength");
  synth_cmd->add_option("--noise", synth_spec.noise_fraction, "Noise sigma as a fraction of the amplitude");
  synth_cmd->add_option("--out", synth_out, "Output directory");

  std::string ls_data, ls_out = "logsig.csv";
  std::size_t ls_depth = 2, ls_subpath = 2, ls_channels = 1, ls_len = 12, ls_substeps = 1;
  auto* logsig_cmd = app.add_subcommand("logsig", "Dump log-signatures of the first window");
  logsig_cmd->add_option("--data", ls_data, "Values CSV")->required();
  logsig_cmd->add_option("--depth", ls_depth, "Truncation depth");
  logsig_cmd->add_option("--subpath", ls_subpath, "Sub-path length P");
  logsig_cmd->add_option("--channels", ls_channels, "Channels per node");
  logsig_cmd->add_option("--input-len", ls_len, "Timesteps in the window");
  logsig_cmd->add_option("--substeps", ls_substeps, "Chords per knot interval");
  logsig_cmd->add_option("--out", ls_out, "Output CSV");

  std::string tr_config, tr_variant, tr_cv, tr_out, tr_data, tr_adj;
  std::optional<double> tr_drop;
  std::optional<std::size_t> tr_epochs, tr_seed;
  std::vector<std::string> tr_set;
  bool tr_quiet = false;
  auto* train_cmd = app.add_subcommand("train", "Train and evaluate a model");
  train_cmd->add_option("--config", tr_config, "Config file, or the name of a bundled preset")->required();
  train_cmd->add_option("--variant", tr_variant, "full | temporal | spatial");
  train_cmd->add_option("--drop-rate", tr_drop, "Fraction of input observations to drop");
  train_cmd->add_option("--cv", tr_cv, "rolling | blocked cross-validation");
  train_cmd->add_option("--data", tr_data, "Override the values CSV");
  train_cmd->add_option("--adjacency", tr_adj, "Override the adjacency CSV");
  train_cmd->add_option("--epochs", tr_epochs, "Override the epoch budget");
  train_cmd->add_option("--seed", tr_seed, "Override the seed");
  train_cmd->add_option("--out", tr_out, "Output directory");
  train_cmd->add_option("--set", tr_set, "Extra key=value overrides")->allow_extra_args(false);
  train_cmd->add_flag("--quiet", tr_quiet, "No per-epoch log");

  std::string ev_ckpt, ev_data, ev_out;
  auto* eval_cmd = app.add_subcommand("eval", "Recompute metrics from a checkpoint");
  eval_cmd->add_option("--checkpoint", ev_ckpt, "checkpoint.bin")->required();
  eval_cmd->add_option("--data", ev_data, "Values CSV")->required();
  eval_cmd->add_option("--out", ev_out, "Also write the JSON here");

  std::string pr_ckpt, pr_data, pr_out = "predictions.csv";
  auto* predict_cmd = app.add_subcommand("predict", "Forecast every window of a dataset");
  predict_cmd->add_option("--checkpoint", pr_ckpt, "checkpoint.bin")->required();
  predict_cmd->add_option("--data", pr_data, "Values CSV")->required();
  predict_cmd->add_option("--out", pr_out, "Output CSV");

  std::string suite = "all";
  auto* verify_cmd = app.add_subcommand("verify", "Run the verification suites");
  verify_cmd->add_option("--suite", suite, "logsig | grad | solver | metrics | all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::usage);
  }

  try {
    if (*synth_cmd) return cmd_synth(synth_spec, synth_out);
    if (*logsig_cmd) return cmd_logsig(ls_data, ls_channels, ls_len, ls_depth, ls_subpath, ls_substeps, ls_out);
    if (*train_cmd) {
      std::filesystem::path cfg_path = tr_config;
      bool preset = false;
      if (!std::filesystem::is_regular_file(cfg_path) && cfg_path.parent_path().empty()) {
        std::filesystem::path candidate = preset_dir() / (tr_config + ".cfg");
        if (std::filesystem::exists(candidate)) cfg_path = candidate, preset = true;
      }
      RunConfig cfg = load_config(cfg_path, {}, !preset);
      for (const auto& kv : tr_set) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (!tr_variant.empty()) apply_setting(cfg, "variant", tr_variant);
      if (tr_drop) cfg.drop_rate = *tr_drop;
      if (!tr_cv.empty()) apply_setting(cfg, "split", tr_cv);
      if (!tr_data.empty()) cfg.data.values = tr_data;
      if (!tr_adj.empty()) apply_setting(cfg, "adjacency", tr_adj);
      if (tr_epochs) cfg.train.epochs = *tr_epochs;
      if (tr_seed) cfg.train.seed = *tr_seed;
      if (!tr_out.empty()) cfg.out = tr_out;
      TrainOutcome result = run_training(cfg, tr_quiet ? nullptr : &std::cerr);
      std::cout << result.metrics.dump(2) << '\n';
      return 0;
    }
    if (*eval_cmd) {
      nlohmann::json j = evaluate_checkpoint(ev_ckpt, ev_data);
      if (!ev_out.empty()) write_file_atomic(ev_out, j.dump(2) + "\n");
      std::cout << j.dump(2) << '\n';
      return 0;
    }
    if (*predict_cmd) {
      const std::size_t rows = predict_to_csv(pr_ckpt, pr_data, pr_out);
      std::cout << "wrote " << rows << " forecasts to " << pr_out << '\n';
      return 0;
    }
    if (*verify_cmd) return print_checks(std::cout, run_suite(suite)) ? 0 : static_cast<int>(ExitCode::numeric);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data);
  }
  return static_cast<int>(ExitCode::usage);
}
