#include "leakdet/cli.hpp"

#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "leakdet/config.hpp"
#include "leakdet/error.hpp"
#include "leakdet/io.hpp"
#include "leakdet/parallel.hpp"

namespace leakdet::cli {

namespace fs = std::filesystem;

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
};

RunConfig resolve_config(const GlobalFlags& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : load_run_config(g.config);
  apply_env_overrides(cfg);
  if (g.seed) cfg.seed = *g.seed;
  if (g.workers) cfg.workers = *g.workers;
  if (!g.out.empty()) cfg.out = g.out;
  parallel::set_workers(cfg.workers);
  return cfg;
}

struct LoadedData {
  Spectrogram spectrogram;
  Labels labels;
  bool annotated;
};

LoadedData load_data(const fs::path& spec_path, const std::optional<fs::path>& ann_path,
                     std::optional<std::size_t> expected_bins) {
  Spectrogram spec = load_spectrogram(spec_path, expected_bins);
  Labels labels(spec.duration_s(), 0);
  if (ann_path) labels = expand_labels(load_annotation(*ann_path), spec.duration_s());
  return {std::move(spec), std::move(labels), ann_path.has_value()};
}

void cmd_synth(const GlobalFlags& g, const std::string& preset_flag, std::optional<double> snr) {
  RunConfig cfg = resolve_config(g);
  if (!preset_flag.empty()) cfg.preset = synth::parse_preset(preset_flag);
  if (snr) cfg.leak_snr_db = *snr;
  synth::SynthConfig sc;
  std::string name;
  if (cfg.preset) {
    sc = synth::table1_preset(*cfg.preset, cfg.seed, cfg.leak_snr_db);
    name = std::string(synth::preset_name(*cfg.preset));
  } else if (cfg.custom_synth) {
    sc = *cfg.custom_synth;
    sc.seed = cfg.seed;
    name = "custom";
  } else {
    fail(ErrorKind::usage, "synth needs --preset or a custom synth section in --config");
  }
  const auto data = synth::generate(sc);
  const fs::path psd = cfg.out / (name + ".psd.txt");
  const fs::path ann = cfg.out / (name + ".ann.txt");
  save_spectrogram(data.spectrogram, psd);
  save_annotation(data.annotation, ann);
  std::cout << "wrote " << psd.string() << " (" << data.spectrogram.n_bins() << " bins x "
            << data.spectrogram.duration_s() << " s)\n"
            << "wrote " << ann.string() << " (" << data.annotation.intervals().size()
            << " leak intervals)\n";
}

void require_data(const RunConfig& cfg) {
  if (!cfg.spectrogram) fail(ErrorKind::usage, "no dataset: set data.spectrogram or --spectrogram");
  if (!cfg.annotation) fail(ErrorKind::usage, "no annotation: set data.annotation or --annotation");
}

void cmd_tune(const GlobalFlags& g, const std::string& spec_flag, const std::string& ann_flag) {
  RunConfig cfg = resolve_config(g);
  if (!spec_flag.empty()) cfg.spectrogram = spec_flag;
  if (!ann_flag.empty()) cfg.annotation = ann_flag;
  require_data(cfg);
  const auto data = load_data(*cfg.spectrogram, cfg.annotation, cfg.expected_bins);

  const GridResult grid = grid_search(data.spectrogram, data.labels, cfg.grid, cfg.pipeline);
  if (!grid.best) fail(ErrorKind::validation, "every grid combination was skipped");
  const HyperParams hp = grid.selected();

  std::vector<BandCombo> candidates = cfg.explicit_candidates;
  if (candidates.empty()) {
    candidates = default_band_candidates(data.spectrogram, data.labels, cfg.grid, cfg.pipeline);
  }
  const auto evals = evaluate_band_combos(data.spectrogram, data.labels, hp, candidates, cfg.pipeline);
  const auto pick = select_band_combo(evals);
  const BandCombo combo = pick ? evals[*pick].combo : grid.selected_combo();

  io::write_atomic(cfg.out / "ledger.csv", format_ledger_csv(grid.rows));
  io::write_atomic(cfg.out / "combos.csv", format_ledger_csv(combo_ledger_rows(evals, hp)));
  io::write_atomic(cfg.out / "params.json", format_params({hp, combo}));

  const SvmModel model = train_final(data.spectrogram, data.labels, hp, combo, cfg.pipeline);
  save_model(model, cfg.out / "model.txt");

  const auto& best = grid.rows[*grid.best];
  std::string report = "grid.effective_size=" + std::to_string(cfg.grid.effective_size()) + "\n" +
                       "grid.nominal_size=" + std::to_string(cfg.grid.nominal_size()) + "\n" +
                       "grid.skipped=" + std::to_string(grid.skipped) + "\n" +
                       "selected.overlap_s=" + std::to_string(hp.window.overlap_s) + "\n" +
                       "selected.kernel=" + std::string(kernel_name(hp.kernel.kind)) + "\n" +
                       "selected.C=" + io::format_double(hp.C) + "\n" +
                       "selected.gamma=" +
                       (hp.kernel.kind == KernelKind::rbf ? io::format_double(hp.kernel.gamma) : "NA") +
                       "\n" + "selected.granularity_hz=" +
                       std::to_string(combo.banding.granularity_hz) + "\n" +
                       "selected.metric=" + std::string(metric_name(combo.banding.metric)) + "\n" +
                       "selected.band_pair=" + combo.pair.name() + "\n" +
                       format_metrics_report("validation", *best.metrics);
  if (pick && evals[*pick].test) report += format_metrics_report("test", *evals[*pick].test);
  io::write_atomic(cfg.out / "tune_report.txt", report);
  std::cout << report;
}

void cmd_train(const GlobalFlags& g, const std::string& params_path, const std::string& model_path,
               const std::string& spec_flag, const std::string& ann_flag) {
  RunConfig cfg = resolve_config(g);
  if (!spec_flag.empty()) cfg.spectrogram = spec_flag;
  if (!ann_flag.empty()) cfg.annotation = ann_flag;
  require_data(cfg);
  const SelectedParams params = parse_params(io::read_file(params_path));
  cfg.pipeline.window_s = params.hp.window.window_s;
  const auto data = load_data(*cfg.spectrogram, cfg.annotation, cfg.expected_bins);
  const SvmModel model = train_final(data.spectrogram, data.labels, params.hp, params.combo, cfg.pipeline);
  const fs::path out = model_path.empty() ? cfg.out / "model.txt" : fs::path(model_path);
  save_model(model, out);
  std::cout << "wrote " << out.string() << " (" << model.support_vectors.rows
            << " support vectors, " << model.meta->pair.name() << ", "
            << metric_name(model.meta->banding.metric) << ")\n";
}

void cmd_eval(const GlobalFlags& g, const std::string& model_path, const std::string& spec_path,
              const std::string& ann_path, const std::string& report_path) {
  RunConfig cfg = resolve_config(g);
  const SvmModel model = load_model(model_path);
  std::optional<fs::path> ann;
  if (!ann_path.empty()) ann = ann_path;
  const auto data = load_data(spec_path, ann, cfg.expected_bins);
  const TransferResult res = transfer_evaluate(model, data.spectrogram, data.labels);
  const std::string name = fs::path(spec_path).filename().string();
  std::string report = format_metrics_report(name, res.metrics);
  if (!data.annotated) report = "# no annotation: every window treated as no-leak\n" + report;
  if (!report_path.empty()) io::write_atomic(report_path, report);
  std::cout << report;
}

void cmd_predict(const GlobalFlags& g, const std::string& model_path, const std::string& spec_path,
                 const std::string& out_path) {
  RunConfig cfg = resolve_config(g);
  const SvmModel model = load_model(model_path);
  const auto data = load_data(spec_path, std::nullopt, cfg.expected_bins);
  const TransferResult res = transfer_evaluate(model, data.spectrogram, data.labels);
  std::string csv = "window_start_s,decision,prediction\n";
  for (std::size_t i = 0; i < res.predicted.size(); ++i) {
    csv += std::to_string(res.window_start_s[i]) + "," + io::format_double(res.decision[i]) + "," +
           std::to_string(res.predicted[i]) + "\n";
  }
  const fs::path out = out_path.empty() ? cfg.out / "predictions.csv" : fs::path(out_path);
  io::write_atomic(out, csv);
  std::cout << "wrote " << out.string() << " (" << res.predicted.size() << " windows)\n";
}

void cmd_report(const GlobalFlags& g, const std::string& ledger_path) {
  RunConfig cfg = resolve_config(g);
  const auto rows = parse_ledger_csv(io::read_file(ledger_path));
  const fs::path out = cfg.out / "pr_report.csv";
  io::write_atomic(out, format_pr_report(rows));
  std::size_t series = 0;
  for (const auto& r : rows) series += r.metrics ? 1 : 0;
  std::cout << "wrote " << out.string() << " (" << series << " series)\n";
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"leakdet: pipe-leak detection from PSD spectrograms"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_option("--seed", g.seed, "random seed (synthetic data)");
  app.add_option("--workers", g.workers, "worker threads for parallel stages");
  app.add_option("--out", g.out, "output directory");

  std::string preset;
  std::optional<double> snr;
  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic spectrogram datasets");
  synth_cmd->add_option("--preset", preset, "leak_process | leak_noprocess | noleak_noprocess");
  synth_cmd->add_option("--snr-db", snr, "leak power over background, dB");

  std::string spec_path, ann_path;
  auto* tune_cmd = app.add_subcommand("tune", "grid search, band selection and final model");
  tune_cmd->add_option("--spectrogram", spec_path, "PSD matrix file");
  tune_cmd->add_option("--annotation", ann_path, "leak interval file");

  std::string params_path, model_path;
  auto* train_cmd = app.add_subcommand("train", "train a model on a whole dataset");
  train_cmd->add_option("--params", params_path, "selected parameters (from tune)")->required();
  train_cmd->add_option("--model", model_path, "output model file");
  train_cmd->add_option("--spectrogram", spec_path, "PSD matrix file");
  train_cmd->add_option("--annotation", ann_path, "leak interval file");

  std::string report_path;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained model on a dataset");
  eval_cmd->add_option("--model", model_path, "model file")->required();
  eval_cmd->add_option("--spectrogram", spec_path, "PSD matrix file")->required();
  eval_cmd->add_option("--annotation", ann_path, "leak interval file (optional)");
  eval_cmd->add_option("--report", report_path, "write the metrics report here");

  std::string pred_out;
  auto* predict_cmd = app.add_subcommand("predict", "per-window decisions");
  predict_cmd->add_option("--model", model_path, "model file")->required();
  predict_cmd->add_option("--spectrogram", spec_path, "PSD matrix file")->required();
  predict_cmd->add_option("--predictions", pred_out, "output CSV");

  std::string ledger_path;
  auto* report_cmd = app.add_subcommand("report", "precision/recall series from a ledger");
  report_cmd->add_option("--ledger", ledger_path, "ledger CSV from tune")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& c : msg) {
      if (c == '\n') c = ' ';
    }
    std::cerr << "error: usage: " << msg << "\n";
    return 2;
  }

  try {
    if (*synth_cmd) cmd_synth(g, preset, snr);
    else if (*tune_cmd) cmd_tune(g, spec_path, ann_path);
    else if (*train_cmd) cmd_train(g, params_path, model_path, spec_path, ann_path);
    else if (*eval_cmd) cmd_eval(g, model_path, spec_path, ann_path, report_path);
    else if (*predict_cmd) cmd_predict(g, model_path, spec_path, pred_out);
    else if (*report_cmd) cmd_report(g, ledger_path);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return e.kind() == ErrorKind::usage ? 2 : 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace leakdet::cli
