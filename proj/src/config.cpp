#include "leakdet/config.hpp"

#include <cstdlib>
#include <set>

#include "json.hpp"
#include "leakdet/error.hpp"
#include "leakdet/io.hpp"

namespace leakdet {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
  if (!obj.is_object()) fail(ErrorKind::config, where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) fail(ErrorKind::config, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("bad value for '") + key + "': " + e.what());
  }
}

synth::BandHz read_band(const json& j) {
  if (!j.is_array() || j.size() != 2) fail(ErrorKind::config, "band_hz must be [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

LeakInterval read_interval(const json& j) {
  std::size_t s = 0, e = 0;
  read(j, "start", s);
  read(j, "end", e);
  if (!j.contains("start") || !j.contains("end")) fail(ErrorKind::config, "interval needs start and end");
  return {s, e};
}

synth::SynthConfig read_custom_synth(const json& j) {
  synth::SynthConfig c;
  read(j, "duration_s", c.duration_s);
  read(j, "n_bins", c.n_bins);
  read(j, "max_freq_hz", c.max_freq_hz);
  read(j, "background_level", c.background_level);
  read(j, "background_tilt", c.background_tilt);
  read(j, "jitter_cv", c.jitter_cv);
  if (j.contains("leaks")) {
    for (const auto& l : j["leaks"]) {
      reject_unknown(l, {"start", "end", "band_hz", "snr_db"}, "synth.leaks[]");
      synth::LeakComponent lc{read_interval(l), synth::kDefaultLeakBand, synth::kDefaultLeakSnrDb};
      if (l.contains("band_hz")) lc.band = read_band(l["band_hz"]);
      read(l, "snr_db", lc.snr_db);
      c.leak_spec.push_back(lc);
    }
  }
  if (j.contains("process")) {
    for (const auto& p : j["process"]) {
      reject_unknown(p, {"start", "end", "band_hz", "snr_db", "modulation_period_s"},
                     "synth.process[]");
      if (!p.contains("band_hz")) fail(ErrorKind::config, "process component needs band_hz");
      synth::ProcessComponent pc{read_interval(p), read_band(p["band_hz"]), 0.0, 60.0};
      read(p, "snr_db", pc.snr_db);
      read(p, "modulation_period_s", pc.modulation_period_s);
      c.process_spec.push_back(pc);
    }
  }
  return c;
}

Band read_pair_band(const json& j) {
  if (!j.is_array() || j.size() != 2) fail(ErrorKind::config, "band must be [lo_hz, hi_hz]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(root, {"seed", "workers", "out", "synth", "data", "window", "features", "grid",
                        "split", "selection", "solver"},
                 "config");
  RunConfig cfg;
  read(root, "seed", cfg.seed);
  read(root, "workers", cfg.workers);
  if (root.contains("out")) cfg.out = root["out"].get<std::string>();

  if (root.contains("synth")) {
    const auto& s = root["synth"];
    reject_unknown(s, {"preset", "leak_snr_db", "duration_s", "n_bins", "max_freq_hz",
                       "background_level", "background_tilt", "jitter_cv", "leaks", "process"},
                   "synth");
    if (s.contains("preset")) cfg.preset = synth::parse_preset(s["preset"].get<std::string>());
    read(s, "leak_snr_db", cfg.leak_snr_db);
    if (!s.contains("preset")) cfg.custom_synth = read_custom_synth(s);
  }
  if (root.contains("data")) {
    const auto& d = root["data"];
    reject_unknown(d, {"spectrogram", "annotation", "expected_bins"}, "data");
    if (d.contains("spectrogram")) cfg.spectrogram = d["spectrogram"].get<std::string>();
    if (d.contains("annotation")) cfg.annotation = d["annotation"].get<std::string>();
    if (d.contains("expected_bins")) cfg.expected_bins = d["expected_bins"].get<std::size_t>();
  }
  if (root.contains("window")) {
    reject_unknown(root["window"], {"window_s"}, "window");
    read(root["window"], "window_s", cfg.pipeline.window_s);
  }
  if (root.contains("features")) {
    const auto& f = root["features"];
    reject_unknown(f, {"autocorr_lags", "pct_lags", "entropy_quantiles", "apen_m", "apen_r_factor"},
                   "features");
    read(f, "autocorr_lags", cfg.pipeline.features.autocorr_lags);
    read(f, "pct_lags", cfg.pipeline.features.pct_lags);
    read(f, "entropy_quantiles", cfg.pipeline.features.entropy_quantiles);
    read(f, "apen_m", cfg.pipeline.features.apen_m);
    read(f, "apen_r_factor", cfg.pipeline.features.apen_r_factor);
  }
  if (root.contains("grid")) {
    const auto& g = root["grid"];
    reject_unknown(g, {"granularities", "overlaps", "kernels", "costs", "gammas", "metrics"}, "grid");
    read(g, "granularities", cfg.grid.granularities);
    read(g, "overlaps", cfg.grid.overlaps);
    read(g, "costs", cfg.grid.costs);
    read(g, "gammas", cfg.grid.gammas);
    if (g.contains("kernels")) {
      cfg.grid.kernels.clear();
      for (const auto& k : g["kernels"]) cfg.grid.kernels.push_back(parse_kernel(k.get<std::string>()));
    }
    if (g.contains("metrics")) {
      cfg.grid.metrics.clear();
      for (const auto& m : g["metrics"]) cfg.grid.metrics.push_back(parse_metric(m.get<std::string>()));
    }
    for (int gr : cfg.grid.granularities) BandingConfig{gr, Metric::mean}.validate();
  }
  if (root.contains("split")) {
    const auto& s = root["split"];
    reject_unknown(s, {"train", "validation", "test"}, "split");
    read(s, "train", cfg.pipeline.split.train);
    read(s, "validation", cfg.pipeline.split.validation);
    read(s, "test", cfg.pipeline.split.test);
    cfg.pipeline.split.validate();
  }
  if (root.contains("selection")) {
    const auto& s = root["selection"];
    reject_unknown(s, {"top_k", "candidates"}, "selection");
    read(s, "top_k", cfg.pipeline.top_k);
    if (s.contains("candidates")) {
      for (const auto& c : s["candidates"]) {
        reject_unknown(c, {"granularity_hz", "metric", "bands"}, "selection.candidates[]");
        BandCombo combo;
        read(c, "granularity_hz", combo.banding.granularity_hz);
        if (c.contains("metric")) combo.banding.metric = parse_metric(c["metric"].get<std::string>());
        combo.banding.validate();
        if (!c.contains("bands") || c["bands"].size() != 2) {
          fail(ErrorKind::config, "candidate needs exactly two bands");
        }
        combo.pair = normalize_pair(read_pair_band(c["bands"][0]), read_pair_band(c["bands"][1]));
        cfg.explicit_candidates.push_back(combo);
      }
    }
  }
  if (root.contains("solver")) {
    const auto& s = root["solver"];
    reject_unknown(s, {"tol", "max_iterations"}, "solver");
    read(s, "tol", cfg.pipeline.solver.tol);
    read(s, "max_iterations", cfg.pipeline.solver.max_iterations);
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(io::read_file(path));
}

void apply_env_overrides(RunConfig& cfg) {
  if (const char* v = std::getenv("LEAKDET_SEED")) {
    try {
      cfg.seed = std::stoull(v);
    } catch (const std::logic_error&) {
      fail(ErrorKind::config, "LEAKDET_SEED is not an integer");
    }
  }
  if (const char* v = std::getenv("LEAKDET_WORKERS")) {
    try {
      cfg.workers = std::stoi(v);
    } catch (const std::logic_error&) {
      fail(ErrorKind::config, "LEAKDET_WORKERS is not an integer");
    }
  }
  if (const char* v = std::getenv("LEAKDET_OUT")) cfg.out = v;
}

std::string format_params(const SelectedParams& p) {
  json j;
  j["window_s"] = p.hp.window.window_s;
  j["overlap_s"] = p.hp.window.overlap_s;
  j["kernel"] = std::string(kernel_name(p.hp.kernel.kind));
  j["C"] = p.hp.C;
  j["gamma"] = p.hp.kernel.gamma;
  j["granularity_hz"] = p.combo.banding.granularity_hz;
  j["metric"] = std::string(metric_name(p.combo.banding.metric));
  j["band_pair"] = {{p.combo.pair.first.lo_hz, p.combo.pair.first.hi_hz},
                    {p.combo.pair.second.lo_hz, p.combo.pair.second.hi_hz}};
  j["band_pair_name"] = p.combo.pair.name();
  return j.dump(2) + "\n";
}

SelectedParams parse_params(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("params file is not valid JSON: ") + e.what());
  }
  reject_unknown(j, {"window_s", "overlap_s", "kernel", "C", "gamma", "granularity_hz", "metric",
                     "band_pair", "band_pair_name"},
                 "params");
  for (const char* key : {"window_s", "overlap_s", "kernel", "C", "granularity_hz", "metric", "band_pair"}) {
    if (!j.contains(key)) fail(ErrorKind::config, std::string("params file missing '") + key + "'");
  }
  SelectedParams p;
  read(j, "window_s", p.hp.window.window_s);
  read(j, "overlap_s", p.hp.window.overlap_s);
  p.hp.kernel.kind = parse_kernel(j["kernel"].get<std::string>());
  read(j, "gamma", p.hp.kernel.gamma);
  read(j, "C", p.hp.C);
  read(j, "granularity_hz", p.combo.banding.granularity_hz);
  p.combo.banding.metric = parse_metric(j["metric"].get<std::string>());
  const auto& bp = j["band_pair"];
  if (!bp.is_array() || bp.size() != 2) fail(ErrorKind::config, "band_pair must hold two bands");
  p.combo.pair = normalize_pair(read_pair_band(bp[0]), read_pair_band(bp[1]));
  p.hp.window.validate();
  p.hp.kernel.validate();
  p.combo.banding.validate();
  if (!(p.hp.C > 0.0)) fail(ErrorKind::config, "C must be positive");
  return p;
}

}  // namespace leakdet
