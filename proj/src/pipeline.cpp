#include "leakdet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "leakdet/error.hpp"
#include "leakdet/io.hpp"

namespace leakdet {

void SplitSpec::validate() const {
  if (!(train > 0.0 && validation > 0.0 && test > 0.0)) {
    fail(ErrorKind::validation, "split fractions must be positive");
  }
  if (std::abs(train + validation + test - 1.0) > 1e-9) {
    fail(ErrorKind::validation, "split fractions must sum to 1");
  }
}

Split split_chronological(std::size_t duration_s, const SplitSpec& spec, std::size_t window_s) {
  spec.validate();
  const double d = static_cast<double>(duration_s);
  // Small epsilon keeps exact products (e.g. 30 * 0.6) from flooring down.
  const auto a = static_cast<std::size_t>(std::floor(d * spec.train + 1e-9));
  const auto b = static_cast<std::size_t>(std::floor(d * (spec.train + spec.validation) + 1e-9));
  Split s{{0, a}, {a, b}, {b, duration_s}};
  for (const auto* r : {&s.train, &s.validation, &s.test}) {
    if (r->length() < window_s) {
      fail(ErrorKind::validation, "partition [" + std::to_string(r->begin) + "," +
                                      std::to_string(r->end) + ") is shorter than one " +
                                      std::to_string(window_s) + " s window");
    }
  }
  return s;
}

std::size_t ParamGrid::effective_size() const noexcept {
  std::size_t per_kernel = 0;
  for (auto k : kernels) per_kernel += costs.size() * (k == KernelKind::rbf ? gammas.size() : 1);
  return granularities.size() * overlaps.size() * metrics.size() * per_kernel;
}

std::size_t ParamGrid::nominal_size() const noexcept {
  return granularities.size() * overlaps.size() * kernels.size() * costs.size() * gammas.size() *
         metrics.size();
}

HyperParams GridResult::selected() const {
  if (!best) fail(ErrorKind::validation, "grid search produced no usable combination");
  const auto& r = rows[*best];
  return {r.window, r.kernel, r.C};
}

BandCombo GridResult::selected_combo() const {
  if (!best) fail(ErrorKind::validation, "grid search produced no usable combination");
  const auto& r = rows[*best];
  return {r.banding, *r.pair};
}

namespace {

double or_lowest(const std::optional<double>& v) { return v ? *v : -1.0; }

auto tie_key(const LedgerRow& r) {
  const BandPair pair = r.pair.value_or(BandPair{});
  const double gamma = r.kernel.kind == KernelKind::rbf ? r.kernel.gamma : 0.0;
  return std::make_tuple(-static_cast<double>(r.window.overlap_s), gamma, r.banding.granularity_hz,
                         static_cast<int>(r.banding.metric), pair);
}

Matrix to_matrix(const FeatureFrame& f) { return Matrix(f.rows(), f.cols(), f.values); }

bool has_class(const std::vector<std::uint8_t>& y, std::uint8_t c) {
  return std::find(y.begin(), y.end(), c) != y.end();
}

Metrics score(const SvmModel& model, const FeatureFrame& frame) {
  return compute_metrics(frame.labels, predict_all(model, to_matrix(frame)));
}

TrainOptions train_options(const HyperParams& hp, const PipelineOptions& opts) {
  return {hp.C, hp.kernel, opts.solver};
}

FeatureFrame featurize_range(const BandedSeries& series, std::span<const std::uint8_t> labels,
                             const TimeRange& r, const WindowConfig& w, const PipelineOptions& opts,
                             const EntropyEdges& edges) {
  return featurize(series, labels, r.begin, r.end, w, opts.features, edges);
}

std::map<std::pair<int, int>, BandedSeries> aggregate_all(const Spectrogram& spec,
                                                          const std::vector<BandingConfig>& cfgs) {
  std::vector<BandingConfig> unique;
  for (const auto& c : cfgs) {
    if (std::find(unique.begin(), unique.end(), c) == unique.end()) unique.push_back(c);
  }
  std::vector<BandedSeries> out(unique.size());
  const auto n = static_cast<std::ptrdiff_t>(unique.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = aggregate(spec, unique[static_cast<std::size_t>(i)]);
  }
  std::map<std::pair<int, int>, BandedSeries> cache;
  for (std::size_t i = 0; i < unique.size(); ++i) {
    cache.emplace(std::make_pair(unique[i].granularity_hz, static_cast<int>(unique[i].metric)),
                  std::move(out[i]));
  }
  return cache;
}

void check_labels(const Spectrogram& spec, std::span<const std::uint8_t> labels) {
  if (labels.size() != spec.duration_s()) {
    fail(ErrorKind::validation, "label vector length does not match spectrogram duration");
  }
}

}  // namespace

bool better_validation_row(const LedgerRow& a, const LedgerRow& b) {
  const Metrics& ma = *a.metrics;
  const Metrics& mb = *b.metrics;
  if (or_lowest(ma.f1) != or_lowest(mb.f1)) return or_lowest(ma.f1) > or_lowest(mb.f1);
  if (or_lowest(ma.precision) != or_lowest(mb.precision)) {
    return or_lowest(ma.precision) > or_lowest(mb.precision);
  }
  if (a.C != b.C) return a.C < b.C;
  if (a.kernel.kind != b.kernel.kind) return a.kernel.kind == KernelKind::linear;
  return tie_key(a) < tie_key(b);
}

std::optional<std::size_t> select_best(const std::vector<LedgerRow>& rows) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].metrics) continue;
    if (!best || better_validation_row(rows[i], rows[*best])) best = i;
  }
  return best;
}

GridResult grid_search(const Spectrogram& spec, std::span<const std::uint8_t> labels,
                       const ParamGrid& grid, const PipelineOptions& opts) {
  check_labels(spec, labels);
  const Split split = split_chronological(spec.duration_s(), opts.split, opts.window_s);

  struct BandingTask {
    BandingConfig cfg;
    BandedSeries series;
    std::optional<BandPair> pair;
    std::string skip;
  };
  std::vector<BandingTask> tasks;
  for (int g : grid.granularities) {
    for (Metric m : grid.metrics) tasks.push_back({{g, m}, {}, {}, {}});
  }
  const auto n_tasks = static_cast<std::ptrdiff_t>(tasks.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ti = 0; ti < n_tasks; ++ti) {
    auto& task = tasks[static_cast<std::size_t>(ti)];
    try {
      const BandedSeries banded = aggregate(spec, task.cfg);
      const BandRanking ranking = rank_bands(banded, labels, split.train.begin, split.train.end);
      task.pair = select_top2(ranking);
      task.series = restrict_to(banded, *task.pair);
    } catch (const Error& e) {
      task.skip = e.what();
    }
  }

  // Rows in enumeration order: banding, overlap, kernel, C, gamma.
  std::vector<LedgerRow> rows;
  std::vector<std::pair<std::size_t, std::size_t>> unit_rows;  // [first, last) per unit
  for (const auto& task : tasks) {
    for (auto overlap : grid.overlaps) {
      const std::size_t first = rows.size();
      for (auto kind : grid.kernels) {
        for (double c : grid.costs) {
          const std::vector<double> gammas =
              kind == KernelKind::rbf ? grid.gammas : std::vector<double>{1.0};
          for (double gamma : gammas) {
            LedgerRow row;
            row.stage = "validation";
            row.banding = task.cfg;
            row.pair = task.pair;
            row.window = {opts.window_s, overlap};
            row.kernel = {kind, gamma};
            row.C = c;
            row.skip_reason = task.skip;
            rows.push_back(std::move(row));
          }
        }
      }
      unit_rows.emplace_back(first, rows.size());
    }
  }

  const auto n_units = static_cast<std::ptrdiff_t>(unit_rows.size());
  const std::size_t per_task = grid.overlaps.size();
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ui = 0; ui < n_units; ++ui) {
    const auto [first, last] = unit_rows[static_cast<std::size_t>(ui)];
    const auto& task = tasks[static_cast<std::size_t>(ui) / per_task];
    if (!task.skip.empty() || first == last) continue;
    const WindowConfig wcfg = rows[first].window;
    auto skip_unit = [&](const std::string& why) {
      for (std::size_t r = first; r < last; ++r) rows[r].skip_reason = why;
    };
    try {
      const EntropyEdges edges = fit_entropy_edges(task.series, labels, split.train.begin,
                                                   split.train.end, opts.features);
      const FeatureFrame tr = featurize_range(task.series, labels, split.train, wcfg, opts, edges);
      const FeatureFrame va =
          featurize_range(task.series, labels, split.validation, wcfg, opts, edges);
      if (!has_class(tr.labels, 0) || !has_class(tr.labels, 1)) {
        skip_unit("training windows contain a single class");
        continue;
      }
      if (!has_class(va.labels, 1)) {
        skip_unit("validation partition has no leak windows");
        continue;
      }
      const Matrix xtr = to_matrix(tr);
      for (std::size_t r = first; r < last; ++r) {
        const HyperParams hp{wcfg, rows[r].kernel, rows[r].C};
        const SvmModel model = train(xtr, tr.labels, train_options(hp, opts), tr.columns);
        rows[r].metrics = score(model, va);
      }
    } catch (const Error& e) {
      skip_unit(e.what());
    }
  }

  GridResult result;
  result.rows = std::move(rows);
  result.best = select_best(result.rows);
  for (const auto& r : result.rows) result.skipped += r.metrics ? 0 : 1;
  return result;
}

std::vector<BandCombo> default_band_candidates(const Spectrogram& spec,
                                               std::span<const std::uint8_t> labels,
                                               const ParamGrid& grid, const PipelineOptions& opts) {
  check_labels(spec, labels);
  const Split split = split_chronological(spec.duration_s(), opts.split, opts.window_s);
  std::vector<BandingConfig> cfgs;
  for (int g : grid.granularities) {
    for (Metric m : grid.metrics) cfgs.push_back({g, m});
  }
  const auto cache = aggregate_all(spec, cfgs);
  std::vector<BandCombo> out;
  for (const auto& cfg : cfgs) {
    const auto& banded = cache.at({cfg.granularity_hz, static_cast<int>(cfg.metric)});
    try {
      const auto ranking = rank_bands(banded, labels, split.train.begin, split.train.end);
      for (const auto& pair : candidate_pairs(ranking, opts.top_k)) out.push_back({cfg, pair});
    } catch (const Error&) {
      // Single-class training labels: no candidates at this banding.
    }
  }
  return out;
}

std::vector<ComboEvaluation> evaluate_band_combos(const Spectrogram& spec,
                                                  std::span<const std::uint8_t> labels,
                                                  const HyperParams& hp,
                                                  const std::vector<BandCombo>& candidates,
                                                  const PipelineOptions& opts) {
  check_labels(spec, labels);
  const Split split = split_chronological(spec.duration_s(), opts.split, hp.window.window_s);
  std::vector<BandingConfig> cfgs;
  for (const auto& c : candidates) cfgs.push_back(c.banding);
  const auto cache = aggregate_all(spec, cfgs);

  std::vector<ComboEvaluation> out(candidates.size());
  const auto n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ci = 0; ci < n; ++ci) {
    auto& ev = out[static_cast<std::size_t>(ci)];
    ev.combo = candidates[static_cast<std::size_t>(ci)];
    try {
      const auto& banded =
          cache.at({ev.combo.banding.granularity_hz, static_cast<int>(ev.combo.banding.metric)});
      const BandedSeries series = restrict_to(banded, ev.combo.pair);

      const EntropyEdges edges_tr = fit_entropy_edges(series, labels, split.train.begin,
                                                      split.train.end, opts.features);
      const FeatureFrame tr = featurize_range(series, labels, split.train, hp.window, opts, edges_tr);
      if (!has_class(tr.labels, 0) || !has_class(tr.labels, 1)) {
        ev.skip_reason = "training windows contain a single class";
        continue;
      }
      const FeatureFrame va =
          featurize_range(series, labels, split.validation, hp.window, opts, edges_tr);
      ev.validation = score(train(to_matrix(tr), tr.labels, train_options(hp, opts), tr.columns), va);

      const EntropyEdges edges_tv = fit_entropy_edges(series, labels, split.train.begin,
                                                      split.validation.end, opts.features);
      const FeatureFrame tv =
          concat(featurize_range(series, labels, split.train, hp.window, opts, edges_tv),
                 featurize_range(series, labels, split.validation, hp.window, opts, edges_tv));
      const FeatureFrame te = featurize_range(series, labels, split.test, hp.window, opts, edges_tv);
      ev.test = score(train(to_matrix(tv), tv.labels, train_options(hp, opts), tv.columns), te);
    } catch (const Error& e) {
      ev.skip_reason = e.what();
    }
  }
  return out;
}

std::optional<std::size_t> select_band_combo(const std::vector<ComboEvaluation>& evals) {
  auto key = [](const ComboEvaluation& e) {
    const Metrics none;
    const Metrics& t = e.test ? *e.test : none;
    const Metrics& v = e.validation ? *e.validation : none;
    return std::make_tuple(-or_lowest(t.f1), -or_lowest(v.f1), -or_lowest(t.specificity),
                           -or_lowest(t.precision), e.combo.banding.granularity_hz,
                           static_cast<int>(e.combo.banding.metric), e.combo.pair);
  };
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < evals.size(); ++i) {
    if (!evals[i].test) continue;
    if (!best || key(evals[i]) < key(evals[*best])) best = i;
  }
  return best;
}

std::vector<LedgerRow> combo_ledger_rows(const std::vector<ComboEvaluation>& evals,
                                         const HyperParams& hp) {
  std::vector<LedgerRow> rows;
  for (const auto& e : evals) {
    for (const char* stage : {"validation", "test"}) {
      LedgerRow row;
      row.stage = std::string("combo_") + stage;
      row.banding = e.combo.banding;
      row.pair = e.combo.pair;
      row.window = hp.window;
      row.kernel = hp.kernel;
      row.C = hp.C;
      row.metrics = std::string(stage) == "test" ? e.test : e.validation;
      row.skip_reason = e.skip_reason;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

SvmModel train_final(const Spectrogram& spec, std::span<const std::uint8_t> labels,
                     const HyperParams& hp, const BandCombo& combo, const PipelineOptions& opts) {
  check_labels(spec, labels);
  const BandedSeries series = restrict_to(aggregate(spec, combo.banding), combo.pair);
  const TimeRange all{0, spec.duration_s()};
  const EntropyEdges edges = fit_entropy_edges(series, labels, all.begin, all.end, opts.features);
  const FeatureFrame frame = featurize_range(series, labels, all, hp.window, opts, edges);
  SvmModel model = train(to_matrix(frame), frame.labels, train_options(hp, opts), frame.columns);
  model.meta = PipelineMeta{combo.banding, spec.max_freq_hz(), combo.pair, hp.window,
                            opts.features, edges};
  return model;
}

FeatureFrame featurize_for_model(const SvmModel& model, const Spectrogram& spec,
                                 std::span<const std::uint8_t> labels) {
  if (!model.meta) fail(ErrorKind::config, "model carries no pipeline metadata");
  const PipelineMeta& meta = *model.meta;
  if (meta.max_freq_hz != spec.max_freq_hz()) {
    fail(ErrorKind::validation, "dataset frequency range differs from the model's");
  }
  Labels zeros;
  if (labels.empty()) {
    zeros.assign(spec.duration_s(), 0);
    labels = zeros;
  }
  check_labels(spec, labels);
  const BandedSeries series = restrict_to(aggregate(spec, meta.banding), meta.pair);
  if (feature_columns(series.bands) != model.feature_order) {
    fail(ErrorKind::validation, "dataset features do not match the model's feature order");
  }
  return featurize(series, labels, 0, spec.duration_s(), meta.window, meta.features, meta.edges);
}

TransferResult transfer_evaluate(const SvmModel& model, const Spectrogram& spec,
                                 std::span<const std::uint8_t> labels) {
  const FeatureFrame frame = featurize_for_model(model, spec, labels);
  TransferResult out;
  out.window_start_s = frame.window_start_s;
  out.truth = frame.labels;
  for (std::size_t i = 0; i < frame.rows(); ++i) {
    const double f = decision_function(model, frame.row(i));
    out.decision.push_back(f);
    out.predicted.push_back(f > 0.0 ? 1 : 0);
  }
  out.metrics = compute_metrics(out.truth, out.predicted);
  return out;
}

namespace {

constexpr const char* kLedgerHeader =
    "stage,granularity_hz,metric,band_pair,band1_lo_hz,band1_hi_hz,band2_lo_hz,band2_hi_hz,"
    "window_s,overlap_s,kernel,C,gamma,tp,fp,tn,fn,accuracy,precision,recall,specificity,f1,"
    "skip_reason";
constexpr std::size_t kLedgerFields = 23;

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

std::optional<double> parse_optional(std::string_view s) {
  if (io::trim(s) == "N/A") return std::nullopt;
  return io::parse_double(s);
}

}  // namespace

std::string format_ledger_csv(const std::vector<LedgerRow>& rows) {
  std::string out = std::string(kLedgerHeader) + "\n";
  for (const auto& r : rows) {
    std::vector<std::string> f;
    f.push_back(r.stage);
    f.push_back(std::to_string(r.banding.granularity_hz));
    f.emplace_back(metric_name(r.banding.metric));
    if (r.pair) {
      f.push_back(r.pair->name());
      for (double v : {r.pair->first.lo_hz, r.pair->first.hi_hz, r.pair->second.lo_hz,
                       r.pair->second.hi_hz}) {
        f.push_back(io::format_double(v));
      }
    } else {
      for (int i = 0; i < 5; ++i) f.emplace_back("NA");
    }
    f.push_back(std::to_string(r.window.window_s));
    f.push_back(std::to_string(r.window.overlap_s));
    f.emplace_back(kernel_name(r.kernel.kind));
    f.push_back(io::format_double(r.C));
    f.push_back(r.kernel.kind == KernelKind::rbf ? io::format_double(r.kernel.gamma) : "NA");
    if (r.metrics) {
      const auto& m = *r.metrics;
      for (auto c : {m.counts.tp, m.counts.fp, m.counts.tn, m.counts.fn}) f.push_back(std::to_string(c));
      for (const auto& v : {m.accuracy, m.precision, m.recall, m.specificity, m.f1}) {
        f.push_back(format_optional(v));
      }
    } else {
      for (int i = 0; i < 9; ++i) f.emplace_back("NA");
    }
    f.push_back(sanitize(r.skip_reason));
    for (std::size_t i = 0; i < f.size(); ++i) out += (i ? "," : "") + f[i];
    out += "\n";
  }
  return out;
}

std::vector<LedgerRow> parse_ledger_csv(std::string_view text) {
  std::vector<LedgerRow> rows;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool header = false;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (io::trim(line).empty()) continue;
    if (!header) {
      if (io::trim(line) != kLedgerHeader) {
        fail(ErrorKind::format, "ledger line " + std::to_string(line_no) + ": unexpected header");
      }
      header = true;
      continue;
    }
    auto f = io::split_fields(line, ',');
    try {
      if (f.size() != kLedgerFields) fail(ErrorKind::format, "expected 23 fields");
      LedgerRow r;
      r.stage = std::string(f[0]);
      r.banding.granularity_hz = static_cast<int>(io::parse_double(f[1]));
      r.banding.metric = parse_metric(f[2]);
      if (f[3] != "NA") {
        r.pair = normalize_pair({io::parse_double(f[4]), io::parse_double(f[5])},
                                {io::parse_double(f[6]), io::parse_double(f[7])});
      }
      r.window.window_s = static_cast<std::size_t>(io::parse_double(f[8]));
      r.window.overlap_s = static_cast<std::size_t>(io::parse_double(f[9]));
      r.kernel.kind = parse_kernel(f[10]);
      r.C = io::parse_double(f[11]);
      if (r.kernel.kind == KernelKind::rbf) r.kernel.gamma = io::parse_double(f[12]);
      if (f[13] != "NA") {
        Confusion c;
        c.tp = static_cast<std::int64_t>(io::parse_double(f[13]));
        c.fp = static_cast<std::int64_t>(io::parse_double(f[14]));
        c.tn = static_cast<std::int64_t>(io::parse_double(f[15]));
        c.fn = static_cast<std::int64_t>(io::parse_double(f[16]));
        Metrics m = metrics_from_confusion(c);
        m.accuracy = parse_optional(f[17]);
        m.precision = parse_optional(f[18]);
        m.recall = parse_optional(f[19]);
        m.specificity = parse_optional(f[20]);
        m.f1 = parse_optional(f[21]);
        r.metrics = m;
      }
      r.skip_reason = std::string(f[22]);
      rows.push_back(std::move(r));
    } catch (const Error& e) {
      fail(ErrorKind::format, "ledger line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header) fail(ErrorKind::format, "ledger is empty (missing header)");
  return rows;
}

std::string format_pr_report(const std::vector<LedgerRow>& rows) {
  std::string out =
      "series,stage,metric,granularity_hz,band_pair,window_s,overlap_s,kernel,C,gamma,precision,"
      "recall\n";
  for (const auto& r : rows) {
    if (!r.metrics) continue;
    const std::string pair = r.pair ? r.pair->name() : "NA";
    const std::string series = std::string(metric_name(r.banding.metric)) + "/" +
                               std::to_string(r.banding.granularity_hz) + "/" + pair;
    out += series + "," + r.stage + "," + std::string(metric_name(r.banding.metric)) + "," +
           std::to_string(r.banding.granularity_hz) + "," + pair + "," +
           std::to_string(r.window.window_s) + "," + std::to_string(r.window.overlap_s) + "," +
           std::string(kernel_name(r.kernel.kind)) + "," + io::format_double(r.C) + "," +
           (r.kernel.kind == KernelKind::rbf ? io::format_double(r.kernel.gamma) : "NA") + "," +
           format_optional(r.metrics->precision) + "," + format_optional(r.metrics->recall) + "\n";
  }
  return out;
}

}  // namespace leakdet
