#include <doctest.h>

#include <random>

#include "leakdet/error.hpp"
#include "leakdet/pipeline.hpp"
#include "leakdet/synth.hpp"

using namespace leakdet;

namespace {

synth::Dataset small_dataset(std::uint64_t seed = 4) {
  synth::SynthConfig c;
  c.duration_s = 600;
  c.n_bins = 600;
  c.seed = seed;
  for (auto [a, b] : {std::pair{50, 90}, {150, 190}, {260, 300}, {380, 420}, {510, 550}}) {
    c.leak_spec.push_back({{std::size_t(a), std::size_t(b)}, {500, 3500}, 10.0});
  }
  c.process_spec.push_back({{120, 240}, {40000, 45000}, 12.0, 60.0});
  return synth::generate(c);
}

ParamGrid tiny_grid() {
  ParamGrid g;
  g.granularities = {2000};
  g.metrics = {Metric::mean};
  g.overlaps = {7};
  g.kernels = {KernelKind::linear};
  g.costs = {1};
  return g;
}

LedgerRow row_with(double f1, double precision, double C, KernelKind k) {
  LedgerRow r;
  r.C = C;
  r.kernel = {k, 1.0};
  r.pair = normalize_pair(Band{0, 2000}, Band{2000, 4000});
  Metrics m;
  m.f1 = f1;
  m.precision = precision;
  r.metrics = m;
  return r;
}

}  // namespace

TEST_CASE("chronological split") {
  const auto s = split_chronological(3096, {}, 10);
  CHECK(s.train == TimeRange{0, 1857});
  CHECK(s.validation == TimeRange{1857, 2476});
  CHECK(s.test == TimeRange{2476, 3096});
  CHECK_THROWS_AS(split_chronological(30, {}, 10), Error);
  CHECK_THROWS_AS(split_chronological(3096, {0.6, 0.2, 0.1}, 10), Error);
}

TEST_CASE("split partitions the time axis") {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::size_t> d(200, 5000);
  std::uniform_real_distribution<double> f(0.2, 0.6);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = d(rng);
    const double tr = f(rng), va = (1.0 - tr) / 2.0;
    const auto s = split_chronological(n, {tr, va, 1.0 - tr - va}, 10);
    CHECK(s.train.begin == 0);
    CHECK(s.train.end == s.validation.begin);
    CHECK(s.validation.end == s.test.begin);
    CHECK(s.test.end == n);
  }
}

TEST_CASE("grid sizes") {
  const ParamGrid g;
  CHECK(g.effective_size() == 540);
  CHECK(g.nominal_size() == 864);
}

TEST_CASE("validation tie-breaks") {
  std::vector<LedgerRow> rows{row_with(0.9, 0.9, 1, KernelKind::linear),
                              row_with(0.9, 1.0, 1, KernelKind::linear)};
  CHECK(*select_best(rows) == 1);
  rows = {row_with(0.9, 1.0, 10, KernelKind::linear), row_with(0.9, 1.0, 1, KernelKind::linear)};
  CHECK(*select_best(rows) == 1);
  rows = {row_with(0.9, 1.0, 1, KernelKind::rbf), row_with(0.9, 1.0, 1, KernelKind::linear)};
  CHECK(*select_best(rows) == 1);
  rows = {row_with(0.8, 1.0, 1, KernelKind::linear), row_with(0.9, 0.5, 100, KernelKind::rbf)};
  CHECK(*select_best(rows) == 1);
  // Selection does not depend on enumeration order.
  std::swap(rows[0], rows[1]);
  CHECK(*select_best(rows) == 0);
  LedgerRow skipped;
  CHECK_FALSE(select_best({skipped}).has_value());
}

TEST_CASE("one-combo grid equals the manual stages") {
  const auto d = small_dataset();
  const auto labels = expand_labels(d.annotation, d.spectrogram.duration_s());
  const PipelineOptions opts;
  const auto r = grid_search(d.spectrogram, labels, tiny_grid(), opts);
  REQUIRE(r.rows.size() == 1);
  REQUIRE(r.best.has_value());
  const auto& row = r.rows[*r.best];
  REQUIRE(row.metrics);

  const auto split = split_chronological(600, opts.split, 10);
  const auto banded = aggregate(d.spectrogram, {2000, Metric::mean});
  const auto pair = select_top2(rank_bands(banded, labels, split.train.begin, split.train.end));
  CHECK(*row.pair == pair);
  const auto series = restrict_to(banded, pair);
  const auto edges = fit_entropy_edges(series, labels, split.train.begin, split.train.end, opts.features);
  const WindowConfig w{10, 7};
  const auto tr = featurize(series, labels, split.train.begin, split.train.end, w, opts.features, edges);
  const auto va = featurize(series, labels, split.validation.begin, split.validation.end, w,
                            opts.features, edges);
  const auto model = train(Matrix(tr.rows(), tr.cols(), tr.values), tr.labels, {}, tr.columns);
  const auto m = compute_metrics(va.labels, predict_all(model, Matrix(va.rows(), va.cols(), va.values)));
  CHECK(m.counts == row.metrics->counts);

  const auto hp = r.selected();
  CHECK(hp.window.overlap_s == 7);
  CHECK(r.selected_combo().pair == pair);
}

TEST_CASE("windows never straddle partitions") {
  const auto d = small_dataset();
  const auto labels = expand_labels(d.annotation, d.spectrogram.duration_s());
  const auto split = split_chronological(600, {}, 10);
  const auto banded = restrict_to(aggregate(d.spectrogram, {2000, Metric::mean}),
                                  normalize_pair(Band{0, 2000}, Band{2000, 4000}));
  const FeatureConfig fcfg;
  const auto edges = fit_entropy_edges(banded, labels, 0, split.train.end, fcfg);
  for (std::size_t ov : kOverlaps) {
    for (const auto* r : {&split.train, &split.validation, &split.test}) {
      const auto f = featurize(banded, labels, r->begin, r->end, {10, ov}, fcfg, edges);
      for (auto s : f.window_start_s) {
        CHECK(s >= r->begin);
        CHECK(s + 10 <= r->end);
      }
    }
  }
}

TEST_CASE("band combos, final model and transfer") {
  const auto d = small_dataset();
  const auto labels = expand_labels(d.annotation, d.spectrogram.duration_s());
  PipelineOptions opts;
  HyperParams hp;
  hp.window = {10, 7};

  const auto grid = tiny_grid();
  const auto cands = default_band_candidates(d.spectrogram, labels, grid, opts);
  CHECK(cands.size() == 10);

  const std::vector<BandCombo> one{cands.front()};
  const auto evals = evaluate_band_combos(d.spectrogram, labels, hp, one, opts);
  REQUIRE(evals.size() == 1);
  REQUIRE(evals[0].test);
  CHECK(select_band_combo(evals) == 0u);
  CHECK(combo_ledger_rows(evals, hp).size() == 2);

  const auto model = train_final(d.spectrogram, labels, hp, one[0], opts);
  REQUIRE(model.meta);
  CHECK(model.meta->pair == one[0].pair);
  CHECK(model.feature_order.size() == 52);

  const auto edges_before = model.meta->edges.fingerprint();
  const auto std_before = model.standardizer.fingerprint();
  const auto other = small_dataset(99);
  const auto other_labels = expand_labels(other.annotation, other.spectrogram.duration_s());
  const auto t = transfer_evaluate(model, other.spectrogram, other_labels);
  CHECK(model.meta->edges.fingerprint() == edges_before);
  CHECK(model.standardizer.fingerprint() == std_before);
  CHECK(t.predicted.size() == frame_windows(600, {10, 7}).size());
  CHECK(*t.metrics.recall >= 0.8);

  // A spectrogram with a different frequency range cannot reuse the model.
  const Spectrogram narrow(100, 600, std::vector<double>(60000, 1.0), 32768.0);
  CHECK_THROWS_AS(transfer_evaluate(model, narrow, std::vector<std::uint8_t>(600, 0)), Error);
}

TEST_CASE("transfer onto the source test range matches the combo evaluation") {
  const auto d = small_dataset();
  const auto labels = expand_labels(d.annotation, d.spectrogram.duration_s());
  PipelineOptions opts;
  HyperParams hp;
  hp.window = {10, 7};
  const BandCombo combo{{2000, Metric::mean}, normalize_pair(Band{0, 2000}, Band{2000, 4000})};
  const auto evals = evaluate_band_combos(d.spectrogram, labels, hp, {combo}, opts);
  REQUIRE(evals[0].test);

  // Rebuild the test-stage model by hand and score it through transfer.
  const auto split = split_chronological(600, opts.split, 10);
  const auto series = restrict_to(aggregate(d.spectrogram, combo.banding), combo.pair);
  const auto edges = fit_entropy_edges(series, labels, 0, split.validation.end, opts.features);
  const auto tv = concat(
      featurize(series, labels, split.train.begin, split.train.end, hp.window, opts.features, edges),
      featurize(series, labels, split.validation.begin, split.validation.end, hp.window,
                opts.features, edges));
  auto model = train(Matrix(tv.rows(), tv.cols(), tv.values), tv.labels, {}, tv.columns);
  model.meta = PipelineMeta{combo.banding, d.spectrogram.max_freq_hz(), combo.pair, hp.window,
                            opts.features, edges};

  std::vector<double> psd;
  const std::size_t n = split.test.length();
  for (std::size_t k = 0; k < d.spectrogram.n_bins(); ++k) {
    auto row = d.spectrogram.bin_row(k).subspan(split.test.begin, n);
    psd.insert(psd.end(), row.begin(), row.end());
  }
  const Spectrogram test(d.spectrogram.n_bins(), n, psd, d.spectrogram.max_freq_hz());
  const std::vector<std::uint8_t> test_labels(labels.begin() + split.test.begin, labels.end());
  const auto t = transfer_evaluate(model, test, test_labels);
  CHECK(t.metrics.counts == evals[0].test->counts);
}

TEST_CASE("ledger round trip") {
  const auto d = small_dataset();
  const auto labels = expand_labels(d.annotation, d.spectrogram.duration_s());
  auto grid = tiny_grid();
  grid.kernels = {KernelKind::linear, KernelKind::rbf};
  grid.gammas = {0.1};
  const auto r = grid_search(d.spectrogram, labels, grid, {});
  const auto csv = format_ledger_csv(r.rows);
  CHECK(csv.rfind("stage,granularity_hz,metric,band_pair,", 0) == 0);
  const auto back = parse_ledger_csv(csv);
  CHECK(format_ledger_csv(back) == csv);
  CHECK_THROWS_AS(parse_ledger_csv("stage\nvalidation\n"), Error);

  const auto pr = format_pr_report(r.rows);
  CHECK(pr.rfind("series,stage,metric,", 0) == 0);
}

TEST_CASE("single-class training data is skipped") {
  synth::SynthConfig c;
  c.duration_s = 300;
  c.n_bins = 600;
  c.leak_spec.push_back({{200, 240}, {500, 3500}, 10.0});
  const auto d = synth::generate(c);
  const auto labels = expand_labels(d.annotation, 300);
  const auto r = grid_search(d.spectrogram, labels, tiny_grid(), {});
  CHECK(r.skipped == r.rows.size());
  CHECK_FALSE(r.best.has_value());
  CHECK_FALSE(r.rows[0].skip_reason.empty());
}
