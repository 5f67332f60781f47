#include <benchmark/benchmark.h>

#include <random>

#include "leakdet/banding.hpp"
#include "leakdet/features.hpp"
#include "leakdet/synth.hpp"
#include "leakdet/svm.hpp"

using namespace leakdet;

namespace {

const synth::Dataset& dataset() {
  static const synth::Dataset d = [] {
    synth::SynthConfig c;
    c.duration_s = 1200;
    c.n_bins = 2000;
    c.seed = 1;
    c.leak_spec.push_back({{300, 400}, {500, 3500}, 10.0});
    return synth::generate(c);
  }();
  return d;
}

struct FeatureInputs {
  BandedSeries banded;
  std::vector<std::uint8_t> labels;
  EntropyEdges edges;
};

const FeatureInputs& feature_inputs() {
  static const FeatureInputs in = [] {
    const auto& d = dataset();
    FeatureInputs f;
    f.labels = expand_labels(d.annotation, d.spectrogram.duration_s());
    f.banded = restrict_to(aggregate(d.spectrogram, {2000, Metric::mean}),
                           normalize_pair(Band{0, 2000}, Band{2000, 4000}));
    f.edges = fit_entropy_edges(f.banded, f.labels, 0, f.banded.duration_s, {});
    return f;
  }();
  return in;
}

Matrix random_points(std::size_t n) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Matrix x(n, 52);
  for (auto& v : x.data) v = g(rng);
  return x;
}

template <bool Parallel>
void BM_aggregate(benchmark::State& state) {
  const auto& spec = dataset().spectrogram;
  const BandingConfig cfg{1000, static_cast<Metric>(state.range(0))};
  for (auto _ : state) {
    auto b = Parallel ? aggregate(spec, cfg) : aggregate_serial(spec, cfg);
    benchmark::DoNotOptimize(b.values.data());
  }
}

template <bool Parallel>
void BM_featurize(benchmark::State& state) {
  const auto& f = feature_inputs();
  const WindowConfig w{10, static_cast<std::size_t>(state.range(0))};
  for (auto _ : state) {
    auto frame = Parallel ? featurize(f.banded, f.labels, 0, f.banded.duration_s, w, {}, f.edges)
                          : featurize_serial(f.banded, f.labels, 0, f.banded.duration_s, w, {}, f.edges);
    benchmark::DoNotOptimize(frame.values.data());
  }
}

template <bool Parallel>
void BM_gram(benchmark::State& state) {
  const auto x = random_points(static_cast<std::size_t>(state.range(0)));
  const KernelSpec k{KernelKind::rbf, 0.1};
  for (auto _ : state) {
    auto g = Parallel ? gram_matrix(x, k) : gram_matrix_serial(x, k);
    benchmark::DoNotOptimize(g.data.data());
  }
}

}  // namespace

BENCHMARK(BM_aggregate<true>)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_aggregate<false>)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_featurize<true>)->Arg(3)->Arg(7)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_featurize<false>)->Arg(3)->Arg(7)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gram<true>)->Arg(500)->Arg(1500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gram<false>)->Arg(500)->Arg(1500)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
