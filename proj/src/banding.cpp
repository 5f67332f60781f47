#include "leakdet/banding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "leakdet/error.hpp"
#include "leakdet/io.hpp"
#include "leakdet/stats.hpp"

namespace leakdet {

Metric parse_metric(std::string_view name) {
  if (name == "mean") return Metric::mean;
  if (name == "median") return Metric::median;
  if (name == "iqr") return Metric::iqr;
  fail(ErrorKind::config, "unknown metric '" + std::string(name) + "'");
}

std::string_view metric_name(Metric m) noexcept {
  switch (m) {
    case Metric::mean: return "mean";
    case Metric::median: return "median";
    case Metric::iqr: return "iqr";
  }
  return "";
}

void BandingConfig::validate() const {
  if (std::find(std::begin(kGranularities), std::end(kGranularities), granularity_hz) ==
      std::end(kGranularities)) {
    fail(ErrorKind::config, "granularity_hz must be one of 1000, 2000, 5000");
  }
}

std::string format_hz(double hz) {
  if (hz == 0.0) return "0";
  if (std::fmod(hz, 1000.0) == 0.0) return io::format_double(hz / 1000.0) + "k";
  return io::format_double(hz);
}

std::string Band::label() const { return format_hz(lo_hz) + "_" + format_hz(hi_hz); }

std::size_t BandedSeries::find(const Band& band) const {
  auto it = std::find(bands.begin(), bands.end(), band);
  if (it == bands.end()) fail(ErrorKind::config, "band " + band.label() + " not present");
  return static_cast<std::size_t>(it - bands.begin());
}

std::vector<Band> band_layout(double max_freq_hz, int granularity_hz) {
  const double g = granularity_hz;
  const auto count = static_cast<std::size_t>(std::ceil(max_freq_hz / g));
  std::vector<Band> bands;
  bands.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    bands.push_back({static_cast<double>(i) * g, std::min(static_cast<double>(i + 1) * g, max_freq_hz)});
  }
  return bands;
}

double band_metric(std::span<double> cells, Metric metric) {
  switch (metric) {
    case Metric::mean:
      return stats::mean(cells);
    case Metric::median:
      std::sort(cells.begin(), cells.end());
      return stats::quantile_sorted(cells, 0.5);
    case Metric::iqr:
      std::sort(cells.begin(), cells.end());
      return stats::quantile_sorted(cells, 0.75) - stats::quantile_sorted(cells, 0.25);
  }
  return 0.0;
}

namespace {

// First bin of each band plus a final sentinel; bins are assigned by center
// frequency, so band membership is a contiguous bin range.
std::vector<std::size_t> band_bin_offsets(const Spectrogram& spec, const std::vector<Band>& bands) {
  std::vector<std::size_t> offsets(bands.size() + 1, spec.n_bins());
  std::size_t k = 0;
  for (std::size_t b = 0; b < bands.size(); ++b) {
    while (k < spec.n_bins() && spec.bin_center_hz(k) < bands[b].lo_hz) ++k;
    offsets[b] = k;
  }
  for (std::size_t b = 0; b < bands.size(); ++b) {
    if (offsets[b] == offsets[b + 1]) {
      fail(ErrorKind::config, "band " + bands[b].label() + " contains no frequency bins");
    }
  }
  return offsets;
}

BandedSeries prepare(const Spectrogram& spec, const BandingConfig& cfg,
                     std::vector<std::size_t>& offsets) {
  cfg.validate();
  if (cfg.granularity_hz > spec.max_freq_hz()) {
    fail(ErrorKind::config, "granularity exceeds the spectrogram frequency range");
  }
  BandedSeries out;
  out.bands = band_layout(spec.max_freq_hz(), cfg.granularity_hz);
  out.duration_s = spec.duration_s();
  out.config = cfg;
  out.values.assign(out.bands.size() * out.duration_s, 0.0);
  offsets = band_bin_offsets(spec, out.bands);
  return out;
}

void aggregate_cell(const Spectrogram& spec, const std::vector<std::size_t>& offsets,
                    Metric metric, std::size_t b, std::size_t t, std::vector<double>& scratch,
                    BandedSeries& out) {
  scratch.clear();
  for (std::size_t k = offsets[b]; k < offsets[b + 1]; ++k) scratch.push_back(spec.at(k, t));
  out.values[b * out.duration_s + t] = band_metric(scratch, metric);
}

}  // namespace

BandedSeries aggregate(const Spectrogram& spec, const BandingConfig& cfg) {
  std::vector<std::size_t> offsets;
  BandedSeries out = prepare(spec, cfg, offsets);
  const std::size_t n_bands = out.bands.size();
  const std::size_t dur = out.duration_s;
#pragma omp parallel
  {
    std::vector<double> scratch;
#pragma omp for schedule(static)
    for (std::size_t t = 0; t < dur; ++t) {
      for (std::size_t b = 0; b < n_bands; ++b) {
        aggregate_cell(spec, offsets, cfg.metric, b, t, scratch, out);
      }
    }
  }
  return out;
}

BandedSeries aggregate_serial(const Spectrogram& spec, const BandingConfig& cfg) {
  std::vector<std::size_t> offsets;
  BandedSeries out = prepare(spec, cfg, offsets);
  std::vector<double> scratch;
  for (std::size_t b = 0; b < out.bands.size(); ++b) {
    for (std::size_t t = 0; t < out.duration_s; ++t) {
      aggregate_cell(spec, offsets, cfg.metric, b, t, scratch, out);
    }
  }
  return out;
}

BandRanking rank_bands(const BandedSeries& banded, std::span<const std::uint8_t> labels,
                       std::size_t begin, std::size_t end) {
  if (labels.size() != banded.duration_s) {
    fail(ErrorKind::validation, "label length does not match series duration");
  }
  end = std::min(end, banded.duration_s);
  if (begin >= end) fail(ErrorKind::validation, "empty ranking range");
  std::vector<double> y(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                        labels.begin() + static_cast<std::ptrdiff_t>(end));
  if (stats::is_constant(y)) {
    fail(ErrorKind::validation, "labels contain a single class; correlation undefined");
  }
  BandRanking ranking;
  for (std::size_t b = 0; b < banded.bands.size(); ++b) {
    auto x = banded.series(b).subspan(begin, end - begin);
    if (stats::is_constant(x)) {
      ranking.zero_variance.push_back(banded.bands[b]);
      continue;
    }
    ranking.entries.push_back({banded.bands[b], stats::pearson(x, y), 0});
  }
  std::stable_sort(ranking.entries.begin(), ranking.entries.end(),
                   [](const RankedBand& a, const RankedBand& b) {
                     return std::abs(a.r) > std::abs(b.r);
                   });
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) ranking.entries[i].abs_rank = i + 1;
  return ranking;
}

std::string format_ranking_csv(const BandRanking& ranking) {
  std::string out = "band_lo_hz,band_hi_hz,r,abs_rank\n";
  for (const auto& e : ranking.entries) {
    out += io::format_double(e.band.lo_hz) + "," + io::format_double(e.band.hi_hz) + "," +
           io::format_double(e.r) + "," + std::to_string(e.abs_rank) + "\n";
  }
  return out;
}

std::string BandPair::name() const { return "band_" + first.label() + "_" + second.label(); }

BandPair normalize_pair(Band a, Band b) {
  if (a == b) fail(ErrorKind::config, "band pair must contain two distinct bands");
  if (b.lo_hz < a.lo_hz) std::swap(a, b);
  return {a, b};
}

BandPair select_top2(const BandRanking& ranking) {
  if (ranking.entries.size() < 2) fail(ErrorKind::validation, "ranking has fewer than two bands");
  return normalize_pair(ranking.entries[0].band, ranking.entries[1].band);
}

BandPair select_explicit(const BandedSeries& banded, Band a, Band b) {
  banded.find(a);
  banded.find(b);
  return normalize_pair(a, b);
}

std::vector<BandPair> candidate_pairs(const BandRanking& ranking, std::size_t top_k) {
  const std::size_t k = std::min(top_k, ranking.entries.size());
  std::vector<BandPair> out;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      out.push_back(normalize_pair(ranking.entries[i].band, ranking.entries[j].band));
    }
  }
  return out;
}

BandedSeries restrict_to(const BandedSeries& banded, const BandPair& pair) {
  BandedSeries out;
  out.duration_s = banded.duration_s;
  out.config = banded.config;
  for (const Band& band : {pair.first, pair.second}) {
    auto s = banded.series(banded.find(band));
    out.bands.push_back(band);
    out.values.insert(out.values.end(), s.begin(), s.end());
  }
  return out;
}

}  // namespace leakdet
