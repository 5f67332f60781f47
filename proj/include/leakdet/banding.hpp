#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "leakdet/spectrogram.hpp"

namespace leakdet {

enum class Metric { mean, median, iqr };

Metric parse_metric(std::string_view name);
std::string_view metric_name(Metric m) noexcept;

struct BandingConfig {
  int granularity_hz = 2000;
  Metric metric = Metric::mean;

  void validate() const;
  friend bool operator==(const BandingConfig&, const BandingConfig&) = default;
};

inline constexpr int kGranularities[] = {1000, 2000, 5000};
inline constexpr Metric kMetrics[] = {Metric::mean, Metric::median, Metric::iqr};

struct Band {
  double lo_hz;
  double hi_hz;

  std::string label() const;  // "2k_4k"
  friend bool operator==(const Band&, const Band&) = default;
  friend auto operator<=>(const Band&, const Band&) = default;
};

std::string format_hz(double hz);

// Aggregated sub-band time series, band-major (bands x seconds).
struct BandedSeries {
  std::vector<Band> bands;
  std::vector<double> values;
  std::size_t duration_s = 0;
  BandingConfig config;

  std::span<const double> series(std::size_t band) const {
    return {values.data() + band * duration_s, duration_s};
  }
  std::size_t find(const Band& band) const;  // throws when absent
};

// Band layout tiling [0, max_freq) at the configured granularity, last band partial.
std::vector<Band> band_layout(double max_freq_hz, int granularity_hz);

// Value for one band and second: the metric over the band's PSD cells.
// `cells` is used as scratch and reordered.
double band_metric(std::span<double> cells, Metric metric);

BandedSeries aggregate(const Spectrogram& spec, const BandingConfig& cfg);
// Single-threaded reference; identical output to aggregate().
BandedSeries aggregate_serial(const Spectrogram& spec, const BandingConfig& cfg);

struct RankedBand {
  Band band;
  double r;
  std::size_t abs_rank;  // 1-based
};

struct BandRanking {
  std::vector<RankedBand> entries;  // |r| descending
  std::vector<Band> zero_variance;  // excluded
};

// Pearson r of each band against the 0/1 labels over seconds [begin, end).
BandRanking rank_bands(const BandedSeries& banded, std::span<const std::uint8_t> labels,
                       std::size_t begin = 0, std::size_t end = static_cast<std::size_t>(-1));

std::string format_ranking_csv(const BandRanking& ranking);

// Two distinct bands, ascending by lo_hz.
struct BandPair {
  Band first;
  Band second;

  std::string name() const;  // "band_0_2k_2k_4k"
  friend bool operator==(const BandPair&, const BandPair&) = default;
  friend auto operator<=>(const BandPair&, const BandPair&) = default;
};

BandPair normalize_pair(Band a, Band b);
BandPair select_top2(const BandRanking& ranking);
// Explicit pair; both bands must exist in `banded`.
BandPair select_explicit(const BandedSeries& banded, Band a, Band b);
// Every pair drawn from the top_k ranked bands, in rank order.
std::vector<BandPair> candidate_pairs(const BandRanking& ranking, std::size_t top_k = 5);

BandedSeries restrict_to(const BandedSeries& banded, const BandPair& pair);

}  // namespace leakdet
