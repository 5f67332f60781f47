#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "leakdet/banding.hpp"

namespace leakdet {

// N-second analysis window advanced by window_s - overlap_s.
struct WindowConfig {
  std::size_t window_s = 10;
  std::size_t overlap_s = 7;

  std::size_t stride_s() const noexcept { return window_s - overlap_s; }
  void validate() const;
  friend bool operator==(const WindowConfig&, const WindowConfig&) = default;
};

inline constexpr std::size_t kOverlaps[] = {3, 5, 7};

struct FeatureConfig {
  std::array<std::size_t, 5> autocorr_lags{1, 2, 3, 4, 5};
  std::array<std::size_t, 3> pct_lags{1, 2, 3};
  std::array<double, 4> entropy_quantiles{0.05, 0.10, 0.95, 0.99};
  std::size_t apen_m = 2;
  double apen_r_factor = 0.2;

  void validate(const WindowConfig& wcfg) const;
  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

struct Window {
  std::size_t start_s;
  std::size_t end_s;  // exclusive
};

// Windows [k*stride, k*stride + window) fully inside [0, series_len).
std::vector<Window> frame_windows(std::size_t series_len, const WindowConfig& wcfg);

// 1 iff every second of the window is labeled leak.
std::uint8_t label_window(std::span<const std::uint8_t> window_labels);

// Peak-ratio statistics over one window. Ratios with a zero denominator are
// 0, as are kurtosis and skewness of a constant window.
struct BasicStats {
  double peak;
  double impulse_factor;
  double srm;
  double clearance_factor;
  double rms;
  double margin_factor;
  double energy;
  double crest_factor;
  double peak_to_peak;
  double kurtosis;
  double skewness;
  double shape_factor;
  double index_max;
  double index_min;

  std::array<double, 14> to_array() const;
};

BasicStats basic_stats(std::span<const double> x);

double autocorr(std::span<const double> x, std::size_t lag);

// Mean of the per-step percentage changes at the given lag; steps whose
// reference value is ~0 are skipped.
double pct_change(std::span<const double> x, std::size_t lag);

// Sorted amplitude edges for one band; k edges give k + 1 bins.
using BinEdges = std::vector<double>;

std::size_t bin_index(const BinEdges& edges, double v);

// Shannon entropy of the binned window, in bits.
double shannon_entropy(std::span<const double> x, const BinEdges& edges);

// H(X_n | X_{n-1}, X_{n-2}) of the binned symbol sequence, in bits.
double rate_entropy(std::span<const double> x, const BinEdges& edges);

double apen(std::span<const double> x, std::size_t m, double r_factor);

struct SampEnResult {
  double value;
  bool fallback;  // no m+1 (or m) matches; value is ln(B + 1)
};

SampEnResult sampen_detail(std::span<const double> x, std::size_t m, double r_factor);
double sampen(std::span<const double> x, std::size_t m, double r_factor);

inline constexpr std::size_t kFeaturesPerBand = 26;
inline constexpr std::size_t kBasicFeatures = 14;

// Per-band feature names in column order.
const std::array<std::string, kFeaturesPerBand>& feature_names();

// Computes the 26 features of one band window into out.
// Returns true when SampEn used its no-match fallback.
bool window_features(std::span<const double> x, const BinEdges& edges, const FeatureConfig& fcfg,
                     std::span<double> out);

// Quantile edges per band, fitted on leak-labeled seconds only.
struct EntropyEdges {
  std::vector<Band> bands;
  std::vector<BinEdges> edges;

  const BinEdges& for_band(const Band& band) const;
  std::uint64_t fingerprint() const;
  friend bool operator==(const EntropyEdges&, const EntropyEdges&) = default;
};

// Fits edges from the leak-labeled seconds within [begin, end).
EntropyEdges fit_entropy_edges(const BandedSeries& banded, std::span<const std::uint8_t> labels,
                               std::size_t begin, std::size_t end, const FeatureConfig& fcfg);

struct FeatureFrame {
  std::vector<std::string> columns;
  std::vector<double> values;  // row-major
  std::vector<std::uint8_t> labels;
  std::vector<std::size_t> window_start_s;
  std::size_t sampen_fallbacks = 0;

  std::size_t rows() const noexcept { return labels.size(); }
  std::size_t cols() const noexcept { return columns.size(); }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * cols(), cols()};
  }
};

// Column order: bands in the order of banded.bands (ascending for a
// normalized pair), each contributing its 26 features.
std::vector<std::string> feature_columns(const std::vector<Band>& bands);

// Features for every window framed inside seconds [begin, end).
FeatureFrame featurize(const BandedSeries& banded, std::span<const std::uint8_t> labels,
                       std::size_t begin, std::size_t end, const WindowConfig& wcfg,
                       const FeatureConfig& fcfg, const EntropyEdges& edges);
FeatureFrame featurize_serial(const BandedSeries& banded, std::span<const std::uint8_t> labels,
                              std::size_t begin, std::size_t end, const WindowConfig& wcfg,
                              const FeatureConfig& fcfg, const EntropyEdges& edges);

// Stacks frames that share the same columns.
FeatureFrame concat(const FeatureFrame& a, const FeatureFrame& b);

std::string format_feature_csv(const FeatureFrame& frame);

}  // namespace leakdet
