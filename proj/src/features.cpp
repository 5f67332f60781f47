#include "leakdet/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "leakdet/error.hpp"
#include "leakdet/io.hpp"
#include "leakdet/stats.hpp"

namespace leakdet {

namespace {

constexpr double kPctEps = 1e-12;
constexpr double kMinTolerance = 1e-12;

double guarded_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double population_std(std::span<const double> x) {
  const double m = stats::mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

double entropy_bits(std::span<const std::size_t> counts, std::size_t total) {
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

double tolerance(std::span<const double> x, double r_factor) {
  return std::max(r_factor * population_std(x), kMinTolerance);
}

bool templates_match(std::span<const double> x, std::size_t i, std::size_t j, std::size_t len,
                     double r) {
  for (std::size_t k = 0; k < len; ++k) {
    if (std::abs(x[i + k] - x[j + k]) > r) return false;
  }
  return true;
}

}  // namespace

void WindowConfig::validate() const {
  if (!(overlap_s > 0 && overlap_s < window_s)) {
    fail(ErrorKind::config, "window overlap must satisfy 0 < overlap_s < window_s");
  }
}

void FeatureConfig::validate(const WindowConfig& wcfg) const {
  for (auto lag : autocorr_lags) {
    if (lag < 1 || lag >= wcfg.window_s) fail(ErrorKind::config, "autocorr lag out of range");
  }
  for (auto lag : pct_lags) {
    if (lag < 1 || lag >= wcfg.window_s) fail(ErrorKind::config, "pct lag out of range");
  }
  double prev = 0.0;
  for (double q : entropy_quantiles) {
    if (!(q > prev && q < 1.0)) {
      fail(ErrorKind::config, "entropy quantiles must be strictly increasing in (0,1)");
    }
    prev = q;
  }
  if (apen_m < 1 || wcfg.window_s < apen_m + 2) {
    fail(ErrorKind::config, "window too short for the ApEn embedding dimension");
  }
  if (!(apen_r_factor > 0.0)) fail(ErrorKind::config, "apen_r_factor must be positive");
}

std::vector<Window> frame_windows(std::size_t series_len, const WindowConfig& wcfg) {
  wcfg.validate();
  if (series_len < wcfg.window_s) {
    fail(ErrorKind::validation, "series of " + std::to_string(series_len) +
                                    " s is shorter than one " + std::to_string(wcfg.window_s) +
                                    " s window");
  }
  std::vector<Window> out;
  for (std::size_t s = 0; s + wcfg.window_s <= series_len; s += wcfg.stride_s()) {
    out.push_back({s, s + wcfg.window_s});
  }
  return out;
}

std::uint8_t label_window(std::span<const std::uint8_t> window_labels) {
  return std::all_of(window_labels.begin(), window_labels.end(), [](auto v) { return v != 0; })
             ? 1
             : 0;
}

std::array<double, 14> BasicStats::to_array() const {
  return {peak,         impulse_factor, srm,      clearance_factor, rms,
          margin_factor, energy,        crest_factor, peak_to_peak,  kurtosis,
          skewness,     shape_factor,   index_max, index_min};
}

BasicStats basic_stats(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  double peak = 0.0, min_abs = std::numeric_limits<double>::infinity();
  double sum_abs = 0.0, sum_sqrt = 0.0, energy = 0.0;
  double lo = x.front(), hi = x.front();
  for (double v : x) {
    const double a = std::abs(v);
    peak = std::max(peak, a);
    min_abs = std::min(min_abs, a);
    sum_abs += a;
    sum_sqrt += std::sqrt(a);
    energy += v * v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double mean_abs = sum_abs / n;
  const double srm = (sum_sqrt / n) * (sum_sqrt / n);
  const double rms = std::sqrt(energy / n);

  double kurt = 0.0, skew = 0.0;
  if (!stats::is_constant(x)) {
    const double m = stats::mean(x);
    const double sd = population_std(x);
    for (double v : x) {
      const double z = (v - m) / sd;
      skew += z * z * z;
      kurt += z * z * z * z;
    }
    skew /= n;
    kurt /= n;
  }

  BasicStats s{};
  s.peak = peak;
  s.impulse_factor = guarded_ratio(peak, mean_abs);
  s.srm = srm;
  s.clearance_factor = guarded_ratio(peak, srm);
  s.rms = rms;
  s.margin_factor = guarded_ratio(peak, srm);
  s.energy = energy;
  s.crest_factor = guarded_ratio(peak, rms);
  s.peak_to_peak = hi - lo;
  s.kurtosis = kurt;
  s.skewness = skew;
  s.shape_factor = guarded_ratio(rms, mean_abs);
  s.index_max = peak / n;
  s.index_min = min_abs / n;
  return s;
}

double autocorr(std::span<const double> x, std::size_t lag) {
  if (lag < 1 || lag >= x.size()) fail(ErrorKind::validation, "autocorr lag out of range");
  if (stats::is_constant(x)) return 0.0;
  const double m = stats::mean(x);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    den += (x[i] - m) * (x[i] - m);
    if (i + lag < x.size()) num += (x[i] - m) * (x[i + lag] - m);
  }
  return guarded_ratio(num, den);
}

double pct_change(std::span<const double> x, std::size_t lag) {
  if (lag < 1 || lag >= x.size()) fail(ErrorKind::validation, "pct lag out of range");
  double sum = 0.0;
  std::size_t steps = 0;
  for (std::size_t i = lag; i < x.size(); ++i) {
    const double ref = std::abs(x[i - lag]);
    if (ref < kPctEps) continue;
    sum += (x[i] - x[i - lag]) * 100.0 / ref;
    ++steps;
  }
  return steps == 0 ? 0.0 : sum / static_cast<double>(steps);
}

std::size_t bin_index(const BinEdges& edges, double v) {
  return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
}

double shannon_entropy(std::span<const double> x, const BinEdges& edges) {
  std::vector<std::size_t> counts(edges.size() + 1, 0);
  for (double v : x) ++counts[bin_index(edges, v)];
  return entropy_bits(counts, x.size());
}

double rate_entropy(std::span<const double> x, const BinEdges& edges) {
  if (x.size() < 3) fail(ErrorKind::validation, "rate entropy needs at least 3 samples");
  const std::size_t k = edges.size() + 1;
  std::vector<std::size_t> symbols(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) symbols[i] = bin_index(edges, x[i]);

  // Average over contexts (previous two symbols) of the successor entropy.
  std::vector<std::size_t> successor(k * k * k, 0);
  std::vector<std::size_t> context(k * k, 0);
  for (std::size_t n = 2; n < symbols.size(); ++n) {
    const std::size_t ctx = symbols[n - 2] * k + symbols[n - 1];
    ++context[ctx];
    ++successor[ctx * k + symbols[n]];
  }
  const double total = static_cast<double>(symbols.size() - 2);
  double h = 0.0;
  for (std::size_t ctx = 0; ctx < k * k; ++ctx) {
    if (context[ctx] == 0) continue;
    std::span<const std::size_t> next(successor.data() + ctx * k, k);
    h += static_cast<double>(context[ctx]) / total * entropy_bits(next, context[ctx]);
  }
  return h;
}

double apen(std::span<const double> x, std::size_t m, double r_factor) {
  const std::size_t n = x.size();
  if (n < m + 2) fail(ErrorKind::validation, "window too short for ApEn");
  const double r = tolerance(x, r_factor);
  auto phi = [&](std::size_t len) {
    const std::size_t count = n - len + 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t c = 0;
      for (std::size_t j = 0; j < count; ++j) c += templates_match(x, i, j, len, r) ? 1 : 0;
      acc += std::log(static_cast<double>(c) / static_cast<double>(count));
    }
    return acc / static_cast<double>(count);
  };
  return phi(m) - phi(m + 1);
}

SampEnResult sampen_detail(std::span<const double> x, std::size_t m, double r_factor) {
  const std::size_t n = x.size();
  if (n < m + 2) fail(ErrorKind::validation, "window too short for SampEn");
  const double r = tolerance(x, r_factor);
  // The same n - m templates are used for both lengths; pairs with i < j.
  std::size_t a = 0, b = 0;
  const std::size_t count = n - m;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = i + 1; j < count; ++j) {
      if (!templates_match(x, i, j, m, r)) continue;
      ++b;
      if (std::abs(x[i + m] - x[j + m]) <= r) ++a;
    }
  }
  if (a == 0 || b == 0) return {std::log(static_cast<double>(b) + 1.0), true};
  return {-std::log(static_cast<double>(a) / static_cast<double>(b)), false};
}

double sampen(std::span<const double> x, std::size_t m, double r_factor) {
  return sampen_detail(x, m, r_factor).value;
}

const std::array<std::string, kFeaturesPerBand>& feature_names() {
  static const std::array<std::string, kFeaturesPerBand> names{
      "peak",          "impulse_factor", "srm",         "clearance_factor", "rms",
      "margin_factor", "energy",         "crest_factor", "peak_to_peak",    "kurtosis",
      "skewness",      "shape_factor",   "index_max",   "index_min",        "autocorr_1",
      "autocorr_2",    "autocorr_3",     "autocorr_4",  "autocorr_5",       "pct_1",
      "pct_2",         "pct_3",          "shannon_entropy", "rate_entropy", "apen",
      "sampen"};
  return names;
}

bool window_features(std::span<const double> x, const BinEdges& edges, const FeatureConfig& fcfg,
                     std::span<double> out) {
  const auto basic = basic_stats(x).to_array();
  std::size_t c = 0;
  for (double v : basic) out[c++] = v;
  for (auto lag : fcfg.autocorr_lags) out[c++] = autocorr(x, lag);
  for (auto lag : fcfg.pct_lags) out[c++] = pct_change(x, lag);
  out[c++] = shannon_entropy(x, edges);
  out[c++] = rate_entropy(x, edges);
  out[c++] = apen(x, fcfg.apen_m, fcfg.apen_r_factor);
  const auto se = sampen_detail(x, fcfg.apen_m, fcfg.apen_r_factor);
  out[c++] = se.value;
  return se.fallback;
}

const BinEdges& EntropyEdges::for_band(const Band& band) const {
  auto it = std::find(bands.begin(), bands.end(), band);
  if (it == bands.end()) fail(ErrorKind::config, "no entropy edges for band " + band.label());
  return edges[static_cast<std::size_t>(it - bands.begin())];
}

std::uint64_t EntropyEdges::fingerprint() const {
  std::uint64_t h = 14695981039346656037ull;
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const double b[2] = {bands[i].lo_hz, bands[i].hi_hz};
    h = io::fingerprint(b, h);
    h = io::fingerprint(edges[i], h);
  }
  return h;
}

EntropyEdges fit_entropy_edges(const BandedSeries& banded, std::span<const std::uint8_t> labels,
                               std::size_t begin, std::size_t end, const FeatureConfig& fcfg) {
  if (labels.size() != banded.duration_s) {
    fail(ErrorKind::validation, "label length does not match series duration");
  }
  end = std::min(end, banded.duration_s);
  EntropyEdges out;
  for (std::size_t b = 0; b < banded.bands.size(); ++b) {
    auto s = banded.series(b);
    std::vector<double> leak;
    for (std::size_t t = begin; t < end; ++t) {
      if (labels[t]) leak.push_back(s[t]);
    }
    if (leak.empty()) fail(ErrorKind::config, "no leak-labeled seconds to fit entropy edges");
    std::sort(leak.begin(), leak.end());
    BinEdges e;
    for (double q : fcfg.entropy_quantiles) e.push_back(stats::quantile_sorted(leak, q));
    out.bands.push_back(banded.bands[b]);
    out.edges.push_back(std::move(e));
  }
  return out;
}

std::vector<std::string> feature_columns(const std::vector<Band>& bands) {
  std::vector<std::string> cols;
  for (const auto& band : bands) {
    for (const auto& f : feature_names()) cols.push_back("band_" + band.label() + "." + f);
  }
  return cols;
}

namespace {

struct FramePlan {
  std::vector<Window> windows;
  std::vector<const BinEdges*> band_edges;
};

FramePlan plan_frame(const BandedSeries& banded, std::span<const std::uint8_t> labels,
                     std::size_t begin, std::size_t end, const WindowConfig& wcfg,
                     const FeatureConfig& fcfg, const EntropyEdges& edges, FeatureFrame& frame) {
  fcfg.validate(wcfg);
  if (labels.size() != banded.duration_s) {
    fail(ErrorKind::validation, "label length does not match series duration");
  }
  if (end > banded.duration_s || begin > end) fail(ErrorKind::bounds, "featurize range out of bounds");
  FramePlan plan;
  plan.windows = frame_windows(end - begin, wcfg);
  for (auto& w : plan.windows) {
    w.start_s += begin;
    w.end_s += begin;
  }
  for (const auto& band : banded.bands) plan.band_edges.push_back(&edges.for_band(band));

  frame.columns = feature_columns(banded.bands);
  frame.values.assign(plan.windows.size() * frame.columns.size(), 0.0);
  frame.labels.resize(plan.windows.size());
  frame.window_start_s.resize(plan.windows.size());
  return plan;
}

// Fills one output row; returns the number of SampEn fallbacks.
std::size_t fill_row(const BandedSeries& banded, std::span<const std::uint8_t> labels,
                     const FeatureConfig& fcfg, const FramePlan& plan, std::size_t i,
                     FeatureFrame& frame) {
  const Window w = plan.windows[i];
  const std::size_t len = w.end_s - w.start_s;
  std::size_t fallbacks = 0;
  double* row = frame.values.data() + i * frame.columns.size();
  for (std::size_t b = 0; b < banded.bands.size(); ++b) {
    auto x = banded.series(b).subspan(w.start_s, len);
    fallbacks += window_features(x, *plan.band_edges[b], fcfg,
                                 {row + b * kFeaturesPerBand, kFeaturesPerBand});
  }
  frame.labels[i] = label_window(labels.subspan(w.start_s, len));
  frame.window_start_s[i] = w.start_s;
  return fallbacks;
}

}  // namespace

FeatureFrame featurize(const BandedSeries& banded, std::span<const std::uint8_t> labels,
                       std::size_t begin, std::size_t end, const WindowConfig& wcfg,
                       const FeatureConfig& fcfg, const EntropyEdges& edges) {
  FeatureFrame frame;
  const FramePlan plan = plan_frame(banded, labels, begin, end, wcfg, fcfg, edges, frame);
  const auto n = static_cast<std::ptrdiff_t>(plan.windows.size());
  std::size_t fallbacks = 0;
#pragma omp parallel for schedule(static) reduction(+ : fallbacks)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    fallbacks += fill_row(banded, labels, fcfg, plan, static_cast<std::size_t>(i), frame);
  }
  frame.sampen_fallbacks = fallbacks;
  return frame;
}

FeatureFrame featurize_serial(const BandedSeries& banded, std::span<const std::uint8_t> labels,
                              std::size_t begin, std::size_t end, const WindowConfig& wcfg,
                              const FeatureConfig& fcfg, const EntropyEdges& edges) {
  FeatureFrame frame;
  const FramePlan plan = plan_frame(banded, labels, begin, end, wcfg, fcfg, edges, frame);
  for (std::size_t i = 0; i < plan.windows.size(); ++i) {
    frame.sampen_fallbacks += fill_row(banded, labels, fcfg, plan, i, frame);
  }
  return frame;
}

FeatureFrame concat(const FeatureFrame& a, const FeatureFrame& b) {
  if (a.columns != b.columns) fail(ErrorKind::validation, "cannot stack frames with different columns");
  FeatureFrame out = a;
  out.values.insert(out.values.end(), b.values.begin(), b.values.end());
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.window_start_s.insert(out.window_start_s.end(), b.window_start_s.begin(),
                            b.window_start_s.end());
  out.sampen_fallbacks += b.sampen_fallbacks;
  return out;
}

std::string format_feature_csv(const FeatureFrame& frame) {
  std::string out;
  for (const auto& c : frame.columns) out += c + ",";
  out += "label,window_start_s\n";
  for (std::size_t i = 0; i < frame.rows(); ++i) {
    for (double v : frame.row(i)) out += io::format_double(v) + ",";
    out += std::to_string(frame.labels[i]) + "," + std::to_string(frame.window_start_s[i]) + "\n";
  }
  return out;
}

}  // namespace leakdet
