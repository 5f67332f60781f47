#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace leakdet {

struct Confusion {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

// Ratios with a zero denominator are empty (reported as N/A), never 0 or 1.
struct Metrics {
  Confusion counts;
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> specificity;
  std::optional<double> f1;
};

Metrics metrics_from_confusion(const Confusion& c);
Metrics compute_metrics(std::span<const std::uint8_t> y_true, std::span<const std::uint8_t> y_pred);

std::string format_optional(const std::optional<double>& v);

// key=value lines, one per metric, prefixed by the dataset name.
std::string format_metrics_report(const std::string& dataset, const Metrics& m);

}  // namespace leakdet
