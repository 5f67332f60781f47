#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leakdet/banding.hpp"
#include "leakdet/features.hpp"
#include "leakdet/metrics.hpp"
#include "leakdet/spectrogram.hpp"
#include "leakdet/svm.hpp"

namespace leakdet {

// Fractions of the time axis, applied before windowing.
struct SplitSpec {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;

  void validate() const;
};

struct TimeRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  std::size_t length() const noexcept { return end - begin; }
  friend bool operator==(const TimeRange&, const TimeRange&) = default;
};

struct Split {
  TimeRange train;
  TimeRange validation;
  TimeRange test;
};

// Contiguous ordered partitions of [0, duration); each must hold one window.
Split split_chronological(std::size_t duration_s, const SplitSpec& spec, std::size_t window_s);

struct ParamGrid {
  std::vector<int> granularities{1000, 2000, 5000};
  std::vector<std::size_t> overlaps{3, 5, 7};
  std::vector<KernelKind> kernels{KernelKind::linear, KernelKind::rbf};
  std::vector<double> costs{1, 10, 100, 1000};
  std::vector<double> gammas{1, 0.1, 0.001, 0.0001};
  std::vector<Metric> metrics{Metric::mean, Metric::median, Metric::iqr};

  // gamma enumerated for rbf only.
  std::size_t effective_size() const noexcept;
  // gamma counted for every kernel.
  std::size_t nominal_size() const noexcept;
};

struct HyperParams {
  WindowConfig window;
  KernelSpec kernel;
  double C = 1.0;
};

struct BandCombo {
  BandingConfig banding;
  BandPair pair;
};

struct PipelineOptions {
  std::size_t window_s = 10;
  FeatureConfig features;
  SplitSpec split;
  std::size_t top_k = 5;
  SolverOptions solver;
};

// One ledger line: a parameter tuple and its metrics on one stage.
struct LedgerRow {
  std::string stage;  // "validation" or "test"
  BandingConfig banding;
  std::optional<BandPair> pair;
  WindowConfig window;
  KernelSpec kernel;
  double C = 1.0;
  std::optional<Metrics> metrics;
  std::string skip_reason;
};

struct GridResult {
  std::vector<LedgerRow> rows;  // grid enumeration order
  std::optional<std::size_t> best;
  std::size_t skipped = 0;

  HyperParams selected() const;
  BandCombo selected_combo() const;
};

// Validation-based selection: F1, then precision, then lower C, then linear
// over rbf; remaining ties broken by the parameter tuple itself.
bool better_validation_row(const LedgerRow& a, const LedgerRow& b);
std::optional<std::size_t> select_best(const std::vector<LedgerRow>& rows);

GridResult grid_search(const Spectrogram& spec, std::span<const std::uint8_t> labels,
                       const ParamGrid& grid, const PipelineOptions& opts);

struct ComboEvaluation {
  BandCombo combo;
  std::optional<Metrics> validation;  // trained on train, scored on validation
  std::optional<Metrics> test;        // trained on train + validation, scored on test
  std::string skip_reason;
};

// Pairs drawn from the top_k training-ranked bands for every granularity/metric.
std::vector<BandCombo> default_band_candidates(const Spectrogram& spec,
                                               std::span<const std::uint8_t> labels,
                                               const ParamGrid& grid, const PipelineOptions& opts);

std::vector<ComboEvaluation> evaluate_band_combos(const Spectrogram& spec,
                                                  std::span<const std::uint8_t> labels,
                                                  const HyperParams& hp,
                                                  const std::vector<BandCombo>& candidates,
                                                  const PipelineOptions& opts);

// Test F1, then validation F1, then test specificity and precision.
std::optional<std::size_t> select_band_combo(const std::vector<ComboEvaluation>& evals);

std::vector<LedgerRow> combo_ledger_rows(const std::vector<ComboEvaluation>& evals,
                                         const HyperParams& hp);

// Trains on the whole dataset; entropy edges and standardizer are refitted on it.
SvmModel train_final(const Spectrogram& spec, std::span<const std::uint8_t> labels,
                     const HyperParams& hp, const BandCombo& combo, const PipelineOptions& opts);

// Applies the model's stored pipeline verbatim; nothing is refitted.
FeatureFrame featurize_for_model(const SvmModel& model, const Spectrogram& spec,
                                 std::span<const std::uint8_t> labels);

struct TransferResult {
  Metrics metrics;
  std::vector<std::size_t> window_start_s;
  std::vector<double> decision;
  std::vector<std::uint8_t> predicted;
  std::vector<std::uint8_t> truth;
};

TransferResult transfer_evaluate(const SvmModel& model, const Spectrogram& spec,
                                 std::span<const std::uint8_t> labels);

std::string format_ledger_csv(const std::vector<LedgerRow>& rows);
std::vector<LedgerRow> parse_ledger_csv(std::string_view text);

// Precision/recall series per evaluated combo, for plotting.
std::string format_pr_report(const std::vector<LedgerRow>& rows);

}  // namespace leakdet
