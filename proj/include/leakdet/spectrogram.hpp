#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace leakdet {

inline constexpr double kSampleRateHz = 131072.0;
inline constexpr double kMaxFreqHz = 65536.0;
inline constexpr std::size_t kDefaultBins = 5000;

// PSD matrix, frequency bins x one-second frames, stored bin-major
// (row k holds every second of bin k). Values are linear power.
class Spectrogram {
 public:
  Spectrogram(std::size_t n_bins, std::size_t duration_s, std::vector<double> psd,
              double max_freq_hz = kMaxFreqHz, double sample_rate_hz = kSampleRateHz);

  std::size_t n_bins() const noexcept { return n_bins_; }
  std::size_t duration_s() const noexcept { return duration_s_; }
  double max_freq_hz() const noexcept { return max_freq_hz_; }
  double sample_rate_hz() const noexcept { return sample_rate_hz_; }
  double bin_width_hz() const noexcept { return max_freq_hz_ / static_cast<double>(n_bins_); }
  double bin_center_hz(std::size_t bin) const noexcept {
    return (static_cast<double>(bin) + 0.5) * bin_width_hz();
  }

  double at(std::size_t bin, std::size_t second) const noexcept {
    return psd_[bin * duration_s_ + second];
  }
  std::span<const double> bin_row(std::size_t bin) const noexcept {
    return {psd_.data() + bin * duration_s_, duration_s_};
  }
  std::span<const double> data() const noexcept { return psd_; }

 private:
  std::size_t n_bins_;
  std::size_t duration_s_;
  double max_freq_hz_;
  double sample_rate_hz_;
  std::vector<double> psd_;
};

struct LeakInterval {
  std::size_t start_s;
  std::size_t end_s;  // inclusive

  std::size_t length() const noexcept { return end_s - start_s + 1; }
  friend bool operator==(const LeakInterval&, const LeakInterval&) = default;
};

// Sorted, non-overlapping, inclusive leak intervals.
class LeakAnnotation {
 public:
  LeakAnnotation() = default;
  explicit LeakAnnotation(std::vector<LeakInterval> intervals);

  const std::vector<LeakInterval>& intervals() const noexcept { return intervals_; }
  bool empty() const noexcept { return intervals_.empty(); }
  std::size_t labeled_seconds() const noexcept;

  friend bool operator==(const LeakAnnotation&, const LeakAnnotation&) = default;

 private:
  std::vector<LeakInterval> intervals_;
};

using Labels = std::vector<std::uint8_t>;

Spectrogram load_spectrogram(const std::filesystem::path& path,
                             std::optional<std::size_t> expected_bins = std::nullopt);
Spectrogram parse_spectrogram(std::string_view text,
                              std::optional<std::size_t> expected_bins = std::nullopt);
void save_spectrogram(const Spectrogram& spec, const std::filesystem::path& path);
std::string format_spectrogram(const Spectrogram& spec);

LeakAnnotation load_annotation(const std::filesystem::path& path);
LeakAnnotation parse_annotation(std::string_view text);
void save_annotation(const LeakAnnotation& ann, const std::filesystem::path& path);

// Per-second 0/1 vector; entry is 1 iff the second lies in an interval.
Labels expand_labels(const LeakAnnotation& ann, std::size_t duration_s);

// Maximal runs of ones, as inclusive intervals.
std::vector<LeakInterval> intervals_from_labels(std::span<const std::uint8_t> labels);

}  // namespace leakdet
