#include "leakdet/spectrogram.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "leakdet/error.hpp"
#include "leakdet/io.hpp"

namespace leakdet {

Spectrogram::Spectrogram(std::size_t n_bins, std::size_t duration_s, std::vector<double> psd,
                         double max_freq_hz, double sample_rate_hz)
    : n_bins_(n_bins),
      duration_s_(duration_s),
      max_freq_hz_(max_freq_hz),
      sample_rate_hz_(sample_rate_hz),
      psd_(std::move(psd)) {
  if (n_bins_ == 0 || duration_s_ == 0) fail(ErrorKind::validation, "spectrogram must be non-empty");
  if (psd_.size() != n_bins_ * duration_s_) {
    fail(ErrorKind::validation, "psd size does not match n_bins x duration_s");
  }
  if (!(max_freq_hz_ > 0.0) || !std::isfinite(max_freq_hz_)) {
    fail(ErrorKind::validation, "max_freq_hz must be positive");
  }
  for (std::size_t i = 0; i < psd_.size(); ++i) {
    double v = psd_[i];
    if (!std::isfinite(v) || v < 0.0) {
      fail(ErrorKind::validation, "psd value at bin " + std::to_string(i / duration_s_) +
                                      ", second " + std::to_string(i % duration_s_) +
                                      " is negative or non-finite");
    }
  }
}

LeakAnnotation::LeakAnnotation(std::vector<LeakInterval> intervals)
    : intervals_(std::move(intervals)) {
  for (std::size_t i = 0; i < intervals_.size(); ++i) {
    const auto& iv = intervals_[i];
    if (iv.start_s > iv.end_s) {
      fail(ErrorKind::validation, "interval start after end: " + std::to_string(iv.start_s) + "," +
                                      std::to_string(iv.end_s));
    }
    if (i > 0 && intervals_[i - 1].end_s >= iv.start_s) {
      fail(ErrorKind::validation, "intervals must be sorted and non-overlapping");
    }
  }
}

std::size_t LeakAnnotation::labeled_seconds() const noexcept {
  std::size_t n = 0;
  for (const auto& iv : intervals_) n += iv.length();
  return n;
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

// Appends the numbers on one line to out; returns the count parsed.
std::size_t parse_row(std::string_view line, bool comma, std::size_t line_no,
                      std::vector<double>& out) {
  std::size_t count = 0;
  const char* p = line.data();
  const char* end = p + line.size();
  while (p < end) {
    while (p < end && is_space(*p)) ++p;
    if (p == end) break;
    if (*p == '+') ++p;
    double v = 0.0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc{}) {
      fail(ErrorKind::format, "line " + std::to_string(line_no) + ": malformed number");
    }
    out.push_back(v);
    ++count;
    p = next;
    while (p < end && is_space(*p)) ++p;
    if (comma && p < end) {
      if (*p != ',') fail(ErrorKind::format, "line " + std::to_string(line_no) + ": expected ','");
      ++p;
      while (p < end && is_space(*p)) ++p;
      if (p == end) fail(ErrorKind::format, "line " + std::to_string(line_no) + ": trailing ','");
    } else if (!comma && p < end && !is_space(*p) && p == next) {
      fail(ErrorKind::format, "line " + std::to_string(line_no) + ": malformed number");
    }
  }
  return count;
}

}  // namespace

Spectrogram parse_spectrogram(std::string_view text, std::optional<std::size_t> expected_bins) {
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::optional<bool> comma;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (io::trim(line).empty()) continue;
    if (!comma) comma = line.find(',') != std::string_view::npos;
    std::size_t n = parse_row(line, *comma, line_no, values);
    if (rows == 0) {
      cols = n;
    } else if (n != cols) {
      fail(ErrorKind::format, "line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(cols) + " columns, found " + std::to_string(n));
    }
    ++rows;
  }
  if (rows == 0 || cols == 0) fail(ErrorKind::format, "empty spectrogram file");
  if (expected_bins && *expected_bins != rows) {
    fail(ErrorKind::format, "expected " + std::to_string(*expected_bins) + " frequency bins, found " +
                                std::to_string(rows));
  }
  return Spectrogram(rows, cols, std::move(values));
}

Spectrogram load_spectrogram(const std::filesystem::path& path,
                             std::optional<std::size_t> expected_bins) {
  return parse_spectrogram(io::read_file(path), expected_bins);
}

std::string format_spectrogram(const Spectrogram& spec) {
  std::string out;
  out.reserve(spec.n_bins() * spec.duration_s() * 12);
  char buf[64];
  for (std::size_t k = 0; k < spec.n_bins(); ++k) {
    auto row = spec.bin_row(k);
    for (std::size_t t = 0; t < row.size(); ++t) {
      if (t) out.push_back(' ');
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), row[t]);
      out.append(buf, end);
    }
    out.push_back('\n');
  }
  return out;
}

void save_spectrogram(const Spectrogram& spec, const std::filesystem::path& path) {
  io::write_atomic(path, format_spectrogram(spec));
}

LeakAnnotation parse_annotation(std::string_view text) {
  std::vector<LeakInterval> intervals;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = io::trim(line);
    if (line.empty()) continue;
    auto fields = io::split_fields(line, ',');
    if (fields.size() != 2) {
      fail(ErrorKind::format, "annotation line " + std::to_string(line_no) + ": expected 'start,end'");
    }
    std::size_t bounds[2];
    for (int i = 0; i < 2; ++i) {
      auto f = io::trim(fields[i]);
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), bounds[i]);
      if (ec != std::errc{} || p != f.data() + f.size()) {
        fail(ErrorKind::format, "annotation line " + std::to_string(line_no) + ": bad integer");
      }
    }
    intervals.push_back({bounds[0], bounds[1]});
  }
  return LeakAnnotation(std::move(intervals));
}

LeakAnnotation load_annotation(const std::filesystem::path& path) {
  return parse_annotation(io::read_file(path));
}

void save_annotation(const LeakAnnotation& ann, const std::filesystem::path& path) {
  std::string out = "# leak intervals, inclusive seconds: start,end\n";
  for (const auto& iv : ann.intervals()) {
    out += std::to_string(iv.start_s) + "," + std::to_string(iv.end_s) + "\n";
  }
  io::write_atomic(path, out);
}

Labels expand_labels(const LeakAnnotation& ann, std::size_t duration_s) {
  Labels labels(duration_s, 0);
  for (const auto& iv : ann.intervals()) {
    if (iv.end_s >= duration_s) {
      fail(ErrorKind::bounds, "leak interval " + std::to_string(iv.start_s) + "," +
                                  std::to_string(iv.end_s) + " exceeds duration " +
                                  std::to_string(duration_s));
    }
    std::fill(labels.begin() + static_cast<std::ptrdiff_t>(iv.start_s),
              labels.begin() + static_cast<std::ptrdiff_t>(iv.end_s + 1), 1);
  }
  return labels;
}

std::vector<LeakInterval> intervals_from_labels(std::span<const std::uint8_t> labels) {
  std::vector<LeakInterval> out;
  std::size_t t = 0;
  while (t < labels.size()) {
    if (!labels[t]) {
      ++t;
      continue;
    }
    std::size_t start = t;
    while (t < labels.size() && labels[t]) ++t;
    out.push_back({start, t - 1});
  }
  return out;
}

}  // namespace leakdet
