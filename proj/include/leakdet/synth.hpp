#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "leakdet/spectrogram.hpp"

namespace leakdet::synth {

struct BandHz {
  double lo;
  double hi;
};

// Band-limited power raise during a leak; ramps over 2 s at onset and offset.
struct LeakComponent {
  LeakInterval interval;
  BandHz band;
  double snr_db;
};

// Manufacturing-phase noise with sinusoidal amplitude modulation.
struct ProcessComponent {
  LeakInterval interval;
  BandHz band;
  double snr_db;
  double modulation_period_s;
};

struct SynthConfig {
  std::size_t duration_s = 600;
  std::size_t n_bins = kDefaultBins;
  double max_freq_hz = kMaxFreqHz;
  std::uint64_t seed = 1;
  double background_level = 1.0;
  // 0 = flat; otherwise PSD falls as (1 kHz / (f + 1 kHz))^tilt.
  double background_tilt = 0.5;
  std::vector<LeakComponent> leak_spec;
  std::vector<ProcessComponent> process_spec;
  double jitter_cv = 0.3;

  void validate() const;
};

enum class Preset { leak_process, leak_noprocess, noleak_noprocess };

Preset parse_preset(std::string_view name);
std::string_view preset_name(Preset p) noexcept;

inline constexpr double kDefaultLeakSnrDb = 10.0;
inline constexpr BandHz kDefaultLeakBand{500.0, 3500.0};

// Durations and leak intervals of the three recorded datasets; Leak_process
// additionally carries manufacturing phases.
SynthConfig table1_preset(Preset which, std::uint64_t seed, double leak_snr_db = kDefaultLeakSnrDb);

struct Dataset {
  Spectrogram spectrogram;
  LeakAnnotation annotation;
};

// Pure function of cfg: identical configs (including seed) give identical matrices.
Dataset generate(const SynthConfig& cfg);

double background_at(const SynthConfig& cfg, double freq_hz);

}  // namespace leakdet::synth
