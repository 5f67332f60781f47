#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "leakdet/pipeline.hpp"
#include "leakdet/synth.hpp"

namespace leakdet {

// Batch configuration shared by every command. Loaded from JSON; unknown
// keys are rejected. Precedence: command-line flags, then LEAKDET_* env
// variables, then the file, then these defaults.
struct RunConfig {
  std::uint64_t seed = 1;
  int workers = 0;  // 0 = OpenMP default
  std::filesystem::path out = "out";

  std::optional<synth::Preset> preset;
  double leak_snr_db = synth::kDefaultLeakSnrDb;
  std::optional<synth::SynthConfig> custom_synth;

  std::optional<std::filesystem::path> spectrogram;
  std::optional<std::filesystem::path> annotation;
  std::optional<std::size_t> expected_bins;

  PipelineOptions pipeline;
  ParamGrid grid;
  std::vector<BandCombo> explicit_candidates;
};

RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);

// LEAKDET_SEED, LEAKDET_WORKERS, LEAKDET_OUT.
void apply_env_overrides(RunConfig& cfg);

// Selected parameters written by tune and consumed by train.
struct SelectedParams {
  HyperParams hp;
  BandCombo combo;
};

std::string format_params(const SelectedParams& p);
SelectedParams parse_params(std::string_view json_text);

}  // namespace leakdet
