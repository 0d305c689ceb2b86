#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evobayes/experiment.hpp"

namespace evobayes {

struct DiagnosticsConfig {
  int seeds = 5;               // stability / toy seeds
  int stability_iters = 50;
  double stability_epsilon = 0.01;  // fraction of |M|
  int mc_replicates = 50;
  int tau_seeds = 10;
  double tau_dtau = 0.25;
  int tau_iters = 8;
  int tau_reference = 256;
  double martingale_dtau = 0.01;
  int martingale_tail = 600;
};

struct ToyConfig {
  double start = 1.0;
  double data = 0.0;
  double prior_std = 1.0;  // linear_gaussian
  double noise_std = 1.0;  // linear_gaussian
  int n_E = 10000;         // linear_gaussian
};

struct OutputConfig {
  int pgm_size = 128;
  /// Cross-section end points; when equal, a vertical line through the IR.
  fem::Point section_from{};
  fem::Point section_to{};
  int section_samples = 101;
};

struct AppConfig {
  umot::ExperimentConfig experiment;
  DiagnosticsConfig diagnostics;
  ToyConfig toy;
  OutputConfig output;
};

/// INI text with sections [mesh] [optics] [ultrasound] [phantom] [geometry] [data]
/// [solver] [gn] [prior] [diagnostics] [toy] [output]. `overrides` are
/// "section.key=value" strings applied on top of the file. Unknown keys and bad
/// values throw ConfigError.
AppConfig parse_config(const std::string& ini_text, const std::vector<std::string>& overrides = {});
AppConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// Every recognized key with its current value, one "section.key = value" per line.
std::string describe(const AppConfig& cfg);

}  // namespace evobayes
