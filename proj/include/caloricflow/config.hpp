/// @file config.hpp
/// @brief Experiment configuration: JSON schema, defaults, dotted overrides and validation.
///
/// A configuration is a JSON object; every key is optional and unknown keys are rejected.
/// See configs/schema.json for the full layout.
#pragma once

#include "caloricflow/caloric_gauge.hpp"
#include "caloricflow/synthetic.hpp"
#include "caloricflow/wave_map.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace caloricflow::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

enum class Experiment { HeatFlow, Gauge, EnergySpace, WaveMap, Verify, Converge };

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& name);

struct GridSpec {
  int n = 64;
  double L = 4.0;
  double R_support = 1.5;  ///< support radius of compact recipes and radius of local diagnostics
};

struct WaveSpec {
  double duration = 1.0;
  wave::WaveConfig evolution;
};

struct EnergySpaceSpec {
  bool symmetries = true;       ///< run the translation, time-reversal and dilation invariance checks
  double pair_amplitude = 0.8;  ///< the companion datum uses the same recipe with this amplitude factor
  std::array<int, 2> translation{3, -5};
};

struct ConvergeSpec {
  std::string check = "laplacian";
  std::vector<int> resolutions{32, 64, 128};
};

/// Flow run to s = 256 so that the tail criterion is met on the default grid.
heat::HeatFlowConfig default_flow();
/// Moving generic bump: generic_moving with velocity amplitude 1/2.
synth::Recipe default_recipe();

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  int m = 2;
  GridSpec grid;
  heat::HeatFlowConfig flow = default_flow();
  gauge::GaugeConfig gauge;             ///< gauge.flow is always overwritten by `flow`
  synth::Recipe data = default_recipe();  ///< data.m and data.radius are ignored, see recipe()
  WaveSpec wave;
  EnergySpaceSpec energyspace;
  ConvergeSpec converge;
  Experiment experiment = Experiment::Verify;
  std::string output_dir = "caloricflow_out";
  std::uint64_t seed = 1;

  Grid2D make_grid() const;
  gauge::GaugeConfig gauge_config() const;
  /// The data recipe with m and radius taken from the top level and grid.R_support.
  synth::Recipe recipe() const;
  /// Throws ConfigError on the first violated constraint.
  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

/// Sets the value at a dotted path. The text is parsed as JSON when possible and kept as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& dotted_path, const std::string& text);

/// Reads the file, applies `key=value` overrides in order, parses and validates.
ExperimentConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides = {});

/// Names accepted by the converge experiment.
const std::vector<std::string>& convergence_checks();

}  // namespace caloricflow::cli
