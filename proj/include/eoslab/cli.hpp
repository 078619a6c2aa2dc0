#pragma once

// Experiment runner: config parsing (line-oriented `key = value` under an
// [experiment] section, or a single JSON object), dispatch to the
// computational modules, and CSV/JSON artifact emission.

#include <cstdint>
#include <map>
#include <string>

#include "json.hpp"

namespace eoslab::cli {

inline constexpr const char* kVersion = "0.1.0";

enum class Experiment {
  Oscillate1D,
  Balance2D,
  Neuron,
  NeuronEmpirical,
  MatfacSym,
  MatfacQuasi,
  ConditionCheck,
  OrbitPredict,
  SharpnessTrace,
};

const char* experiment_name(Experiment e);

struct ExperimentConfig {
  Experiment experiment = Experiment::Oscillate1D;
  std::map<std::string, double> params;
  std::map<std::string, std::string> strings;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
};

/// Parses and validates a config. Defaults are filled in, required keys
/// enforced, unknown keys rejected; error messages carry the line or key.
ExperimentConfig parse_config(const std::string& text);

/// Canonical config echo (experiment, every parameter incl. defaults, seed).
nlohmann::json config_echo(const ExperimentConfig& cfg);

struct RunSummary {
  nlohmann::json j;
  bool passed = true;  // every checked flag true and no divergence
};

/// Runs the experiment and writes trajectory.csv, summary.json and
/// config.echo.json into cfg.output_dir. Deterministic given the seed;
/// divergence is recorded in the summary (partial outputs), not thrown.
RunSummary run(const ExperimentConfig& cfg);

/// Shortest round-trip decimal formatting, shared by the CSV writer.
std::string format_double(double x);

}  // namespace eoslab::cli
