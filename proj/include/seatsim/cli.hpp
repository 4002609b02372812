// Command-line front end: one JSON configuration schema driving simulate,
// frf, calibrate, and ablate, plus config scaffolding commands. All
// functions are in-process so the whole surface is testable without
// spawning binaries.

#pragma once

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "seatsim/analysis.hpp"
#include "seatsim/body_model.hpp"
#include "seatsim/calibration.hpp"

namespace seatsim::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit contract: 0 success, 2 configuration error, 3 simulation divergence,
// 4 missing data (trajectory, references, channels).
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDiverged = 3;
inline constexpr int kExitMissingData = 4;

/// Invalid configuration; the message names the offending field.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Required input data is absent or does not cover what the config asks.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AnalysisConfig {
  EstimatorConfig estimator;
  double f_lo = 0.3;  // Hz, reported/fitted band
  double f_hi = 12.0;
  std::string input_channel = "seat.acc.z";
  std::vector<std::string> output_channels;
  std::vector<std::string> channels;  // trajectory columns to log
};

/// Channel weights for the calibration cost, resolved from the segment
/// prefix of the output channel.
struct WeightRule {
  double head = 1.0;
  double trunk = 1.0;
  double pelvis = 0.3;
  double fallback = 1.0;
};

double weight_for_channel(const WeightRule& rule, const std::string& channel);

struct CalibrationSection {
  int budget = 300;
  std::uint64_t seed = 1;
  double divergence_penalty = 1.0e6;
  WeightRule weights;
  std::vector<ParameterSpec> parameters;
};

/// The parsed configuration: one document covering model, seat, excitation,
/// integration, analysis, and calibration.
struct RunConfig {
  std::string anthropometry_file;  // empty = shipped table
  Anthropometry anthro;            // resolved, overrides applied
  ModelTuning tuning;
  SeatConfig seat;
  ExcitationSpec excitation;
  RunSettings settings;
  AnalysisConfig analysis;
  CalibrationSection calibration;
};

/// Schema-validating parse: unknown keys and wrong types raise ConfigError
/// naming the field. Absent keys take the documented defaults.
RunConfig parse_config(const nlohmann::json& doc);

/// The parsed config re-serialized with every default materialized; parsing
/// it again yields the same configuration.
nlohmann::json canonical_config(const RunConfig& config);

/// canonical_config of the all-defaults document.
nlohmann::json default_config();

/// Generated field reference: one row per key of the default document with
/// type, default, and description.
std::string config_reference();

Model model_from_config(const RunConfig& config);

/// Entry point used by main(); writes to the given streams and returns the
/// process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace seatsim::cli
