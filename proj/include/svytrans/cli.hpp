#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "svytrans/bootstrap.hpp"
#include "svytrans/core_data.hpp"
#include "svytrans/diagnostics.hpp"
#include "svytrans/membership_model.hpp"
#include "json.hpp"

namespace svytrans::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitConfig = 3;

std::string version();

/// Maps an exception to the documented exit codes: validation and schema
/// errors 1, numerical failures 2, configuration errors 3.
int exit_code_for(const std::exception& e);

struct EstimateArgs {
  std::filesystem::path trial;
  std::filesystem::path survey;
  std::filesystem::path schema;
  std::filesystem::path out_dir;
  Learner learner = Learner::Logistic;
  EffectScale scale = EffectScale::MeanDifference;
  /// False runs the naive and gamma estimators only and does not require a
  /// survey weight column.
  bool use_survey_weights = true;
  /// Empty means every covariate.
  std::vector<std::string> covariates;
  int bootstrap = 0;
  int strata = 10;
  CiMethod ci_method = CiMethod::Percentile;
  std::uint64_t seed = 20240101;
  double level = 0.95;
  bool continuity_correction = false;
  std::optional<double> cap_percentile;
  AsmdDenominator asmd_denominator = AsmdDenominator::Pooled;
  GbmParams gbm;
};

/// Loads the inputs, runs every requested estimator and writes
/// estimates.json, estimates_long.csv, balance.csv, balance_long.csv,
/// weights.csv, models.json and manifest.json into out_dir. Returns the
/// estimates document.
nlohmann::ordered_json cmd_estimate(const EstimateArgs& args);

struct SimulateArgs {
  std::filesystem::path config;
  std::filesystem::path out;
  Execution execution = Execution::Parallel;
  bool full_scale = false;
  /// Overrides the replication count of every cell.
  std::optional<int> replications;
};

/// Runs the scenario grid and writes the long-format CSV to `out` with
/// `<out>.manifest.json` beside it. Returns the CSV text.
std::string cmd_simulate(const SimulateArgs& args);

/// Worked example; throws NumericalError when a golden value is off.
std::string cmd_toy(bool json);

/// Lower-case hex SHA-256 of a file or of a string.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view data);

/// Seconds since the epoch from SOURCE_DATE_EPOCH when set, else the
/// current time, formatted as UTC ISO 8601.
std::string manifest_timestamp();

nlohmann::ordered_json make_manifest(const std::string& command,
                                     const nlohmann::ordered_json& config,
                                     const std::vector<std::filesystem::path>& inputs,
                                     std::uint64_t seed,
                                     const std::vector<std::filesystem::path>& outputs);

/// Full command-line entry point; errors go to `err` and set the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace svytrans::cli
