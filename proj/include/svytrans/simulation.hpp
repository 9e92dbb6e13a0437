#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "svytrans/core_data.hpp"
#include "svytrans/membership_model.hpp"
#include "svytrans/rng.hpp"
#include "json.hpp"

namespace svytrans {

inline constexpr int kSimCovariates = 6;
inline constexpr double kTruePate = 2.0;

/// One Monte Carlo scenario.
///
/// Selection models (before scaling):
///   P(S=1) = expit(gamma1 (X1 + X2 + 2 X3 + X5))
///   P(S=2) = expit(gamma2 (2 X1 + X3 + X4 + X5))
/// Outcomes: Y(0) ~ N(0,1), Y(1) ~ N(2 + gamma3 sum X, 1).
/// Each selection probability is divided by its population mean and
/// multiplied by trial_scale / survey_scale, so the expected sample sizes
/// are population_size * scale. Desk defaults keep the ~600 trial and ~4000
/// survey units of the full-size design on a 10^5 population.
struct ScenarioConfig {
  std::size_t population_size = 100000;
  double rho = 0.3;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double gamma3 = 0.0;
  double trial_scale = 0.006;
  double survey_scale = 0.04;
  double treatment_probability = 0.5;
  /// Names among X1..X6 left out of the membership models.
  std::vector<std::string> omitted_covariates;
  std::vector<Learner> learners{Learner::Logistic};
  GbmParams gbm;
  int n_replications = 500;
  std::uint64_t seed = 1;
  /// Double-bootstrap iterations per replication for the transported
  /// estimators; 0 disables the bootstrap.
  int bootstrap_iterations = 0;
  int bootstrap_strata = 10;
  /// Scenario fails when more replications than this fraction fail.
  double max_failure_fraction = 0.1;

  /// Full-size design: 10^6 units, scales 0.0006 and 0.004, 1000 runs.
  static ScenarioConfig full_scale();
  void validate() const;
  std::vector<std::string> included_covariates() const;
};

nlohmann::ordered_json to_json(const ScenarioConfig& c);
/// Missing keys keep the values of `base`.
ScenarioConfig scenario_from_json(const nlohmann::ordered_json& j,
                                  const ScenarioConfig& base = {});

/// Finite population, row-major covariates.
struct Population {
  std::size_t size = 0;
  std::vector<double> x;  // size * 6
  std::vector<double> y0;
  std::vector<double> y1;
  /// Scaled selection probabilities.
  std::vector<double> p_trial;
  std::vector<double> p_survey;

  double covariate(std::size_t i, int j) const { return x[i * kSimCovariates + j]; }
  double pate() const;
};

/// Covariates and outcome noise are drawn in fixed-size chunks, each from
/// its own substream of `seed`, so the population depends only on
/// (config, seed) and not on the execution policy. The same seed with a
/// different rho or gamma reuses the same underlying normal draws.
Population generate_population(const ScenarioConfig& config, std::uint64_t seed,
                               Execution execution = Execution::Parallel);

struct SampleDraw {
  CombinedDataset dataset;
  /// Population index of every dataset row.
  std::vector<std::size_t> population_index;
  /// True scaled P(S=2 | X) for each dataset row.
  std::vector<double> survey_probability;
};

/// S ~ Multinomial(1; p_trial, p_survey, remainder) per unit; trial units
/// get A ~ Bernoulli(treatment_probability) and Y = A Y(1) + (1-A) Y(0);
/// survey units get weight 1 / p_survey.
SampleDraw draw_samples(const Population& population, const ScenarioConfig& config, Rng& rng);

/// One (estimator, learner, variance method) outcome of a replication.
struct CellResult {
  Estimator estimator = Estimator::Naive;
  /// Unset for the naive estimator.
  std::optional<Learner> learner;
  bool bootstrap = false;
  double point = 0.0;
  double se = 0.0;
  bool covered = false;
};

struct ReplicationResult {
  bool failed = false;
  std::string failure;
  std::size_t n_trial = 0;
  std::size_t n_survey = 0;
  double selection_asmd = 0.0;
  std::vector<CellResult> cells;
};

/// Replication `r` of a scenario on a fixed population; uses substream r
/// of config.seed.
ReplicationResult run_replication(const Population& population, const ScenarioConfig& config,
                                  std::uint64_t r);

struct CellSummary {
  Estimator estimator = Estimator::Naive;
  std::optional<Learner> learner;
  bool bootstrap = false;
  int n = 0;
  double mean_point = 0.0;
  /// mean point - 2
  double bias = 0.0;
  double coverage = 0.0;
  double mean_se = 0.0;
  double sd_point = 0.0;
  /// Monte Carlo standard error of the bias, sd_point / sqrt(n).
  double mc_se = 0.0;
};

struct ScenarioSummary {
  ScenarioConfig config;
  std::vector<CellSummary> cells;
  int n_failed = 0;
  double mean_selection_asmd = 0.0;
  double mean_n_trial = 0.0;
  double mean_n_survey = 0.0;
  double population_pate = 0.0;

  /// Throws when the cell is absent.
  const CellSummary& cell(Estimator estimator, std::optional<Learner> learner = std::nullopt,
                          bool bootstrap = false) const;
};

/// Generates the population from config.seed, runs every replication and
/// aggregates in replication order.
ScenarioSummary run_scenario(const ScenarioConfig& config,
                             Execution execution = Execution::Parallel);

/// Aggregation over replication results in index order; failed
/// replications are skipped.
ScenarioSummary summarize(const ScenarioConfig& config,
                          const std::vector<ReplicationResult>& replications,
                          double population_pate);

/// Values per axis; keys are ScenarioConfig field names (rho, gamma1,
/// gamma2, gamma3, population_size, omitted_covariates, learners, ...).
/// Cells are the cartesian product in key order with the last key varying
/// fastest.
struct GridAxes {
  std::vector<std::pair<std::string, std::vector<nlohmann::ordered_json>>> axes;
  /// Reuse the base seed in every cell instead of deriving one per cell.
  bool common_random_numbers = false;
};

std::vector<ScenarioConfig> expand_grid(const ScenarioConfig& base, const GridAxes& axes);
std::vector<ScenarioSummary> scenario_grid(const ScenarioConfig& base, const GridAxes& axes,
                                           Execution execution = Execution::Parallel);

/// Parses {"base": {...}, "axes": {...}, "common_random_numbers": bool}.
std::pair<ScenarioConfig, GridAxes> parse_grid_config(const nlohmann::ordered_json& j);

/// Long format: one row per (scenario, estimator, learner, variance method).
std::string grid_csv(const std::vector<ScenarioSummary>& summaries);

}  // namespace svytrans
