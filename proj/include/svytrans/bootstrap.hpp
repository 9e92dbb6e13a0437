#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "svytrans/core_data.hpp"
#include "svytrans/pipeline.hpp"
#include "svytrans/rng.hpp"

namespace svytrans {

enum class CiMethod { Percentile, NormalApprox };

struct BootstrapPlan {
  int n_iterations = 1000;
  /// Survey strata are quantile groups of the survey weight.
  int n_strata = 10;
  std::uint64_t rng_seed = 0;
  CiMethod ci_method = CiMethod::Percentile;
  double level = 0.95;
  /// Failing replicates are dropped; beyond this fraction the run fails.
  double max_failure_fraction = 0.2;
  Execution execution = Execution::Parallel;
};

struct BootstrapResult {
  /// Full-data estimate.
  double point = 0.0;
  /// Successful replicates in iteration order.
  std::vector<double> replicate_estimates;
  /// Standard deviation of the replicates (log scale for odds ratios).
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n_failed = 0;
  std::vector<std::string> warnings;
};

/// Survey rows grouped into weight-quantile strata.
struct SurveyStrata {
  /// Dataset row indices per stratum, strata in increasing weight order.
  std::vector<std::vector<std::size_t>> members;
  std::vector<std::string> warnings;
};

/// Cut points are nearest-rank quantiles of the survey weights, so tied
/// weights always share a stratum and empty quantile groups disappear.
/// Strata with fewer than two rows are merged into a neighbour (warning).
SurveyStrata survey_weight_strata(const CombinedDataset& dataset, int n_strata);

/// One stratified with-replacement draw of the survey: m_h = n_h - 1 draws
/// in stratum h; a row drawn m times appears once with weight
/// d * n_h / (n_h - 1) * m.
struct SurveyResample {
  std::vector<std::size_t> rows;
  std::vector<double> weights;
  std::vector<std::size_t> multiplicity;
  std::vector<std::string> warnings;
};

SurveyResample resample_survey_stratified(const CombinedDataset& dataset,
                                          const SurveyStrata& strata, Rng& rng);
SurveyResample resample_survey_stratified(const CombinedDataset& dataset,
                                          const BootstrapPlan& plan, Rng& rng);

/// Replicate b (0-based) of the double bootstrap: the trial resampled with
/// replacement at its own size followed by a stratified survey resample,
/// drawn from substream b of `seed`.
CombinedDataset bootstrap_replicate(const CombinedDataset& dataset, const SurveyStrata& strata,
                                    std::uint64_t seed, std::uint64_t b);

/// Refits the whole pipeline on every replicate.
BootstrapResult double_bootstrap(const CombinedDataset& dataset, const EstimandSpec& spec,
                                 const BootstrapPlan& plan,
                                 const PipelineOptions& options = {});

/// Nearest-rank percentile interval of `values` at `level`.
std::pair<double, double> percentile_interval(std::vector<double> values, double level);

}  // namespace svytrans
