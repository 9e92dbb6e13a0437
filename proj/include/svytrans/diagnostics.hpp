#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "svytrans/core_data.hpp"

namespace svytrans {

struct WeightVector;

/// Denominator of the absolute standardised mean difference. The first
/// sample passed to asmd() is the trial side, the second the comparison
/// (survey or population) side.
enum class AsmdDenominator {
  /// sqrt((var_a + var_b) / 2), each variance under its own weights.
  Pooled,
  TrialSd,
  PopulationSd,
};

std::string_view to_string(AsmdDenominator d);
AsmdDenominator parse_asmd_denominator(std::string_view text);

struct WeightedSample {
  std::span<const double> values;
  std::span<const double> weights;
};

/// |mean_a - mean_b| / denominator, weighted means and frequency-weight
/// variances. A zero denominator yields 0 when the means agree and throws
/// NumericalError otherwise.
double asmd(WeightedSample a, WeightedSample b, AsmdDenominator denominator);

struct BalanceRow {
  std::string covariate;
  double mean_trial = 0.0;
  double mean_survey_raw = 0.0;
  double mean_population = 0.0;
  /// Unweighted trial vs survey-weighted population.
  double asmd_pre = 0.0;
  /// Gamma-weighted trial vs unweighted survey.
  double asmd_post_gamma = 0.0;
  /// Delta-weighted trial vs survey-weighted population.
  double asmd_post_delta = 0.0;
};

struct BalanceTable {
  std::vector<BalanceRow> rows;
  AsmdDenominator denominator = AsmdDenominator::Pooled;
};

BalanceTable balance_table(const CombinedDataset& dataset, const WeightVector& gamma,
                           const WeightVector& delta,
                           AsmdDenominator denominator = AsmdDenominator::Pooled);

/// ASMD of the survey selection probability between the survey sample and
/// the full population (pooled denominator, unit weights). Simulation only.
double selection_asmd(std::span<const double> survey_sample_probs,
                      std::span<const double> population_probs);

}  // namespace svytrans
