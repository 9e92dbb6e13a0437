#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "svytrans/core_data.hpp"
#include "svytrans/membership_model.hpp"

namespace svytrans {

enum class WeightVariant { Gamma, DeltaTwoStage, DeltaDirect };

std::string_view to_string(WeightVariant variant);

/// Per-trial-unit transportability weights. Survey units implicitly carry
/// weight 0 and are not stored.
struct WeightVector {
  /// Aligned with trial_rows.
  std::vector<double> values;
  /// Dataset row index of each value.
  std::vector<std::size_t> trial_rows;
  WeightVariant variant = WeightVariant::Gamma;
  std::string model_hash;
  std::uint64_t dataset_fingerprint = 0;
  /// Percentile used to cap weights, when capping was applied.
  std::optional<double> cap_percentile;

  std::size_t size() const { return values.size(); }
  /// Kish effective sample size.
  double ess() const;
  /// The estimator these weights feed.
  Estimator estimator() const;
};

/// Inverse odds (1 - e)/e from an unweighted membership fit.
WeightVector gamma_weights(const MembershipModel& model, const CombinedDataset& dataset);

/// Inverse odds (1 - e)/e from a survey-weighted membership fit.
WeightVector delta_weights_two_stage(const MembershipModel& model,
                                     const CombinedDataset& dataset);

/// gamma x (1 / P(S=2 | X)): `inverse_survey_prob[k]` is the survey weight
/// that applies to the k-th trial unit of `gamma`. Only available where the
/// survey sampling probability is known for trial units (simulations,
/// saturated categorical designs).
WeightVector delta_weights_direct(const WeightVector& gamma,
                                  std::span<const double> inverse_survey_prob);

/// Caps weights above the given percentile (in (0, 100]) at that
/// percentile's value (nearest rank); recorded in cap_percentile.
WeightVector cap_weights(const WeightVector& w, double percentile);

/// Weights scaled by c > 0, metadata unchanged.
WeightVector scaled(const WeightVector& w, double c);

struct WeightSummary {
  double min = 0.0;
  double max = 0.0;
  /// Coefficient of variation with the population (1/n) standard deviation.
  double cv = 0.0;
  double ess = 0.0;
  /// Dataset rows of the k heaviest units, heaviest first (ties by row).
  std::vector<std::size_t> top_rows;
  std::vector<double> top_values;
};

WeightSummary weight_summary(const WeightVector& w, std::size_t top_k = 5);

}  // namespace svytrans
