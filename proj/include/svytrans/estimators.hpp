#pragma once

#include <optional>
#include <string>
#include <utility>

#include "svytrans/core_data.hpp"
#include "svytrans/weighting.hpp"

namespace svytrans {

struct ArmPair {
  double treated = 0.0;
  double control = 0.0;
};

/// One PATE estimate. For OddsRatio, `point` is the odds ratio while `se`
/// is on the log-odds-ratio scale; the interval is exponentiated.
struct PateEstimate {
  Estimator estimator = Estimator::Naive;
  EffectScale effect_scale = EffectScale::MeanDifference;
  double point = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double level = 0.95;
  /// Weighted arm means (MeanDifference) or proportions (OddsRatio).
  ArmPair arm_means;
  /// Kish effective sample size per arm.
  ArmPair n_effective;

  std::optional<WeightVariant> weight_variant;
  std::string model_hash;
  std::optional<double> cap_percentile;
};

struct EstimateOptions {
  EffectScale scale = EffectScale::MeanDifference;
  double level = 0.95;
  /// Odds ratios only: add 0.5 to every cell (arm counts rescaled to the
  /// arm's unit count) instead of failing on a zero cell.
  bool continuity_correction = false;
};

/// Unweighted arm contrast in the trial with two-sample standard errors:
/// Welch sqrt(s1^2/n1 + s0^2/n0) for mean differences, Woolf for odds ratios.
PateEstimate estimate_naive(const CombinedDataset& dataset, const EstimateOptions& options = {});

/// Hajek contrast of transport-weighted arm means; the estimator tag follows
/// the weight variant. Standard error from sandwich_se.
PateEstimate estimate_weighted(const CombinedDataset& dataset, const WeightVector& w,
                               const EstimateOptions& options = {});

/// Linearisation variance of the Hajek contrast with weights held fixed:
/// per arm sum_i [w_i (y_i - mu_a)]^2 / (sum_i w_i)^2, summed over arms; for
/// odds ratios transferred to the log scale by the delta method.
double sandwich_se(const CombinedDataset& dataset, const WeightVector& w,
                   EffectScale scale = EffectScale::MeanDifference,
                   bool continuity_correction = false);

/// Wald interval at `level`, on the log scale for odds ratios.
std::pair<double, double> confidence_interval(const PateEstimate& estimate, double level);

}  // namespace svytrans
