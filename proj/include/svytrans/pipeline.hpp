#pragma once

#include <optional>

#include "svytrans/core_data.hpp"
#include "svytrans/estimators.hpp"
#include "svytrans/membership_model.hpp"
#include "svytrans/weighting.hpp"

namespace svytrans {

struct PipelineOptions {
  GbmParams gbm;
  double level = 0.95;
  bool continuity_correction = false;
  /// Cap transport weights at this percentile; off by default.
  std::optional<double> cap_percentile;
};

struct PipelineOutput {
  std::optional<MembershipModel> model;
  std::optional<WeightVector> weights;
  PateEstimate estimate;
};

/// Fit (unweighted for Transport, survey-weighted for SurveyWeighted), build
/// weights and estimate. Naive skips the model.
PipelineOutput run_pipeline(const CombinedDataset& dataset, const EstimandSpec& spec,
                            const PipelineOptions& options = {});

}  // namespace svytrans
