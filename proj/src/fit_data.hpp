#pragma once

#include <string>
#include <vector>

#include "svytrans/core_data.hpp"

namespace svytrans::detail {

/// Column-major view of the membership-model inputs for one covariate subset.
struct FitData {
  std::size_t n = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  std::vector<double> y;  // 1 = trial
  std::vector<double> w;  // observation weight
};

FitData make_fit_data(const CombinedDataset& dataset,
                      const std::vector<std::string>& covariate_subset,
                      bool use_survey_weights);

/// Throws SeparationError when a single covariate splits trial from survey
/// (ranges disjoint or touching at one point).
void check_single_covariate_separation(const FitData& data);

double bernoulli_deviance(double y, double w, double eta);

}  // namespace svytrans::detail
