#pragma once

#include <string>

#include "svytrans/core_data.hpp"
#include "json.hpp"

namespace svytrans {

/// The two-stratum worked example: a trial of 100 older and 50 younger
/// units, a survey of 200 older (weight 5/2) and 300 younger (weight 5/3)
/// units, and stratum effects 2 (older) and 4 (younger).
///
/// Trial outcomes average exactly 2 and 4 in the treated arm of each
/// stratum and 0 in the control arm; half of each stratum is treated.
/// The single covariate "older" is a 0/1 indicator.
CombinedDataset toy_dataset();

/// Writes trial.csv, survey.csv and schema.json for the toy dataset.
void write_toy_csv(const std::string& directory);

struct ToyResult {
  double naive = 0.0;
  double transport = 0.0;
  double survey_weighted = 0.0;
  double gamma_older = 0.0;
  double gamma_younger = 0.0;
  double delta_older = 0.0;
  double delta_younger = 0.0;
  double true_pate = 0.0;
};

/// Runs the full pipeline (saturated logistic fits) on toy_dataset().
ToyResult run_toy();

/// The stratum table, the weight arithmetic and the three estimates.
std::string toy_report_text(const ToyResult& r);
nlohmann::ordered_json toy_report_json(const ToyResult& r);

/// Throws NumericalError when a computed value is more than `tolerance`
/// from 8/3, 3.2, 3, 2, 6, 5 or 10.
void check_toy_golden(const ToyResult& r, double tolerance = 1e-10);

}  // namespace svytrans
