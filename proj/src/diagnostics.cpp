#include "svytrans/diagnostics.hpp"

#include <cmath>

#include "svytrans/errors.hpp"
#include "svytrans/stats.hpp"
#include "svytrans/weighting.hpp"

namespace svytrans {

std::string_view to_string(AsmdDenominator d) {
  switch (d) {
    case AsmdDenominator::Pooled: return "pooled";
    case AsmdDenominator::TrialSd: return "trial";
    case AsmdDenominator::PopulationSd: return "population";
  }
  return "pooled";
}

AsmdDenominator parse_asmd_denominator(std::string_view text) {
  if (text == "pooled") return AsmdDenominator::Pooled;
  if (text == "trial") return AsmdDenominator::TrialSd;
  if (text == "population") return AsmdDenominator::PopulationSd;
  throw ConfigError("unknown ASMD denominator '" + std::string(text) + "'");
}

double asmd(WeightedSample a, WeightedSample b, AsmdDenominator denominator) {
  const auto ma = weighted_moments(a.values, a.weights);
  const auto mb = weighted_moments(b.values, b.weights);
  if (!(ma.total_weight > 0) || !(mb.total_weight > 0)) {
    throw NumericalError("asmd: both samples need positive total weight");
  }
  double var = 0.0;
  switch (denominator) {
    case AsmdDenominator::Pooled: var = 0.5 * (ma.variance + mb.variance); break;
    case AsmdDenominator::TrialSd: var = ma.variance; break;
    case AsmdDenominator::PopulationSd: var = mb.variance; break;
  }
  const double diff = std::abs(ma.mean - mb.mean);
  const double scale = std::max(std::abs(ma.mean), std::abs(mb.mean));
  if (!(var > 0.0)) {
    if (diff <= 1e-14 * std::max(1.0, scale)) return 0.0;
    throw NumericalError("asmd: zero variance under the chosen denominator with unequal means");
  }
  return diff / std::sqrt(var);
}

BalanceTable balance_table(const CombinedDataset& d, const WeightVector& gamma,
                           const WeightVector& delta, AsmdDenominator denominator) {
  if (gamma.trial_rows != d.trial_rows() || delta.trial_rows != d.trial_rows()) {
    throw Error("balance_table: weights do not align with this dataset's trial rows");
  }
  const std::size_t nt = d.n_trial();
  const std::size_t ns = d.n_survey();
  const std::vector<double> trial_ones(nt, 1.0), survey_ones(ns, 1.0);
  std::vector<double> survey_w(ns);
  for (std::size_t k = 0; k < ns; ++k) survey_w[k] = d.weight(d.survey_rows()[k]);

  BalanceTable table;
  table.denominator = denominator;
  std::vector<double> tx(nt), sx(ns);
  for (std::size_t j = 0; j < d.n_covariates(); ++j) {
    for (std::size_t k = 0; k < nt; ++k) tx[k] = d.covariate(d.trial_rows()[k], j);
    for (std::size_t k = 0; k < ns; ++k) sx[k] = d.covariate(d.survey_rows()[k], j);
    BalanceRow row;
    row.covariate = d.covariate_names()[j];
    row.mean_trial = weighted_moments(tx, trial_ones).mean;
    row.mean_survey_raw = weighted_moments(sx, survey_ones).mean;
    row.mean_population = weighted_moments(sx, survey_w).mean;
    row.asmd_pre = asmd({tx, trial_ones}, {sx, survey_w}, denominator);
    row.asmd_post_gamma = asmd({tx, gamma.values}, {sx, survey_ones}, denominator);
    row.asmd_post_delta = asmd({tx, delta.values}, {sx, survey_w}, denominator);
    table.rows.push_back(std::move(row));
  }
  return table;
}

double selection_asmd(std::span<const double> survey_sample_probs,
                      std::span<const double> population_probs) {
  const std::vector<double> a(survey_sample_probs.size(), 1.0);
  const std::vector<double> b(population_probs.size(), 1.0);
  return asmd({survey_sample_probs, a}, {population_probs, b}, AsmdDenominator::Pooled);
}

}  // namespace svytrans
