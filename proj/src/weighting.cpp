#include "svytrans/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "svytrans/errors.hpp"
#include "svytrans/stats.hpp"

namespace svytrans {

std::string_view to_string(WeightVariant variant) {
  switch (variant) {
    case WeightVariant::Gamma: return "gamma";
    case WeightVariant::DeltaTwoStage: return "delta_two_stage";
    case WeightVariant::DeltaDirect: return "delta_direct";
  }
  return "gamma";
}

double WeightVector::ess() const { return kish_ess(values); }

Estimator WeightVector::estimator() const {
  return variant == WeightVariant::Gamma ? Estimator::Transport : Estimator::SurveyWeighted;
}

namespace {

void check_arms(const WeightVector& w, const CombinedDataset& d) {
  bool treated = false, control = false;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (!std::isfinite(w.values[k]) || w.values[k] < 0.0) {
      throw NumericalError("transport weight for row " + std::to_string(w.trial_rows[k]) +
                           " is negative or not finite");
    }
    if (w.values[k] > 0.0) (d.treatment(w.trial_rows[k]) == 1 ? treated : control) = true;
  }
  if (!treated || !control) {
    throw NumericalError("transport weights give no positive mass to one treatment arm");
  }
}

WeightVector inverse_odds(const MembershipModel& model, const CombinedDataset& dataset,
                          WeightVariant variant) {
  if (model.dataset_fingerprint != dataset.fingerprint()) {
    throw Error("membership model was not fitted on this dataset");
  }
  const auto cols = dataset.covariate_indices(model.covariate_subset);
  WeightVector w;
  w.variant = variant;
  w.model_hash = model.hash();
  w.dataset_fingerprint = model.dataset_fingerprint;
  w.trial_rows = dataset.trial_rows();
  w.values.reserve(w.trial_rows.size());
  std::vector<double> x(cols.size());
  for (std::size_t i : w.trial_rows) {
    for (std::size_t k = 0; k < cols.size(); ++k) x[k] = dataset.covariate(i, cols[k]);
    const double e = predict_prob(model, x);
    w.values.push_back((1.0 - e) / e);
  }
  check_arms(w, dataset);
  return w;
}

}  // namespace

WeightVector gamma_weights(const MembershipModel& model, const CombinedDataset& dataset) {
  if (model.weighted_fit) {
    throw Error("gamma weights need a membership model fitted without survey weights");
  }
  return inverse_odds(model, dataset, WeightVariant::Gamma);
}

WeightVector delta_weights_two_stage(const MembershipModel& model,
                                     const CombinedDataset& dataset) {
  if (!model.weighted_fit) {
    throw Error("two-stage delta weights need a membership model fitted with survey weights");
  }
  return inverse_odds(model, dataset, WeightVariant::DeltaTwoStage);
}

WeightVector delta_weights_direct(const WeightVector& gamma,
                                  std::span<const double> inverse_survey_prob) {
  if (gamma.variant != WeightVariant::Gamma) {
    throw Error("direct delta weights are built from gamma weights");
  }
  if (inverse_survey_prob.size() != gamma.size()) {
    throw Error("missing survey-weight value for " +
                std::to_string(gamma.size() > inverse_survey_prob.size()
                                   ? gamma.size() - inverse_survey_prob.size()
                                   : 0) +
                " trial unit(s)");
  }
  WeightVector w = gamma;
  w.variant = WeightVariant::DeltaDirect;
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double s = inverse_survey_prob[k];
    if (!std::isfinite(s) || s <= 0.0) {
      throw Error("missing survey-weight value for trial row " +
                  std::to_string(w.trial_rows[k]));
    }
    w.values[k] *= s;
  }
  return w;
}

WeightVector cap_weights(const WeightVector& w, double percentile) {
  if (!(percentile > 0.0 && percentile <= 100.0)) {
    throw ConfigError("cap percentile must lie in (0, 100]");
  }
  if (w.values.empty()) return w;
  std::vector<double> sorted = w.values;
  std::sort(sorted.begin(), sorted.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(percentile / 100.0 * static_cast<double>(sorted.size())));
  const double cap = sorted[std::max<std::size_t>(rank, 1) - 1];
  WeightVector out = w;
  for (double& v : out.values) v = std::min(v, cap);
  out.cap_percentile = percentile;
  return out;
}

WeightVector scaled(const WeightVector& w, double c) {
  if (!(c > 0.0)) throw Error("weight scale must be positive");
  WeightVector out = w;
  for (double& v : out.values) v *= c;
  return out;
}

WeightSummary weight_summary(const WeightVector& w, std::size_t top_k) {
  WeightSummary s;
  if (w.values.empty()) return s;
  const auto [lo, hi] = std::minmax_element(w.values.begin(), w.values.end());
  s.min = *lo;
  s.max = *hi;
  const std::vector<double> ones(w.size(), 1.0);
  const auto m = weighted_moments(w.values, ones);
  s.cv = m.mean > 0 ? std::sqrt(m.variance) / m.mean : 0.0;
  s.ess = w.ess();
  std::vector<std::size_t> order(w.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return w.values[a] > w.values[b]; });
  for (std::size_t k = 0; k < std::min(top_k, order.size()); ++k) {
    s.top_rows.push_back(w.trial_rows[order[k]]);
    s.top_values.push_back(w.values[order[k]]);
  }
  return s;
}

}  // namespace svytrans
