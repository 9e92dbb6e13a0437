#include "svytrans/membership_model.hpp"

#include <algorithm>
#include <limits>

#include "fit_data.hpp"
#include "svytrans/errors.hpp"
#include "svytrans/stats.hpp"

namespace svytrans {

namespace detail {

FitData make_fit_data(const CombinedDataset& dataset,
                      const std::vector<std::string>& subset, bool use_survey_weights) {
  if (dataset.n_trial() == 0 || dataset.n_survey() == 0) {
    throw ValidationError("membership model needs at least one trial and one survey row (have " +
                          std::to_string(dataset.n_trial()) + " trial, " +
                          std::to_string(dataset.n_survey()) + " survey)");
  }
  const auto cols = dataset.covariate_indices(subset);
  FitData d;
  d.n = dataset.size();
  d.names = subset;
  d.columns.assign(cols.size(), std::vector<double>(d.n));
  d.y.resize(d.n);
  d.w.resize(d.n);
  for (std::size_t i = 0; i < d.n; ++i) {
    for (std::size_t k = 0; k < cols.size(); ++k) d.columns[k][i] = dataset.covariate(i, cols[k]);
    const bool trial = dataset.is_trial(i);
    d.y[i] = trial ? 1.0 : 0.0;
    d.w[i] = (trial || !use_survey_weights) ? 1.0 : dataset.weight(i);
  }
  return d;
}

void check_single_covariate_separation(const FitData& d) {
  for (std::size_t k = 0; k < d.columns.size(); ++k) {
    double tlo = std::numeric_limits<double>::infinity(), thi = -tlo;
    double slo = tlo, shi = -tlo;
    for (std::size_t i = 0; i < d.n; ++i) {
      const double v = d.columns[k][i];
      if (d.y[i] > 0.5) {
        tlo = std::min(tlo, v);
        thi = std::max(thi, v);
      } else {
        slo = std::min(slo, v);
        shi = std::max(shi, v);
      }
    }
    if (thi <= slo || shi <= tlo) {
      throw SeparationError("perfect separation: covariate '" + d.names[k] +
                                "' separates trial from survey rows",
                            d.names[k]);
    }
  }
}

double bernoulli_deviance(double y, double w, double eta) {
  return 2.0 * w * (y > 0.5 ? log1pexp(-eta) : log1pexp(eta));
}

}  // namespace detail

double RegressionTree::predict(std::span<const double> x) const {
  int k = 0;
  while (nodes[k].feature >= 0) {
    const auto& n = nodes[k];
    k = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[k].value;
}

double MembershipModel::linear_predictor(std::span<const double> x) const {
  if (x.size() != covariate_subset.size()) {
    throw Error("covariate vector has length " + std::to_string(x.size()) +
                ", model expects " + std::to_string(covariate_subset.size()));
  }
  if (learner == Learner::Logistic) {
    double eta = coefficients[0];
    for (std::size_t k = 0; k < x.size(); ++k) eta += coefficients[k + 1] * x[k];
    return eta;
  }
  double eta = base_score;
  for (const auto& t : trees) eta += t.predict(x);
  return eta;
}

nlohmann::ordered_json MembershipModel::to_json() const {
  nlohmann::ordered_json j;
  j["learner"] = to_string(learner);
  j["covariate_subset"] = covariate_subset;
  j["weighted_fit"] = weighted_fit;
  if (learner == Learner::Logistic) {
    j["coefficients"] = coefficients;
  } else {
    j["base_score"] = base_score;
    j["shrinkage"] = shrinkage;
    auto& trees_json = j["trees"] = nlohmann::ordered_json::array();
    for (const auto& t : trees) {
      auto nodes = nlohmann::ordered_json::array();
      for (const auto& n : t.nodes) {
        if (n.feature < 0) {
          nodes.push_back({{"leaf", n.value}});
        } else {
          nodes.push_back({{"feature", covariate_subset[n.feature]},
                           {"threshold", n.threshold},
                           {"left", n.left},
                           {"right", n.right}});
        }
      }
      trees_json.push_back(std::move(nodes));
    }
  }
  j["convergence"] = {{"iterations", convergence.iterations},
                      {"gradient_norm", convergence.gradient_norm},
                      {"converged", convergence.converged}};
  j["warnings"] = warnings;
  j["dataset_fingerprint"] = hex64(dataset_fingerprint);
  return j;
}

std::string MembershipModel::hash() const {
  const std::string s = to_json().dump();
  return hex64(fnv1a64(std::as_bytes(std::span(s))));
}

MembershipModel fit_membership(const CombinedDataset& dataset, Learner learner,
                               const std::vector<std::string>& subset,
                               bool use_survey_weights, const GbmParams& gbm) {
  return learner == Learner::Logistic ? fit_logistic(dataset, subset, use_survey_weights)
                                      : fit_gbm(dataset, subset, use_survey_weights, gbm);
}

double predict_prob(const MembershipModel& model, std::span<const double> x) {
  const double p = expit(model.linear_predictor(x));
  return std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip);
}

std::vector<double> predict_prob(const MembershipModel& model, const CombinedDataset& dataset) {
  const auto cols = dataset.covariate_indices(model.covariate_subset);
  std::vector<double> out(dataset.size());
  std::vector<double> x(cols.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t k = 0; k < cols.size(); ++k) x[k] = dataset.covariate(i, cols[k]);
    out[i] = predict_prob(model, x);
  }
  return out;
}

double membership_deviance(const CombinedDataset& dataset, std::span<const double> log_odds,
                           bool use_survey_weights) {
  if (log_odds.size() != dataset.size()) throw Error("membership_deviance: length mismatch");
  long double dev = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const bool trial = dataset.is_trial(i);
    const double w = (trial || !use_survey_weights) ? 1.0 : dataset.weight(i);
    dev += detail::bernoulli_deviance(trial ? 1.0 : 0.0, w, log_odds[i]);
  }
  return static_cast<double>(dev);
}

}  // namespace svytrans
