#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "svytrans/core_data.hpp"
#include "json.hpp"

namespace svytrans {

/// Fitted probabilities are clipped to [kProbabilityClip, 1 - kProbabilityClip]
/// so inverse-odds weights stay finite.
inline constexpr double kProbabilityClip = 1e-6;

struct IrlsOptions {
  int max_iterations = 100;
  /// Converged when the largest absolute weighted score component is below
  /// this value.
  double score_tolerance = 1e-10;
};

struct GbmParams {
  int n_trees = 1000;
  int depth = 2;
  double shrinkage = 0.05;
  /// Minimum sum of observation weights in each child of a split.
  double min_child_weight = 10.0;
  /// Keep only the prefix of the ensemble that minimises the mean ASMD
  /// between the transport-weighted trial and the (weighted) survey.
  bool stop_on_balance = false;
};

struct TreeNode {
  /// -1 marks a leaf.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  /// Leaf contribution to the log-odds, shrinkage already applied.
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  /// `x` is indexed by position within the model's covariate subset.
  double predict(std::span<const double> x) const;
};

struct Convergence {
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
};

/// P(trial | X, unit observed in trial or survey), fitted on a
/// CombinedDataset with trial rows weighted 1 and survey rows weighted by
/// their survey weight (weighted_fit) or by 1.
struct MembershipModel {
  Learner learner = Learner::Logistic;
  std::vector<std::string> covariate_subset;
  bool weighted_fit = false;
  /// Logistic: intercept first, then one coefficient per subset covariate.
  std::vector<double> coefficients;
  /// Gbm: initial log-odds plus trees.
  double base_score = 0.0;
  double shrinkage = 0.0;
  std::vector<RegressionTree> trees;
  /// Gbm: weighted training deviance after each tree (index 0 = base only).
  std::vector<double> training_deviance;
  Convergence convergence;
  /// Non-fatal fit diagnostics, e.g. training rows whose probability hit
  /// the clip bounds (how separation shows up in a GBM fit).
  std::vector<std::string> warnings;
  /// Fingerprint of the dataset the model was fitted on.
  std::uint64_t dataset_fingerprint = 0;

  /// Unclipped log-odds for a covariate vector ordered like covariate_subset.
  double linear_predictor(std::span<const double> x) const;
  nlohmann::ordered_json to_json() const;
  /// Stable hash of to_json().
  std::string hash() const;
};

MembershipModel fit_logistic(const CombinedDataset& dataset,
                             const std::vector<std::string>& covariate_subset,
                             bool use_survey_weights, const IrlsOptions& options = {});

MembershipModel fit_gbm(const CombinedDataset& dataset,
                        const std::vector<std::string>& covariate_subset,
                        bool use_survey_weights, const GbmParams& params = {});

MembershipModel fit_membership(const CombinedDataset& dataset, Learner learner,
                               const std::vector<std::string>& covariate_subset,
                               bool use_survey_weights, const GbmParams& gbm = {});

/// Clipped P(trial | X). `x` is ordered like model.covariate_subset.
double predict_prob(const MembershipModel& model, std::span<const double> x);

/// predict_prob for every row of `dataset`, picking the model's subset columns.
std::vector<double> predict_prob(const MembershipModel& model,
                                 const CombinedDataset& dataset);

/// Weighted Bernoulli deviance -2 sum w [y log p + (1-y) log(1-p)] of a
/// log-odds vector against trial membership.
double membership_deviance(const CombinedDataset& dataset, std::span<const double> log_odds,
                           bool use_survey_weights);

}  // namespace svytrans
