#include "svytrans/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "svytrans/errors.hpp"
#include "svytrans/stats.hpp"

namespace svytrans {

SurveyStrata survey_weight_strata(const CombinedDataset& d, int n_strata) {
  const std::size_t n = d.n_survey();
  if (n_strata < 1 || static_cast<std::size_t>(n_strata) > n) {
    throw ConfigError("number of strata must lie in [1, n_survey]");
  }
  std::vector<std::size_t> order = d.survey_rows();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return d.weight(a) < d.weight(b); });

  std::vector<double> cuts;
  for (int h = 1; h < n_strata; ++h) {
    const auto rank = static_cast<std::size_t>(
        std::ceil(static_cast<double>(h) * static_cast<double>(n) / n_strata));
    cuts.push_back(d.weight(order[std::max<std::size_t>(rank, 1) - 1]));
  }
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  SurveyStrata s;
  s.members.resize(cuts.size() + 1);
  for (std::size_t i : order) {
    const auto h = static_cast<std::size_t>(
        std::lower_bound(cuts.begin(), cuts.end(), d.weight(i)) - cuts.begin());
    s.members[h].push_back(i);
  }
  std::erase_if(s.members, [](const auto& m) { return m.empty(); });

  for (std::size_t h = 0; h < s.members.size();) {
    if (s.members[h].size() >= 2 || s.members.size() == 1) {
      ++h;
      continue;
    }
    const std::size_t into = h + 1 < s.members.size() ? h + 1 : h - 1;
    s.warnings.push_back("stratum " + std::to_string(h) + " has " +
                         std::to_string(s.members[h].size()) +
                         " survey row(s); merged with a neighbouring stratum");
    auto& dst = s.members[into];
    dst.insert(dst.end(), s.members[h].begin(), s.members[h].end());
    std::sort(dst.begin(), dst.end(),
              [&](std::size_t a, std::size_t b) { return d.weight(a) < d.weight(b) ||
                                                         (d.weight(a) == d.weight(b) && a < b); });
    s.members.erase(s.members.begin() + static_cast<std::ptrdiff_t>(h));
    if (into < h) --h;
  }
  if (s.members.size() == 1 && s.members[0].size() < 2) {
    throw ValidationError("stratified survey resampling needs at least two survey rows");
  }
  return s;
}

SurveyResample resample_survey_stratified(const CombinedDataset& d, const SurveyStrata& strata,
                                          Rng& rng) {
  SurveyResample r;
  r.warnings = strata.warnings;
  std::vector<std::size_t> count;
  for (const auto& members : strata.members) {
    const std::size_t nh = members.size();
    if (nh < 2) throw ValidationError("stratum with fewer than two survey rows");
    count.assign(nh, 0);
    std::uniform_int_distribution<std::size_t> pick(0, nh - 1);
    for (std::size_t k = 0; k + 1 < nh; ++k) ++count[pick(rng)];
    const double factor = static_cast<double>(nh) / static_cast<double>(nh - 1);
    for (std::size_t k = 0; k < nh; ++k) {
      if (count[k] == 0) continue;
      r.rows.push_back(members[k]);
      r.multiplicity.push_back(count[k]);
      r.weights.push_back(d.weight(members[k]) * factor * static_cast<double>(count[k]));
    }
  }
  return r;
}

SurveyResample resample_survey_stratified(const CombinedDataset& d, const BootstrapPlan& plan,
                                          Rng& rng) {
  return resample_survey_stratified(d, survey_weight_strata(d, plan.n_strata), rng);
}

CombinedDataset bootstrap_replicate(const CombinedDataset& d, const SurveyStrata& strata,
                                    std::uint64_t seed, std::uint64_t b) {
  Rng rng = make_rng(seed, b);
  const auto& trial = d.trial_rows();
  std::vector<std::size_t> rows;
  std::vector<double> weights;
  rows.reserve(d.size());
  weights.reserve(d.size());
  std::uniform_int_distribution<std::size_t> pick(0, trial.size() - 1);
  for (std::size_t k = 0; k < trial.size(); ++k) {
    rows.push_back(trial[pick(rng)]);
    weights.push_back(1.0);
  }
  const SurveyResample s = resample_survey_stratified(d, strata, rng);
  rows.insert(rows.end(), s.rows.begin(), s.rows.end());
  weights.insert(weights.end(), s.weights.begin(), s.weights.end());
  return d.select(rows, weights);
}

std::pair<double, double> percentile_interval(std::vector<double> v, double level) {
  if (v.empty()) throw NumericalError("percentile interval of an empty replicate set");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0,1)");
  std::sort(v.begin(), v.end());
  const double alpha = 1.0 - level;
  const double n = static_cast<double>(v.size());
  auto nearest_rank = [&](double q) {
    const auto r = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
    return v[std::clamp<std::size_t>(r, 1, v.size()) - 1];
  };
  return {nearest_rank(alpha / 2.0), nearest_rank(1.0 - alpha / 2.0)};
}

namespace {

std::optional<double> replicate_estimate(const CombinedDataset& d, const SurveyStrata& strata,
                                         const EstimandSpec& spec, const BootstrapPlan& plan,
                                         const PipelineOptions& options, std::uint64_t b) {
  try {
    const CombinedDataset rep = bootstrap_replicate(d, strata, plan.rng_seed, b);
    return run_pipeline(rep, spec, options).estimate.point;
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

BootstrapResult double_bootstrap(const CombinedDataset& d, const EstimandSpec& spec,
                                 const BootstrapPlan& plan, const PipelineOptions& options) {
  if (plan.n_iterations < 2) throw ConfigError("bootstrap needs at least 2 iterations");
  if (spec.estimator == Estimator::Naive) {
    throw ConfigError("double bootstrap applies to transported estimators");
  }
  const SurveyStrata strata = survey_weight_strata(d, plan.n_strata);

  BootstrapResult result;
  result.warnings = strata.warnings;
  result.point = run_pipeline(d, spec, options).estimate.point;

  const auto n = static_cast<std::size_t>(plan.n_iterations);
  std::vector<std::optional<double>> reps(n);
  if (plan.execution == Execution::Serial) {
    for (std::size_t b = 0; b < n; ++b) {
      reps[b] = replicate_estimate(d, strata, spec, plan, options, b);
    }
  } else {
#pragma omp parallel for schedule(dynamic)
    for (std::size_t b = 0; b < n; ++b) {
      reps[b] = replicate_estimate(d, strata, spec, plan, options, b);
    }
  }

  for (const auto& r : reps) {
    if (r) {
      result.replicate_estimates.push_back(*r);
    } else {
      ++result.n_failed;
    }
  }
  if (static_cast<double>(result.n_failed) >
      plan.max_failure_fraction * static_cast<double>(n)) {
    throw NumericalError("double bootstrap unstable: " + std::to_string(result.n_failed) + " of " +
                         std::to_string(n) + " replicates failed");
  }
  if (result.replicate_estimates.size() < 2) {
    throw NumericalError("double bootstrap produced fewer than 2 usable replicates");
  }

  const bool log_scale = spec.effect_scale == EffectScale::OddsRatio;
  std::vector<double> scaled = result.replicate_estimates;
  if (log_scale) {
    for (double& v : scaled) v = std::log(v);
  }
  const double mean = std::accumulate(scaled.begin(), scaled.end(), 0.0) /
                      static_cast<double>(scaled.size());
  double ss = 0.0;
  for (double v : scaled) ss += (v - mean) * (v - mean);
  result.se = std::sqrt(ss / static_cast<double>(scaled.size() - 1));

  if (plan.ci_method == CiMethod::Percentile) {
    std::tie(result.ci_low, result.ci_high) =
        percentile_interval(result.replicate_estimates, plan.level);
  } else {
    const double z = normal_quantile(0.5 + plan.level / 2.0);
    if (log_scale) {
      result.ci_low = std::exp(std::log(result.point) - z * result.se);
      result.ci_high = std::exp(std::log(result.point) + z * result.se);
    } else {
      result.ci_low = result.point - z * result.se;
      result.ci_high = result.point + z * result.se;
    }
  }
  return result;
}

}  // namespace svytrans
