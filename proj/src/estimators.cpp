#include "svytrans/estimators.hpp"

#include <cmath>

#include "svytrans/errors.hpp"
#include "svytrans/stats.hpp"

namespace svytrans {

namespace {

struct ArmData {
  std::vector<double> y;
  std::vector<double> w;
};

struct Arms {
  ArmData treated;
  ArmData control;
};

Arms split_arms(const CombinedDataset& d, const WeightVector* w) {
  Arms arms;
  if (w) {
    if (w->dataset_fingerprint != 0 && w->dataset_fingerprint != d.fingerprint()) {
      throw Error("weights were not built from this dataset");
    }
    for (std::size_t k = 0; k < w->size(); ++k) {
      const std::size_t i = w->trial_rows[k];
      if (i >= d.size() || !d.is_trial(i)) throw Error("weight row is not a trial row");
      auto& arm = d.treatment(i) == 1 ? arms.treated : arms.control;
      arm.y.push_back(d.outcome(i));
      arm.w.push_back(w->values[k]);
    }
  } else {
    for (std::size_t i : d.trial_rows()) {
      auto& arm = d.treatment(i) == 1 ? arms.treated : arms.control;
      arm.y.push_back(d.outcome(i));
      arm.w.push_back(1.0);
    }
  }
  return arms;
}

void require_binary(const ArmData& arm) {
  for (double v : arm.y) {
    if (v != 0.0 && v != 1.0) throw ValidationError("odds ratio requires a binary (0/1) outcome");
  }
}

struct ArmFit {
  double mean = 0.0;      // Hajek mean or proportion
  double variance = 0.0;  // linearisation variance of the mean
  double ess = 0.0;
  std::size_t n_positive = 0;
};

ArmFit fit_arm(const ArmData& arm, const char* name) {
  ArmFit f;
  long double sw = 0, swy = 0;
  for (std::size_t i = 0; i < arm.y.size(); ++i) {
    sw += arm.w[i];
    swy += static_cast<long double>(arm.w[i]) * arm.y[i];
    if (arm.w[i] > 0) ++f.n_positive;
  }
  if (!(sw > 0)) throw NumericalError(std::string("weighted arm empty: ") + name);
  f.mean = static_cast<double>(swy / sw);
  long double ss = 0;
  for (std::size_t i = 0; i < arm.y.size(); ++i) {
    const long double r = arm.w[i] * (arm.y[i] - static_cast<long double>(f.mean));
    ss += r * r;
  }
  f.variance = static_cast<double>(ss / (sw * sw));
  f.ess = kish_ess(arm.w);
  return f;
}

/// Proportion with optional continuity correction on the count scale.
double corrected_proportion(const ArmFit& f, bool cc, const char* name) {
  if (f.mean > 0.0 && f.mean < 1.0) return f.mean;
  if (!cc) {
    throw NumericalError(std::string("zero cell in ") + name +
                         " arm; enable the continuity correction");
  }
  const double n = static_cast<double>(f.n_positive);
  return (n * f.mean + 0.5) / (n + 1.0);
}

void finish(PateEstimate& e, double level) {
  const auto [lo, hi] = confidence_interval(e, level);
  e.ci_low = lo;
  e.ci_high = hi;
  e.level = level;
}

}  // namespace

PateEstimate estimate_naive(const CombinedDataset& d, const EstimateOptions& opt) {
  Arms arms = split_arms(d, nullptr);
  if (arms.treated.y.empty()) throw NumericalError("empty arm: no treated trial units");
  if (arms.control.y.empty()) throw NumericalError("empty arm: no control trial units");

  PateEstimate e;
  e.estimator = Estimator::Naive;
  e.effect_scale = opt.scale;
  const ArmFit t = fit_arm(arms.treated, "treated");
  const ArmFit c = fit_arm(arms.control, "control");
  e.arm_means = {t.mean, c.mean};
  e.n_effective = {t.ess, c.ess};

  auto sample_var = [](const ArmData& arm, double mean) {
    if (arm.y.size() < 2) return 0.0;
    long double ss = 0;
    for (double v : arm.y) ss += (v - mean) * (v - mean);
    return static_cast<double>(ss / static_cast<long double>(arm.y.size() - 1));
  };

  if (opt.scale == EffectScale::MeanDifference) {
    e.point = t.mean - c.mean;
    const double nt = static_cast<double>(arms.treated.y.size());
    const double nc = static_cast<double>(arms.control.y.size());
    e.se = std::sqrt(sample_var(arms.treated, t.mean) / nt + sample_var(arms.control, c.mean) / nc);
  } else {
    require_binary(arms.treated);
    require_binary(arms.control);
    const double pt = corrected_proportion(t, opt.continuity_correction, "treated");
    const double pc = corrected_proportion(c, opt.continuity_correction, "control");
    e.arm_means = {pt, pc};
    e.point = (pt / (1 - pt)) / (pc / (1 - pc));
    // Woolf: sum of reciprocal cell counts, counts taken from the (possibly
    // corrected) proportions.
    const double nt = static_cast<double>(arms.treated.y.size()) + (pt != t.mean ? 1.0 : 0.0);
    const double nc = static_cast<double>(arms.control.y.size()) + (pc != c.mean ? 1.0 : 0.0);
    e.se = std::sqrt(1.0 / (nt * pt) + 1.0 / (nt * (1 - pt)) + 1.0 / (nc * pc) +
                     1.0 / (nc * (1 - pc)));
  }
  finish(e, opt.level);
  return e;
}

PateEstimate estimate_weighted(const CombinedDataset& d, const WeightVector& w,
                               const EstimateOptions& opt) {
  Arms arms = split_arms(d, &w);
  PateEstimate e;
  e.estimator = w.estimator();
  e.effect_scale = opt.scale;
  e.weight_variant = w.variant;
  e.model_hash = w.model_hash;
  e.cap_percentile = w.cap_percentile;

  const ArmFit t = fit_arm(arms.treated, "treated");
  const ArmFit c = fit_arm(arms.control, "control");
  e.arm_means = {t.mean, c.mean};
  e.n_effective = {t.ess, c.ess};
  if (opt.scale == EffectScale::MeanDifference) {
    e.point = t.mean - c.mean;
  } else {
    require_binary(arms.treated);
    require_binary(arms.control);
    const double pt = corrected_proportion(t, opt.continuity_correction, "treated");
    const double pc = corrected_proportion(c, opt.continuity_correction, "control");
    e.arm_means = {pt, pc};
    e.point = (pt / (1 - pt)) / (pc / (1 - pc));
  }
  e.se = sandwich_se(d, w, opt.scale, opt.continuity_correction);
  finish(e, opt.level);
  return e;
}

double sandwich_se(const CombinedDataset& d, const WeightVector& w, EffectScale scale,
                   bool continuity_correction) {
  Arms arms = split_arms(d, &w);
  const ArmFit t = fit_arm(arms.treated, "treated");
  const ArmFit c = fit_arm(arms.control, "control");
  if (t.n_positive < 2 || c.n_positive < 2) {
    throw NumericalError("standard error undefined: an arm has a single positive-weight unit");
  }
  if (scale == EffectScale::MeanDifference) return std::sqrt(t.variance + c.variance);

  require_binary(arms.treated);
  require_binary(arms.control);
  const double pt = corrected_proportion(t, continuity_correction, "treated");
  const double pc = corrected_proportion(c, continuity_correction, "control");
  const double gt = pt * (1 - pt);
  const double gc = pc * (1 - pc);
  return std::sqrt(t.variance / (gt * gt) + c.variance / (gc * gc));
}

std::pair<double, double> confidence_interval(const PateEstimate& e, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0,1)");
  const double z = normal_quantile(0.5 + level / 2.0);
  if (e.effect_scale == EffectScale::OddsRatio) {
    const double lp = std::log(e.point);
    return {std::exp(lp - z * e.se), std::exp(lp + z * e.se)};
  }
  return {e.point - z * e.se, e.point + z * e.se};
}

}  // namespace svytrans
