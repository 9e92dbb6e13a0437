#pragma once

#include <cmath>
#include <span>

namespace svytrans {

inline double expit(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double log1pexp(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// Weighted mean and frequency-weights variance sum w (x - mean)^2 / sum w.
struct WeightedMoments {
  double total_weight = 0.0;
  double mean = 0.0;
  double variance = 0.0;
};

WeightedMoments weighted_moments(std::span<const double> x, std::span<const double> w);

/// Kish effective sample size (sum w)^2 / sum w^2.
double kish_ess(std::span<const double> w);

/// Standard normal quantile.
double normal_quantile(double p);

}  // namespace svytrans
