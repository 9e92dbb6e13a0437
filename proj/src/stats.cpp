#include "svytrans/stats.hpp"

#include <boost/math/distributions/normal.hpp>

#include "svytrans/errors.hpp"

namespace svytrans {

WeightedMoments weighted_moments(std::span<const double> x, std::span<const double> w) {
  if (x.size() != w.size()) throw Error("weighted_moments: length mismatch");
  WeightedMoments m;
  long double sw = 0, swx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    swx += static_cast<long double>(w[i]) * x[i];
  }
  if (sw <= 0) return m;
  // Constant input: exact mean and zero variance rather than rounding noise,
  // which would otherwise turn an ASMD of 0 into 0/0.
  const double* first = nullptr;
  bool constant = true;
  for (std::size_t i = 0; i < x.size() && constant; ++i) {
    if (w[i] == 0.0) continue;
    if (!first) first = &x[i];
    constant = x[i] == *first;
  }
  if (constant && first) {
    m.total_weight = static_cast<double>(sw);
    m.mean = *first;
    return m;
  }
  const long double mean = swx / sw;
  long double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double d = x[i] - mean;
    ss += w[i] * d * d;
  }
  m.total_weight = static_cast<double>(sw);
  m.mean = static_cast<double>(mean);
  m.variance = static_cast<double>(ss / sw);
  return m;
}

double kish_ess(std::span<const double> w) {
  long double s = 0, s2 = 0;
  for (double v : w) {
    s += v;
    s2 += static_cast<long double>(v) * v;
  }
  return s2 > 0 ? static_cast<double>(s * s / s2) : 0.0;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("normal_quantile: p must lie in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

}  // namespace svytrans
