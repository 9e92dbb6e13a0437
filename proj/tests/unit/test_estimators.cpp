#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "svytrans/errors.hpp"
#include "svytrans/estimators.hpp"
#include "svytrans/pipeline.hpp"
#include "svytrans/toy.hpp"

using namespace svytrans;
using Rational = boost::multiprecision::cpp_rational;

namespace {

CombinedDataset trial_only(const std::vector<int>& a, const std::vector<double>& y) {
  CombinedDataset::Builder b({"x"});
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x[] = {static_cast<double>(i)};
    b.add_trial(x, a[i], y[i]);
  }
  const double x[] = {0.0};
  b.add_survey(x, 1.0);
  return std::move(b).build();
}

WeightVector manual_weights(const CombinedDataset& d, std::vector<double> values,
                            WeightVariant variant = WeightVariant::Gamma) {
  WeightVector w;
  w.values = std::move(values);
  w.trial_rows = d.trial_rows();
  w.variant = variant;
  w.dataset_fingerprint = d.fingerprint();
  return w;
}

}  // namespace

TEST_CASE("toy golden values") {
  const CombinedDataset d = toy_dataset();
  CHECK(std::abs(estimate_naive(d).point - 8.0 / 3.0) < 1e-10);
  EstimandSpec s;
  s.covariate_subset = {"older"};
  s.estimator = Estimator::Transport;
  const PateEstimate t = run_pipeline(d, s).estimate;
  CHECK(std::abs(t.point - 3.2) < 1e-10);
  CHECK(t.estimator == Estimator::Transport);
  s.estimator = Estimator::SurveyWeighted;
  const PateEstimate w = run_pipeline(d, s).estimate;
  CHECK(std::abs(w.point - 3.0) < 1e-10);
  CHECK(w.weight_variant == WeightVariant::DeltaTwoStage);
  CHECK_FALSE(w.model_hash.empty());
  CHECK_NOTHROW(check_toy_golden(run_toy()));
}

TEST_CASE("constant outcome gives a zero effect and zero SE") {
  const CombinedDataset d = trial_only({1, 0, 1, 0, 1, 0}, std::vector<double>(6, 4.5));
  const PateEstimate e = estimate_naive(d);
  CHECK(e.point == 0.0);
  CHECK(e.se == 0.0);
  CHECK(e.ci_low == 0.0);
  CHECK(e.ci_high == 0.0);
}

TEST_CASE("naive estimate on 10 rows against hand arithmetic") {
  const std::vector<int> a{1, 1, 1, 1, 0, 0, 0, 0, 0, 0};
  const std::vector<double> y{3, 5, 4, 8, 1, 2, 2, 0, 4, 3};
  const PateEstimate e = estimate_naive(trial_only(a, y));
  // Treated mean 5, variance 14/3; control mean 2, variance 10/5 = 2.
  CHECK(e.arm_means.treated == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(e.arm_means.control == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(e.point == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(e.se == doctest::Approx(std::sqrt(14.0 / 3.0 / 4.0 + 2.0 / 6.0)).epsilon(1e-14));
  CHECK(e.n_effective.treated == doctest::Approx(4.0));
}

TEST_CASE("unit weights reduce to the naive point estimate exactly") {
  Rng rng(12);
  const CombinedDataset d = testing::random_dataset(rng, 40, 5, 1);
  const PateEstimate w = estimate_weighted(d, manual_weights(d, std::vector<double>(40, 1.0)));
  const PateEstimate n = estimate_naive(d);
  CHECK(w.point == n.point);
  CHECK(w.arm_means.treated == n.arm_means.treated);
}

TEST_CASE("equal weights: sandwich variance is the unpooled n-denominator variance") {
  Rng rng(14);
  const CombinedDataset d = testing::random_dataset(rng, 30, 5, 1);
  const double se = sandwich_se(d, manual_weights(d, std::vector<double>(30, 7.0)));
  double v = 0;
  for (int arm : {0, 1}) {
    double s = 0, ss = 0, n = 0;
    for (std::size_t i : d.trial_rows())
      if (d.treatment(i) == arm) {
        s += d.outcome(i);
        n += 1;
      }
    const double m = s / n;
    for (std::size_t i : d.trial_rows())
      if (d.treatment(i) == arm) ss += (d.outcome(i) - m) * (d.outcome(i) - m);
    v += ss / (n * n);
  }
  CHECK(se == doctest::Approx(std::sqrt(v)).epsilon(1e-12));
}

TEST_CASE("weighted odds ratio matches a weighted 2x2 table") {
  // Four trial units per arm: weights 1,2,3,4 with outcomes 1,0,1,0 (treated)
  // and 0,1,0,0 (control).
  const std::vector<int> a{1, 1, 1, 1, 0, 0, 0, 0};
  const std::vector<double> y{1, 0, 1, 0, 0, 1, 0, 0};
  const CombinedDataset d = trial_only(a, y);
  const WeightVector w = manual_weights(d, {1, 2, 3, 4, 1, 2, 3, 4});
  EstimateOptions opt;
  opt.scale = EffectScale::OddsRatio;
  const PateEstimate e = estimate_weighted(d, w, opt);
  // Treated: events 1+3=4, non-events 2+4=6. Control: events 2, non-events 8.
  const double expected = (4.0 / 6.0) / (2.0 / 8.0);
  CHECK(e.point == doctest::Approx(expected).epsilon(1e-14));
  CHECK(e.arm_means.treated == doctest::Approx(0.4));
  CHECK(e.arm_means.control == doctest::Approx(0.2));
  CHECK(e.ci_low > 0.0);
  CHECK(e.ci_low < e.point);
  CHECK(e.point < e.ci_high);
}

TEST_CASE("sandwich SE against a termwise exact-rational oracle") {
  Rng rng(1212);
  std::uniform_int_distribution<int> yint(-20, 20);
  std::uniform_int_distribution<int> wint(1, 64);
  std::vector<int> a;
  std::vector<double> y, wv;
  for (int i = 0; i < 12; ++i) {
    a.push_back(i % 3 == 0 ? 0 : 1);
    y.push_back(yint(rng) / 4.0);
    wv.push_back(wint(rng) / 8.0);
  }
  const CombinedDataset d = trial_only(a, y);
  const double se = sandwich_se(d, manual_weights(d, wv));

  Rational var = 0;
  for (int arm : {0, 1}) {
    Rational sw = 0, swy = 0;
    for (int i = 0; i < 12; ++i)
      if (a[i] == arm) {
        sw += Rational(wv[i]);
        swy += Rational(wv[i]) * Rational(y[i]);
      }
    const Rational mu = swy / sw;
    Rational num = 0;
    for (int i = 0; i < 12; ++i)
      if (a[i] == arm) {
        const Rational r = Rational(wv[i]) * (Rational(y[i]) - mu);
        num += r * r;
      }
    var += num / (sw * sw);
  }
  const double oracle = std::sqrt(static_cast<double>(var));
  CHECK(std::abs(se - oracle) <= 1e-14 * oracle);
}

TEST_CASE("Hajek scale invariance") {
  Rng rng(77);
  const CombinedDataset d = testing::random_dataset(rng, 60, 5, 2);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  std::vector<double> v(60);
  for (auto& x : v) x = u(rng);
  const WeightVector w = manual_weights(d, v);
  const PateEstimate e1 = estimate_weighted(d, w);
  const PateEstimate e10 = estimate_weighted(d, scaled(w, 10.0));
  CHECK(std::abs(e1.point - e10.point) <= 1e-12 * std::max(1.0, std::abs(e1.point)));
  CHECK(std::abs(e1.se - e10.se) <= 1e-12 * e1.se);
}

TEST_CASE("confidence intervals") {
  PateEstimate e;
  e.point = 3.0;
  e.se = 0.0;
  auto [lo, hi] = confidence_interval(e, 0.95);
  CHECK(lo == 3.0);
  CHECK(hi == 3.0);
  e.se = 0.5;
  std::tie(lo, hi) = confidence_interval(e, 0.95);
  CHECK(lo == doctest::Approx(3.0 - 1.959963984540054 * 0.5).epsilon(1e-12));
  CHECK(hi == doctest::Approx(3.0 + 1.959963984540054 * 0.5).epsilon(1e-12));
  e.effect_scale = EffectScale::OddsRatio;
  e.point = 1.5;
  e.se = 2.0;
  std::tie(lo, hi) = confidence_interval(e, 0.95);
  CHECK(lo > 0.0);
  CHECK(lo * hi == doctest::Approx(2.25).epsilon(1e-12));
  CHECK_THROWS_AS(confidence_interval(e, 1.0), ConfigError);
  CHECK_THROWS_AS(confidence_interval(e, 0.0), ConfigError);
}

TEST_CASE("estimator errors") {
  const std::vector<int> a{1, 1, 0, 0};
  const CombinedDataset d = trial_only(a, {1, 0, 0, 0});
  SUBCASE("zero weight in an arm") {
    CHECK_THROWS_WITH_AS(estimate_weighted(d, manual_weights(d, {1, 1, 0, 0})),
                         doctest::Contains("weighted arm empty"), NumericalError);
  }
  SUBCASE("single positive-weight unit") {
    CHECK_THROWS_WITH_AS(sandwich_se(d, manual_weights(d, {1, 1, 1, 0})),
                         doctest::Contains("single positive-weight"), NumericalError);
  }
  SUBCASE("zero cell and continuity correction") {
    EstimateOptions opt;
    opt.scale = EffectScale::OddsRatio;
    CHECK_THROWS_WITH_AS(estimate_naive(d, opt), doctest::Contains("zero cell"), NumericalError);
    opt.continuity_correction = true;
    const PateEstimate e = estimate_naive(d, opt);
    // Treated 1/2 stays; control 0 of 2 becomes 0.5/3.
    CHECK(e.arm_means.control == doctest::Approx(0.5 / 3.0));
    CHECK(e.point == doctest::Approx(1.0 / 0.2));
    CHECK(std::isfinite(e.se));
  }
  SUBCASE("non-binary outcome on the odds-ratio scale") {
    EstimateOptions opt;
    opt.scale = EffectScale::OddsRatio;
    CHECK_THROWS_AS(estimate_naive(trial_only(a, {1, 2, 0, 1}), opt), ValidationError);
  }
  SUBCASE("empty arm") {
    CHECK_THROWS_AS(estimate_naive(trial_only({1, 1}, {1, 2})), NumericalError);
  }
  SUBCASE("weights from another dataset") {
    const CombinedDataset other = trial_only(a, {1, 0, 1, 0});
    CHECK_THROWS_AS(estimate_weighted(d, manual_weights(other, {1, 1, 1, 1})), Error);
  }
}

TEST_CASE("Horvitz-Thompson contrast scales by a constant survey probability") {
  // With P(S=2|X) = p constant, gamma = p / P(S=1|X) and the unnormalised
  // weighted contrast over the population recovers p times the effect,
  // while the Hajek version recovers the effect itself.
  const double p = 0.3;
  const std::vector<double> p1{0.05, 0.2, 0.1};
  const std::vector<double> effect{1.0, 3.0, -2.0};
  const std::vector<double> share{0.5, 0.2, 0.3};
  double target = 0, ht = 0, hajek_num = 0, hajek_den = 0;
  for (int k = 0; k < 3; ++k) {
    target += share[k] * effect[k];
    // Expected trial mass in stratum k times gamma.
    const double mass = share[k] * p1[k] * (p / p1[k]);
    ht += mass * effect[k];
    hajek_num += mass * effect[k];
    hajek_den += mass;
  }
  CHECK(ht == doctest::Approx(p * target).epsilon(1e-14));
  CHECK(hajek_num / hajek_den == doctest::Approx(target).epsilon(1e-14));
}
