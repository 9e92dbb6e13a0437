#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "svytrans/errors.hpp"
#include "svytrans/estimators.hpp"
#include "svytrans/simulation.hpp"
#include "svytrans/toy.hpp"
#include "svytrans/weighting.hpp"

using namespace svytrans;

namespace {

double toy_older_value(const WeightVector& w, const CombinedDataset& d, bool older) {
  for (std::size_t k = 0; k < w.size(); ++k) {
    if ((d.covariate(w.trial_rows[k], 0) == 1.0) == older) return w.values[k];
  }
  return NAN;
}

// Survey weight of the toy cell each trial unit belongs to.
std::vector<double> toy_cell_weights(const CombinedDataset& d) {
  std::vector<double> out;
  for (std::size_t i : d.trial_rows()) out.push_back(d.covariate(i, 0) == 1.0 ? 2.5 : 5.0 / 3.0);
  return out;
}

MembershipModel fixed_model(const CombinedDataset& d, std::vector<double> coefficients,
                            std::vector<std::string> subset) {
  MembershipModel m;
  m.covariate_subset = std::move(subset);
  m.coefficients = std::move(coefficients);
  m.dataset_fingerprint = d.fingerprint();
  return m;
}

}  // namespace

TEST_CASE("toy gamma, two-stage delta and direct delta") {
  const CombinedDataset d = toy_dataset();
  const WeightVector g = gamma_weights(fit_logistic(d, {"older"}, false), d);
  const WeightVector t = delta_weights_two_stage(fit_logistic(d, {"older"}, true), d);
  const WeightVector x = delta_weights_direct(g, toy_cell_weights(d));
  CHECK(g.variant == WeightVariant::Gamma);
  CHECK(g.estimator() == Estimator::Transport);
  CHECK(t.estimator() == Estimator::SurveyWeighted);
  CHECK(g.size() == 150);
  CHECK(toy_older_value(g, d, true) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(toy_older_value(g, d, false) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(toy_older_value(t, d, true) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(toy_older_value(t, d, false) == doctest::Approx(10.0).epsilon(1e-12));
  for (std::size_t k = 0; k < t.size(); ++k) {
    CHECK(std::abs(t.values[k] - x.values[k]) <= 1e-10);
  }
  CHECK(x.variant == WeightVariant::DeltaDirect);
}

TEST_CASE("e = 0.5 everywhere gives unit weights") {
  Rng rng(1);
  const CombinedDataset d = testing::random_dataset(rng, 10, 10, 1);
  const WeightVector g = gamma_weights(fixed_model(d, {0.0, 0.0}, {"x1"}), d);
  for (double v : g.values) CHECK(v == 1.0);
  CHECK(g.ess() == doctest::Approx(10.0));
}

TEST_CASE("inverse odds against hand arithmetic on 20 units") {
  Rng rng(20);
  const CombinedDataset d = testing::random_dataset(rng, 20, 20, 2);
  const std::vector<double> beta{0.3, -0.8, 0.5};
  const WeightVector g = gamma_weights(fixed_model(d, beta, {"x1", "x2"}), d);
  REQUIRE(g.size() == 20);
  for (std::size_t k = 0; k < 20; ++k) {
    const std::size_t i = g.trial_rows[k];
    const double eta = beta[0] + beta[1] * d.covariate(i, 0) + beta[2] * d.covariate(i, 1);
    const double expected = std::exp(-eta);
    CHECK(std::abs(g.values[k] - expected) <= 1e-12 * expected);
  }
}

TEST_CASE("unit survey weights make delta equal gamma") {
  Rng rng(33);
  const CombinedDataset raw = testing::random_dataset(rng, 50, 120, 3);
  std::vector<std::size_t> rows(raw.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const std::vector<double> ones(rows.size(), 1.0);
  const CombinedDataset d = raw.select(rows, ones);
  const auto cov = testing::names(3);
  const WeightVector g = gamma_weights(fit_logistic(d, cov, false), d);
  const WeightVector t = delta_weights_two_stage(fit_logistic(d, cov, true), d);
  for (std::size_t k = 0; k < g.size(); ++k) {
    CHECK(t.values[k] == doctest::Approx(g.values[k]).epsilon(1e-14));
  }
}

TEST_CASE("saturated categorical: two-stage equals direct") {
  // Three cells, constant survey weight within a cell.
  CombinedDataset::Builder b({"c=b", "c=c"});
  const double cells[3][2] = {{0, 0}, {1, 0}, {0, 1}};
  const int n_trial[] = {30, 14, 22};
  const int n_survey[] = {50, 80, 25};
  const double weight[] = {4.0, 1.5, 12.0};
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < n_trial[c]; ++i) b.add_trial(cells[c], i % 2, 0.0);
    for (int i = 0; i < n_survey[c]; ++i) b.add_survey(cells[c], weight[c]);
  }
  const CombinedDataset d = std::move(b).build();
  const std::vector<std::string> cov{"c=b", "c=c"};
  const WeightVector g = gamma_weights(fit_logistic(d, cov, false), d);
  std::vector<double> inv;
  for (std::size_t i : d.trial_rows()) {
    inv.push_back(d.covariate(i, 0) == 1 ? weight[1] : d.covariate(i, 1) == 1 ? weight[2] : weight[0]);
  }
  const WeightVector direct = delta_weights_direct(g, inv);
  const WeightVector two = delta_weights_two_stage(fit_logistic(d, cov, true), d);
  for (std::size_t k = 0; k < g.size(); ++k) CHECK(std::abs(two.values[k] - direct.values[k]) <= 1e-10);
}

TEST_CASE("inverse-odds decomposition holds with true probabilities on 1000 units") {
  // Known logistic e(X); P(S=2|X) arbitrary and P(S=1|X) implied by e.
  Rng rng(1000);
  const CombinedDataset d = testing::random_dataset(rng, 1000, 10, 1);
  const std::vector<double> beta{-0.4, 0.7};
  const WeightVector g = gamma_weights(fixed_model(d, beta, {"x1"}), d);
  std::uniform_real_distribution<double> u(0.01, 0.3);
  std::vector<double> p2(g.size()), p1(g.size()), inv(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double e = 1.0 / (1.0 + std::exp(-(beta[0] + beta[1] * d.covariate(g.trial_rows[k], 0))));
    p2[k] = u(rng) * 0.5;
    p1[k] = p2[k] * e / (1.0 - e);
    inv[k] = 1.0 / p2[k];
  }
  const WeightVector delta = delta_weights_direct(g, inv);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double target = 1.0 / p1[k];
    CHECK(std::abs(delta.values[k] - target) <= 1e-12 * target);
  }
}

TEST_CASE("fitted two-stage delta tracks 1 / P(S=1|X) on simulated data") {
  ScenarioConfig c;
  c.gamma1 = 0.3;
  c.gamma2 = 0.3;
  const Population pop = generate_population(c, 99, Execution::Serial);
  Rng rng(5);
  const SampleDraw draw = draw_samples(pop, c, rng);
  const CombinedDataset& d = draw.dataset;
  const WeightVector delta =
      delta_weights_two_stage(fit_logistic(d, c.included_covariates(), true), d);
  // Log-ratio of fitted to true weights after normalising both to mean one.
  double sum_fit = 0, sum_true = 0;
  for (std::size_t k = 0; k < delta.size(); ++k) {
    sum_fit += delta.values[k];
    sum_true += 1.0 / pop.p_trial[draw.population_index[delta.trial_rows[k]]];
  }
  std::vector<double> err;
  for (std::size_t k = 0; k < delta.size(); ++k) {
    const double truth = 1.0 / pop.p_trial[draw.population_index[delta.trial_rows[k]]] / sum_true;
    err.push_back(std::abs(std::log(delta.values[k] / sum_fit / truth)));
  }
  std::sort(err.begin(), err.end());
  CHECK(err[err.size() / 2] < 0.15);
}

TEST_CASE("self-weighting survey leaves the Hajek estimate unchanged") {
  const CombinedDataset d = toy_dataset();
  const WeightVector g = gamma_weights(fit_logistic(d, {"older"}, false), d);
  const std::vector<double> constant(g.size(), 40.0);
  const WeightVector x = delta_weights_direct(g, constant);
  CHECK(estimate_weighted(d, x).point == doctest::Approx(estimate_weighted(d, g).point).epsilon(1e-12));
}

TEST_CASE("weight summary") {
  const CombinedDataset d = toy_dataset();
  const WeightVector t = delta_weights_two_stage(fit_logistic(d, {"older"}, true), d);
  const WeightSummary s = weight_summary(t);
  CHECK(s.ess == doctest::Approx(1e6 / 7500.0).epsilon(1e-12));
  CHECK(s.min == doctest::Approx(5.0));
  CHECK(s.max == doctest::Approx(10.0));

  WeightVector u;
  u.values.assign(8, 3.0);
  for (std::size_t k = 0; k < 8; ++k) u.trial_rows.push_back(k);
  CHECK(weight_summary(u).cv == 0.0);
  CHECK(weight_summary(u).ess == doctest::Approx(8.0));
  u.values[5] = 500.0;
  const WeightSummary dom = weight_summary(u, 2);
  REQUIRE(dom.top_rows.size() == 2);
  CHECK(dom.top_rows[0] == 5);
  CHECK(dom.top_values[0] == 500.0);
  CHECK(dom.top_rows[1] == 0);
}

TEST_CASE("capping and scaling") {
  WeightVector w;
  for (int k = 1; k <= 10; ++k) {
    w.values.push_back(k);
    w.trial_rows.push_back(static_cast<std::size_t>(k));
  }
  const WeightVector c = cap_weights(w, 90.0);
  CHECK(c.values.back() == 9.0);
  CHECK(c.values[8] == 9.0);
  CHECK(c.values[0] == 1.0);
  REQUIRE(c.cap_percentile.has_value());
  CHECK(*c.cap_percentile == 90.0);
  CHECK_THROWS_AS(cap_weights(w, 0.0), ConfigError);
  CHECK(scaled(w, 2.0).values[3] == 8.0);
  CHECK_THROWS_AS(scaled(w, 0.0), Error);
}

TEST_CASE("weight construction errors") {
  const CombinedDataset d = toy_dataset();
  const MembershipModel weighted = fit_logistic(d, {"older"}, true);
  const MembershipModel plain = fit_logistic(d, {"older"}, false);
  CHECK_THROWS_AS(gamma_weights(weighted, d), Error);
  CHECK_THROWS_AS(delta_weights_two_stage(plain, d), Error);
  Rng rng(3);
  const CombinedDataset other = testing::random_dataset(rng, 10, 10, 1);
  CHECK_THROWS_WITH_AS(gamma_weights(plain, other), doctest::Contains("not fitted on this dataset"),
                       Error);
  const WeightVector g = gamma_weights(plain, d);
  CHECK_THROWS_AS(delta_weights_direct(g, std::vector<double>(3, 1.0)), Error);
  std::vector<double> bad = toy_cell_weights(d);
  bad[4] = NAN;
  CHECK_THROWS_WITH_AS(delta_weights_direct(g, bad), doctest::Contains("missing survey-weight"),
                       Error);
  CHECK(to_string(WeightVariant::DeltaTwoStage) == "delta_two_stage");
}
