#include <algorithm>
#include <array>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "svytrans/errors.hpp"
#include "svytrans/membership_model.hpp"
#include "svytrans/stats.hpp"
#include "svytrans/toy.hpp"

using namespace svytrans;

namespace {

// P(S=2|X)/P(S=1|X) at a covariate vector.
double odds_survey(const MembershipModel& m, std::vector<double> x) {
  const double e = predict_prob(m, x);
  return (1.0 - e) / e;
}

// Weighted log pseudo-likelihood of (b0, b1, b2).
double log_lik(const CombinedDataset& d, bool weighted, const std::array<double, 3>& b) {
  double ll = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double eta = b[0] + b[1] * d.covariate(i, 0) + b[2] * d.covariate(i, 1);
    const double w = d.is_trial(i) || !weighted ? 1.0 : d.weight(i);
    ll -= w * (d.is_trial(i) ? log1pexp(-eta) : log1pexp(eta));
  }
  return ll;
}

// Dense 11^3 grid around the incumbent; the spacing shrinks once the
// incumbent stays put.
std::array<double, 3> grid_maximiser(const CombinedDataset& d, bool weighted) {
  std::array<double, 3> best{0.0, 0.0, 0.0};
  double best_ll = log_lik(d, weighted, best);
  for (double h = 0.5; h > 1e-6; h /= 4.0) {
    std::array<double, 3> centre;
    do {
      centre = best;
      for (int i = -5; i <= 5; ++i)
        for (int j = -5; j <= 5; ++j)
          for (int k = -5; k <= 5; ++k) {
            const std::array<double, 3> b{centre[0] + i * h, centre[1] + j * h, centre[2] + k * h};
            const double ll = log_lik(d, weighted, b);
            if (ll > best_ll) {
              best_ll = ll;
              best = b;
            }
          }
    } while (centre != best);
  }
  return best;
}

}  // namespace

TEST_CASE("saturated toy fits reproduce the cell odds") {
  const CombinedDataset d = toy_dataset();
  const MembershipModel weighted = fit_logistic(d, {"older"}, true);
  CHECK(weighted.convergence.converged);
  CHECK(odds_survey(weighted, {1.0}) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(odds_survey(weighted, {0.0}) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(predict_prob(weighted, std::vector<double>{1.0}) ==
        doctest::Approx(1.0 / 6.0).epsilon(1e-12));

  const MembershipModel plain = fit_logistic(d, {"older"}, false);
  CHECK(odds_survey(plain, {1.0}) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(odds_survey(plain, {0.0}) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(plain.dataset_fingerprint == d.fingerprint());
}

TEST_CASE("covariate-identical samples give zero coefficients") {
  Rng rng(21);
  std::normal_distribution<double> z;
  CombinedDataset::Builder b({"x1", "x2"});
  std::vector<std::array<double, 2>> rows(40);
  for (auto& r : rows) r = {z(rng), z(rng)};
  for (std::size_t i = 0; i < rows.size(); ++i) b.add_trial(rows[i], static_cast<int>(i % 2), 0.0);
  for (const auto& r : rows) b.add_survey(r, 3.0);
  const MembershipModel m = fit_logistic(std::move(b).build(), {"x1", "x2"}, false);
  for (double c : m.coefficients) CHECK(std::abs(c) < 1e-12);
}

TEST_CASE("logistic fit matches a grid-refinement maximiser") {
  Rng rng(60);
  const CombinedDataset d = testing::random_dataset(rng, 25, 35, 2);
  for (bool weighted : {false, true}) {
    const MembershipModel m = fit_logistic(d, {"x1", "x2"}, weighted);
    const auto oracle = grid_maximiser(d, weighted);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(std::abs(m.coefficients[k] - oracle[k]) < 5e-4);
    }
  }
}

TEST_CASE("score is zero at the returned coefficients") {
  Rng rng(8);
  const CombinedDataset d = testing::random_dataset(rng, 300, 900, 4);
  const auto cov = testing::names(4);
  const MembershipModel m = fit_logistic(d, cov, true);
  std::array<long double, 5> u{};
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<double> x(d.covariates(i).begin(), d.covariates(i).end());
    const double r = (d.is_trial(i) ? 1.0 : d.weight(i)) *
                     ((d.is_trial(i) ? 1.0 : 0.0) - expit(m.linear_predictor(x)));
    u[0] += r;
    for (std::size_t k = 0; k < 4; ++k) u[k + 1] += r * x[k];
  }
  long double norm = 0;
  for (auto v : u) norm += v * v;
  CHECK(std::sqrt(static_cast<double>(norm)) < 1e-8 * static_cast<double>(d.size()));
}

TEST_CASE("intercept-only fit recovers the weighted prevalence") {
  Rng rng(4);
  const CombinedDataset d = testing::random_dataset(rng, 80, 200, 1);
  const MembershipModel m = fit_logistic(d, {}, true);
  CHECK(m.coefficients.size() == 1);
  const double prevalence =
      static_cast<double>(d.n_trial()) / (d.n_trial() + d.population_size_estimate());
  CHECK(expit(m.coefficients[0]) == doctest::Approx(prevalence).epsilon(1e-12));
}

TEST_CASE("saturated categorical fit matches weighted cell counts") {
  // Three cells coded with two dummies; survey weights vary within cells.
  Rng rng(13);
  std::uniform_real_distribution<double> w(1.0, 9.0);
  CombinedDataset::Builder b({"c=b", "c=c"});
  const std::array<std::array<double, 2>, 3> cells{{{0, 0}, {1, 0}, {0, 1}}};
  const std::array<int, 3> n_trial{20, 35, 12};
  const std::array<int, 3> n_survey{70, 40, 90};
  std::array<double, 3> survey_total{};
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < n_trial[c]; ++i) b.add_trial(cells[c], i % 2, 0.0);
    for (int i = 0; i < n_survey[c]; ++i) {
      const double v = w(rng);
      survey_total[c] += v;
      b.add_survey(cells[c], v);
    }
  }
  const CombinedDataset d = std::move(b).build();
  const MembershipModel m = fit_logistic(d, {"c=b", "c=c"}, true);
  for (int c = 0; c < 3; ++c) {
    const double counted = survey_total[c] / n_trial[c];
    CHECK(odds_survey(m, {cells[c][0], cells[c][1]}) == doctest::Approx(counted).epsilon(1e-12));
  }
}

TEST_CASE("fit errors") {
  SUBCASE("rank deficiency names the collinear column") {
    Rng rng(2);
    std::normal_distribution<double> z;
    CombinedDataset::Builder b({"x1", "x2"});
    for (int i = 0; i < 30; ++i) {
      const double v = z(rng);
      const double row[] = {v, 2.0 * v};
      if (i < 10) b.add_trial(row, i % 2, 0.0);
      else b.add_survey(row, 2.0);
    }
    CHECK_THROWS_WITH_AS(fit_logistic(std::move(b).build(), {"x1", "x2"}, false),
                         doctest::Contains("collinear columns: x"), RankDeficiencyError);
  }
  SUBCASE("separation names the covariate") {
    CombinedDataset::Builder b({"x", "z"});
    for (int i = 0; i < 10; ++i) {
      const double t[] = {static_cast<double>(i), std::sin(i)};
      const double s[] = {20.0 + i, std::cos(i)};
      b.add_trial(t, i % 2, 0.0);
      b.add_survey(s, 1.0);
    }
    const CombinedDataset d = std::move(b).build();
    try {
      fit_logistic(d, {"z", "x"}, false);
      FAIL("expected separation");
    } catch (const SeparationError& e) {
      CHECK(e.covariate() == "x");
    }
  }
  SUBCASE("non-convergence reports the gradient norm") {
    Rng rng(5);
    const CombinedDataset d = testing::random_dataset(rng, 50, 150, 2);
    IrlsOptions opt;
    opt.max_iterations = 1;
    try {
      fit_logistic(d, {"x1", "x2"}, true, opt);
      FAIL("expected non-convergence");
    } catch (const ConvergenceError& e) {
      CHECK(e.gradient_norm() > 0.0);
      CHECK(std::string(e.what()).find("gradient norm") != std::string::npos);
    }
  }
  SUBCASE("empty survey") {
    CombinedDataset::Builder b({"x"});
    const double x[] = {0.0};
    b.add_trial(x, 0, 0.0).add_trial(x, 1, 0.0);
    CHECK_THROWS_AS(fit_logistic(std::move(b).build(), {"x"}, false), ValidationError);
  }
}

TEST_CASE("predict_prob contract") {
  MembershipModel m;
  m.covariate_subset = {"x"};
  m.coefficients = {0.0, 0.0};
  CHECK(predict_prob(m, std::vector<double>{3.7}) == 0.5);
  m.coefficients = {50.0, 0.0};
  const double hi = predict_prob(m, std::vector<double>{0.0});
  CHECK(hi == 1.0 - kProbabilityClip);
  CHECK(hi < 1.0);
  m.coefficients = {-50.0, 0.0};
  CHECK(predict_prob(m, std::vector<double>{0.0}) == kProbabilityClip);
  CHECK_THROWS_AS(predict_prob(m, std::vector<double>{0.0, 1.0}), Error);
}

TEST_CASE("model JSON and hash") {
  const MembershipModel m = fit_logistic(toy_dataset(), {"older"}, true);
  const auto j = m.to_json();
  CHECK(j["learner"] == "logistic");
  CHECK(j["coefficients"].size() == 2);
  CHECK(m.hash() == fit_logistic(toy_dataset(), {"older"}, true).hash());
  CHECK(m.hash() != fit_logistic(toy_dataset(), {"older"}, false).hash());
}

TEST_CASE("GBM on the toy data converges to the saturated odds") {
  GbmParams p;
  p.depth = 1;
  const MembershipModel m = fit_gbm(toy_dataset(), {"older"}, true, p);
  CHECK(odds_survey(m, {1.0}) == doctest::Approx(5.0).epsilon(0.01));
  CHECK(odds_survey(m, {0.0}) == doctest::Approx(10.0).epsilon(0.01));
  CHECK(m.warnings.empty());
}

TEST_CASE("GBM with no trees predicts the weighted base rate") {
  Rng rng(17);
  const CombinedDataset d = testing::random_dataset(rng, 60, 140, 2);
  GbmParams p;
  p.n_trees = 0;
  const MembershipModel m = fit_gbm(d, {"x1", "x2"}, true, p);
  const double rate = static_cast<double>(d.n_trial()) / (d.n_trial() + d.population_size_estimate());
  for (double e : predict_prob(m, d)) CHECK(e == doctest::Approx(rate).epsilon(1e-12));
  p.shrinkage = 0.0;
  CHECK_THROWS_AS(fit_gbm(d, {"x1"}, true, p), ConfigError);
}

TEST_CASE("GBM training deviance is non-increasing") {
  Rng rng(23);
  const CombinedDataset d = testing::random_dataset(rng, 200, 600, 3);
  GbmParams p;
  p.n_trees = 200;
  for (bool weighted : {false, true}) {
    const MembershipModel m = fit_gbm(d, testing::names(3), weighted, p);
    REQUIRE(m.training_deviance.size() == 201);
    for (std::size_t t = 1; t < m.training_deviance.size(); ++t) {
      CHECK(m.training_deviance[t] <= m.training_deviance[t - 1]);
    }
    std::vector<double> eta;
    for (std::size_t i = 0; i < d.size(); ++i) {
      std::vector<double> x(d.covariates(i).begin(), d.covariates(i).end());
      eta.push_back(m.linear_predictor(x));
    }
    CHECK(membership_deviance(d, eta, weighted) ==
          doctest::Approx(m.training_deviance.back()).epsilon(1e-9));
  }
}

TEST_CASE("GBM on pure noise does not beat the intercept-only model out of sample") {
  Rng rng(31);
  const CombinedDataset train = testing::random_dataset(rng, 500, 1500, 2, false, 0.0);
  const CombinedDataset test = testing::random_dataset(rng, 500, 1500, 2, false, 0.0);
  GbmParams p;
  p.n_trees = 300;
  const MembershipModel m = fit_gbm(train, {"x1", "x2"}, false, p);
  const double base = static_cast<double>(train.n_trial()) / train.size();
  // Per-row deviance difference, gbm minus intercept-only.
  std::vector<double> diff;
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::vector<double> x(test.covariates(i).begin(), test.covariates(i).end());
    const double e = predict_prob(m, x);
    const double y = test.is_trial(i) ? 1.0 : 0.0;
    auto dev = [&](double q) { return -2.0 * (y * std::log(q) + (1 - y) * std::log(1 - q)); };
    diff.push_back(dev(e) - dev(base));
  }
  const std::vector<double> ones(diff.size(), 1.0);
  const auto mom = weighted_moments(diff, ones);
  const double mc_se = std::sqrt(mom.variance / static_cast<double>(diff.size()));
  CHECK(mom.mean > -2.0 * mc_se);
}

TEST_CASE("GBM flags probability clipping on separable data") {
  CombinedDataset::Builder b({"x"});
  for (int i = 0; i < 40; ++i) {
    const double t[] = {static_cast<double>(i)};
    const double s[] = {100.0 + i};
    b.add_trial(t, i % 2, 0.0);
    b.add_survey(s, 1.0);
  }
  GbmParams p;
  p.depth = 1;
  const MembershipModel m = fit_gbm(std::move(b).build(), {"x"}, false, p);
  REQUIRE_FALSE(m.warnings.empty());
  CHECK(m.warnings[0].find("clipping") != std::string::npos);
  CHECK(m.to_json()["warnings"].size() == 1);
}

TEST_CASE("fit_membership dispatches on the learner") {
  const CombinedDataset d = toy_dataset();
  CHECK(fit_membership(d, Learner::Logistic, {"older"}, true).learner == Learner::Logistic);
  GbmParams p;
  p.n_trees = 5;
  CHECK(fit_membership(d, Learner::Gbm, {"older"}, true, p).trees.size() == 5);
}
