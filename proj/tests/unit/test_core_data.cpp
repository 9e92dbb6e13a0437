#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "helpers.hpp"
#include "svytrans/errors.hpp"
#include "svytrans/membership_model.hpp"
#include "svytrans/toy.hpp"

using namespace svytrans;

namespace {

bool has_warning(const ValidationReport& r, const std::string& needle) {
  for (const auto* w : r.warnings()) {
    if (w->message.find(needle) != std::string::npos) return true;
  }
  return false;
}

bool has_failure(const ValidationReport& r, const std::string& needle) {
  for (const auto* f : r.failures()) {
    if (f->message.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("toy dataset counts and population total") {
  const CombinedDataset d = toy_dataset();
  CHECK(d.n_trial() == 150);
  CHECK(d.n_survey() == 500);
  CHECK(d.population_size_estimate() == doctest::Approx(1000.0).epsilon(1e-14));
  const ValidationReport r = validate(d);
  CHECK(r.ok());
  CHECK(r.failures().empty());
  CHECK(r.warnings().empty());
}

TEST_CASE("builder enforces row invariants") {
  CombinedDataset::Builder b({"a", "b"});
  const double ok[] = {1.0, 2.0};
  const double short_row[] = {1.0};
  const double nan_row[] = {1.0, std::nan("")};
  CHECK_THROWS_AS(b.add_trial(short_row, 1, 0.0), ValidationError);
  CHECK_THROWS_AS(b.add_trial(ok, 2, 0.0), ValidationError);
  CHECK_THROWS_AS(b.add_trial(ok, 1, std::nan("")), ValidationError);
  CHECK_THROWS_AS(b.add_trial(nan_row, 1, 0.0), ValidationError);
  CHECK_THROWS_AS(b.add_survey(ok, 0.0), ValidationError);
  CHECK_THROWS_AS(b.add_survey(ok, -1.0), ValidationError);
  CHECK_THROWS_AS(b.add_survey(ok, std::numeric_limits<double>::infinity()), ValidationError);
  CHECK_THROWS_AS(b.add_survey(nan_row, 1.0), ValidationError);
  try {
    b.add_survey(ok, -1.0, std::nullopt, std::nullopt, 7);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    REQUIRE(e.row().has_value());
    CHECK(*e.row() == 7);
    CHECK(std::string(e.what()).find("row 7") != std::string::npos);
  }
}

TEST_CASE("from_records mirrors the builder") {
  std::vector<UnitRecord> recs(3);
  recs[0] = {SampleRole::Trial, {0.5}, 1, 2.0, std::nullopt};
  recs[1] = {SampleRole::Trial, {1.5}, 0, 1.0, std::nullopt};
  recs[2] = {SampleRole::Survey, {1.0}, std::nullopt, std::nullopt, 4.0};
  const CombinedDataset d = CombinedDataset::from_records({"x"}, recs);
  CHECK(d.n_trial() == 2);
  CHECK(d.weight(0) == 1.0);
  CHECK(d.weight(2) == 4.0);
  CHECK(d.treatment(2) == -1);
  CHECK(std::isnan(d.outcome(2)));
  const UnitRecord back = d.record(2);
  CHECK(back.role == SampleRole::Survey);
  CHECK(*back.survey_weight == 4.0);

  recs[0].treatment.reset();
  CHECK_THROWS_AS(CombinedDataset::from_records({"x"}, recs), ValidationError);
  recs[0].treatment = 1;
  recs[2].survey_weight.reset();
  CHECK_THROWS_AS(CombinedDataset::from_records({"x"}, recs), ValidationError);
}

TEST_CASE("validate flags missing arms and empty samples") {
  CombinedDataset::Builder b({"x"});
  const double x0[] = {0.0}, x1[] = {1.0};
  b.add_trial(x0, 1, 1.0).add_trial(x1, 1, 2.0).add_survey(x0, 2.0).add_survey(x1, 2.0);
  const CombinedDataset all_treated = std::move(b).build();
  const ValidationReport r = validate(all_treated);
  CHECK_FALSE(r.ok());
  CHECK(has_failure(r, "no control units"));

  CombinedDataset::Builder b2({"x"});
  b2.add_trial(x0, 1, 1.0).add_trial(x1, 0, 2.0);
  const ValidationReport r2 = validate(std::move(b2).build());
  CHECK(has_failure(r2, "survey has no rows"));

  CombinedDataset::Builder b3({"x"});
  b3.add_trial(x0, 1, 1.0).add_survey(x1, 1.0);
  CHECK(has_failure(validate(std::move(b3).build()), "at least 2 required"));
}

TEST_CASE("covariate constant in the trial but varying in the survey is a separation hazard") {
  // 10 rows: x is 0 throughout the trial and spans [0, 4] in the survey.
  CombinedDataset::Builder b({"x", "z"});
  const double zs[] = {0.3, -1.2, 0.8, 1.1, -0.4};
  for (int i = 0; i < 5; ++i) {
    const double row[] = {0.0, zs[i]};
    b.add_trial(row, i % 2, 1.0 + i);
  }
  for (int i = 0; i < 5; ++i) {
    const double row[] = {static_cast<double>(i), -zs[i]};
    b.add_survey(row, 3.0);
  }
  const CombinedDataset d = std::move(b).build();
  const ValidationReport r = validate(d);
  CHECK(r.ok());
  CHECK(has_warning(r, "separation hazard"));
  CHECK(has_warning(r, "'x' is constant in the trial"));
  CHECK_FALSE(has_warning(r, "'z'"));

  // The membership fit cannot converge on x and reports it by name.
  try {
    fit_logistic(d, {"x", "z"}, false);
    FAIL("expected separation");
  } catch (const SeparationError& e) {
    CHECK(e.covariate() == "x");
  }
}

TEST_CASE("validate flags non-overlapping covariate ranges") {
  CombinedDataset::Builder b({"x"});
  for (int i = 0; i < 4; ++i) {
    const double t[] = {static_cast<double>(i)};
    const double s[] = {10.0 + i};
    b.add_trial(t, i % 2, 0.0);
    b.add_survey(s, 1.0);
  }
  CHECK(has_warning(validate(std::move(b).build()), "non-overlapping ranges"));
}

TEST_CASE("population size estimate is recomputed and accurate on 10^6 rows") {
  using Big = boost::multiprecision::cpp_bin_float_50;
  Rng rng(11);
  std::uniform_real_distribution<double> w(0.5, 3000.0);
  CombinedDataset::Builder b({"x"});
  b.reserve(1000002);
  const double x[] = {0.0};
  b.add_trial(x, 1, 0.0).add_trial(x, 0, 0.0);
  Big exact = 0;
  for (int i = 0; i < 1000000; ++i) {
    const double v = w(rng);
    exact += v;
    b.add_survey(x, v);
  }
  const CombinedDataset d = std::move(b).build();
  const double est = d.population_size_estimate();
  const double target = static_cast<double>(exact);
  CHECK(std::abs(est - target) <= std::nextafter(target, INFINITY) - target);
}

TEST_CASE("select duplicates rows and overrides survey weights") {
  const CombinedDataset d = toy_dataset();
  const std::size_t first_survey = d.survey_rows().front();
  const std::vector<std::size_t> rows{0, 0, first_survey, first_survey};
  const std::vector<double> w{1.0, 1.0, 7.0, 9.0};
  const CombinedDataset s = d.select(rows, w);
  CHECK(s.size() == 4);
  CHECK(s.n_trial() == 2);
  CHECK(s.weight(1) == 1.0);
  CHECK(s.weight(2) == 7.0);
  CHECK(s.weight(3) == 9.0);
  CHECK(s.population_size_estimate() == 16.0);
  CHECK(s.fingerprint() != d.fingerprint());
}

TEST_CASE("fingerprint tracks content") {
  Rng a(5), b(5), c(6);
  const auto d1 = testing::random_dataset(a, 20, 30, 3);
  const auto d2 = testing::random_dataset(b, 20, 30, 3);
  const auto d3 = testing::random_dataset(c, 20, 30, 3);
  CHECK(d1.fingerprint() == d2.fingerprint());
  CHECK(d1.fingerprint() != d3.fingerprint());
}

TEST_CASE("estimand spec validation") {
  const CombinedDataset d = toy_dataset();
  EstimandSpec s;
  s.estimator = Estimator::Transport;
  CHECK_THROWS_AS(validate_spec(s, d), ConfigError);
  s.covariate_subset = {"older"};
  CHECK_NOTHROW(validate_spec(s, d));
  s.covariate_subset = {"age"};
  CHECK_THROWS_AS(validate_spec(s, d), ConfigError);
  s.estimator = Estimator::Naive;
  s.covariate_subset.clear();
  CHECK_NOTHROW(validate_spec(s, d));
}

TEST_CASE("enum tokens round trip") {
  for (auto e : {Estimator::Naive, Estimator::Transport, Estimator::SurveyWeighted}) {
    CHECK(parse_estimator(to_string(e)) == e);
  }
  for (auto l : {Learner::Logistic, Learner::Gbm}) CHECK(parse_learner(to_string(l)) == l);
  for (auto s : {EffectScale::MeanDifference, EffectScale::OddsRatio}) {
    CHECK(parse_effect_scale(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_learner("forest"), ConfigError);
}
