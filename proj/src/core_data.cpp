#include "svytrans/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <unordered_map>

#include "svytrans/errors.hpp"

namespace svytrans {

std::string_view to_string(SampleRole role) {
  return role == SampleRole::Trial ? "trial" : "survey";
}

std::string_view to_string(EffectScale scale) {
  return scale == EffectScale::MeanDifference ? "meandiff" : "oddsratio";
}

std::string_view to_string(Estimator estimator) {
  switch (estimator) {
    case Estimator::Naive: return "naive";
    case Estimator::Transport: return "transport";
    case Estimator::SurveyWeighted: return "svy_wtd";
  }
  return "unknown";
}

std::string_view to_string(Learner learner) {
  return learner == Learner::Logistic ? "logistic" : "gbm";
}

EffectScale parse_effect_scale(std::string_view text) {
  if (text == "meandiff") return EffectScale::MeanDifference;
  if (text == "oddsratio") return EffectScale::OddsRatio;
  throw ConfigError("unknown effect scale '" + std::string(text) + "'");
}

Estimator parse_estimator(std::string_view text) {
  if (text == "naive") return Estimator::Naive;
  if (text == "transport") return Estimator::Transport;
  if (text == "svy_wtd") return Estimator::SurveyWeighted;
  throw ConfigError("unknown estimator '" + std::string(text) + "'");
}

Learner parse_learner(std::string_view text) {
  if (text == "logistic") return Learner::Logistic;
  if (text == "gbm") return Learner::Gbm;
  throw ConfigError("unknown learner '" + std::string(text) + "'");
}

// --- Builder ---------------------------------------------------------------

CombinedDataset::Builder::Builder(std::vector<std::string> covariate_names)
    : names_(std::move(covariate_names)) {}

void CombinedDataset::Builder::reserve(std::size_t n) {
  roles_.reserve(n);
  covariates_.reserve(n * names_.size());
  treatment_.reserve(n);
  outcome_.reserve(n);
  weight_.reserve(n);
}

void CombinedDataset::Builder::check_covariates(std::span<const double> x,
                                                std::size_t row) const {
  if (x.size() != names_.size()) {
    throw ValidationError("expected " + std::to_string(names_.size()) +
                              " covariates, got " + std::to_string(x.size()),
                          row);
  }
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!std::isfinite(x[j])) {
      throw ValidationError("covariate '" + names_[j] + "' is missing or not finite",
                            row);
    }
  }
}

CombinedDataset::Builder& CombinedDataset::Builder::add_trial(
    std::span<const double> x, int treatment, double outcome,
    std::optional<std::size_t> row_label) {
  const std::size_t row = row_label.value_or(roles_.size() + 1);
  check_covariates(x, row);
  if (treatment != 0 && treatment != 1) {
    throw ValidationError("treatment must be 0 or 1", row);
  }
  if (!std::isfinite(outcome)) {
    throw ValidationError("trial outcome is missing or not finite", row);
  }
  roles_.push_back(SampleRole::Trial);
  covariates_.insert(covariates_.end(), x.begin(), x.end());
  treatment_.push_back(static_cast<std::int8_t>(treatment));
  outcome_.push_back(outcome);
  weight_.push_back(1.0);
  return *this;
}

CombinedDataset::Builder& CombinedDataset::Builder::add_survey(
    std::span<const double> x, double survey_weight, std::optional<int> treatment,
    std::optional<double> outcome, std::optional<std::size_t> row_label) {
  const std::size_t row = row_label.value_or(roles_.size() + 1);
  check_covariates(x, row);
  if (!std::isfinite(survey_weight) || survey_weight <= 0.0) {
    throw ValidationError("survey weight must be positive and finite", row);
  }
  if (treatment && *treatment != 0 && *treatment != 1) {
    throw ValidationError("treatment must be 0 or 1", row);
  }
  roles_.push_back(SampleRole::Survey);
  covariates_.insert(covariates_.end(), x.begin(), x.end());
  treatment_.push_back(treatment ? static_cast<std::int8_t>(*treatment) : -1);
  outcome_.push_back(outcome.value_or(std::numeric_limits<double>::quiet_NaN()));
  weight_.push_back(survey_weight);
  return *this;
}

CombinedDataset::Builder& CombinedDataset::Builder::add(
    const UnitRecord& r, std::optional<std::size_t> row_label) {
  const std::size_t row = row_label.value_or(roles_.size() + 1);
  if (r.role == SampleRole::Trial) {
    if (!r.treatment) throw ValidationError("trial row without treatment", row);
    if (!r.outcome) throw ValidationError("trial row without outcome", row);
    if (r.survey_weight) {
      throw ValidationError("trial row must not carry a survey weight", row);
    }
    return add_trial(r.covariates, *r.treatment, *r.outcome, row);
  }
  if (!r.survey_weight) throw ValidationError("survey row without survey weight", row);
  return add_survey(r.covariates, *r.survey_weight, r.treatment, r.outcome, row);
}

CombinedDataset CombinedDataset::Builder::build() && {
  CombinedDataset d;
  d.names_ = std::move(names_);
  d.roles_ = std::move(roles_);
  d.covariates_ = std::move(covariates_);
  d.treatment_ = std::move(treatment_);
  d.outcome_ = std::move(outcome_);
  d.weight_ = std::move(weight_);
  d.index_rows();
  return d;
}

// --- CombinedDataset -------------------------------------------------------

CombinedDataset CombinedDataset::from_records(std::vector<std::string> names,
                                              std::span<const UnitRecord> records) {
  Builder b(std::move(names));
  b.reserve(records.size());
  for (const auto& r : records) b.add(r);
  return std::move(b).build();
}

void CombinedDataset::index_rows() {
  trial_rows_.clear();
  survey_rows_.clear();
  for (std::size_t i = 0; i < roles_.size(); ++i) {
    (roles_[i] == SampleRole::Trial ? trial_rows_ : survey_rows_).push_back(i);
  }
}

double CombinedDataset::population_size_estimate() const {
  // Neumaier compensated sum.
  double sum = 0.0;
  double comp = 0.0;
  for (std::size_t i : survey_rows_) {
    const double v = weight_[i];
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

std::vector<std::size_t> CombinedDataset::covariate_indices(
    std::span<const std::string> subset) const {
  std::vector<std::size_t> out;
  out.reserve(subset.size());
  for (const auto& name : subset) {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw ConfigError("unknown covariate '" + name + "'");
    out.push_back(static_cast<std::size_t>(it - names_.begin()));
  }
  return out;
}

UnitRecord CombinedDataset::record(std::size_t row) const {
  UnitRecord r;
  r.role = roles_[row];
  auto x = covariates(row);
  r.covariates.assign(x.begin(), x.end());
  if (treatment_[row] >= 0) r.treatment = treatment_[row];
  if (!std::isnan(outcome_[row])) r.outcome = outcome_[row];
  if (r.role == SampleRole::Survey) r.survey_weight = weight_[row];
  return r;
}

CombinedDataset CombinedDataset::select(std::span<const std::size_t> rows,
                                        std::span<const double> survey_weights) const {
  if (!survey_weights.empty() && survey_weights.size() != rows.size()) {
    throw Error("select: weight override length does not match row list");
  }
  CombinedDataset d;
  d.names_ = names_;
  const std::size_t p = names_.size();
  d.roles_.reserve(rows.size());
  d.covariates_.reserve(rows.size() * p);
  d.treatment_.reserve(rows.size());
  d.outcome_.reserve(rows.size());
  d.weight_.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t i = rows[k];
    d.roles_.push_back(roles_[i]);
    auto x = covariates(i);
    d.covariates_.insert(d.covariates_.end(), x.begin(), x.end());
    d.treatment_.push_back(treatment_[i]);
    d.outcome_.push_back(outcome_[i]);
    double w = weight_[i];
    if (!survey_weights.empty() && roles_[i] == SampleRole::Survey) {
      w = survey_weights[k];
      if (!std::isfinite(w) || w <= 0.0) {
        throw ValidationError("survey weight must be positive and finite", k + 1);
      }
    }
    d.weight_.push_back(w);
  }
  d.index_rows();
  return d;
}

std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

namespace {

// Word-at-a-time mixing; used for large numeric buffers where byte-wise
// FNV would dominate short model fits.
template <class T>
std::uint64_t mix_words(std::span<const T> values, std::uint64_t h) {
  const auto bytes = std::as_bytes(values);
  std::size_t i = 0;
  for (; i + 8 <= bytes.size(); i += 8) {
    std::uint64_t word;
    std::memcpy(&word, bytes.data() + i, 8);
    h ^= word;
    h *= 0x9E3779B97F4A7C15ULL;
    h ^= h >> 29;
  }
  return fnv1a64(bytes.subspan(i), h);
}

}  // namespace

std::uint64_t CombinedDataset::fingerprint() const {
  std::uint64_t h = mix_words(std::span(roles_), 0xcbf29ce484222325ULL);
  h = mix_words(std::span(covariates_), h);
  h = mix_words(std::span(treatment_), h);
  h = mix_words(std::span(outcome_), h);
  h = mix_words(std::span(weight_), h);
  for (const auto& n : names_) h = fnv1a64(std::as_bytes(std::span(n)), h);
  return h;
}

// --- validation ------------------------------------------------------------

void validate_spec(const EstimandSpec& spec, const CombinedDataset& dataset) {
  dataset.covariate_indices(spec.covariate_subset);
  if (spec.estimator != Estimator::Naive && spec.covariate_subset.empty()) {
    throw ConfigError("covariate subset must be nonempty for transported estimators");
  }
}

bool ValidationReport::ok() const {
  return std::none_of(checks.begin(), checks.end(), [](const ValidationCheck& c) {
    return !c.passed && c.severity == Severity::Error;
  });
}

std::vector<const ValidationCheck*> ValidationReport::failures() const {
  std::vector<const ValidationCheck*> out;
  for (const auto& c : checks)
    if (!c.passed && c.severity == Severity::Error) out.push_back(&c);
  return out;
}

std::vector<const ValidationCheck*> ValidationReport::warnings() const {
  std::vector<const ValidationCheck*> out;
  for (const auto& c : checks)
    if (!c.passed && c.severity == Severity::Warning) out.push_back(&c);
  return out;
}

ValidationReport validate(const CombinedDataset& d) {
  ValidationReport report;
  auto add = [&](std::string name, bool passed, std::string message,
                 Severity severity = Severity::Error) {
    report.checks.push_back({std::move(name), passed, severity,
                             passed ? std::string{} : std::move(message)});
  };

  std::size_t treated = 0;
  std::size_t control = 0;
  for (std::size_t i : d.trial_rows()) (d.treatment(i) == 1 ? treated : control)++;

  add("n_trial", d.n_trial() >= 2,
      "trial has " + std::to_string(d.n_trial()) + " rows; at least 2 required");
  add("treated_units", treated >= 1, "no treated units");
  add("control_units", control >= 1, "no control units");
  add("n_survey", d.n_survey() >= 1, "survey has no rows");
  const double pop = d.population_size_estimate();
  add("population_size_estimate", d.n_survey() == 0 || (std::isfinite(pop) && pop > 0),
      "survey weights do not sum to a positive finite total");

  // A covariate that is constant in one sample but varies in the other, or
  // whose ranges only touch, lets the membership model separate the samples.
  for (std::size_t j = 0; j < d.n_covariates(); ++j) {
    if (d.n_trial() == 0 || d.n_survey() == 0) break;
    auto range = [&](const std::vector<std::size_t>& rows) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::size_t i : rows) {
        lo = std::min(lo, d.covariate(i, j));
        hi = std::max(hi, d.covariate(i, j));
      }
      return std::pair{lo, hi};
    };
    auto [tlo, thi] = range(d.trial_rows());
    auto [slo, shi] = range(d.survey_rows());
    const bool t_const = tlo == thi;
    const bool s_const = slo == shi;
    const bool both_const = t_const && s_const;
    const bool disjoint = thi <= slo || shi <= tlo;
    std::string msg;
    if (both_const && tlo == slo) {
      msg = "covariate '" + d.covariate_names()[j] + "' is constant across both samples";
    } else if (t_const != s_const || disjoint) {
      msg = "separation hazard: covariate '" + d.covariate_names()[j] + "' " +
            (t_const && !s_const   ? "is constant in the trial but varies in the survey"
             : s_const && !t_const ? "is constant in the survey but varies in the trial"
                                   : "has non-overlapping ranges across samples");
    }
    add("separation:" + d.covariate_names()[j], msg.empty(), msg, Severity::Warning);
  }
  return report;
}

}  // namespace svytrans
