#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace svytrans {

/// Which study a unit was observed in. Units sampled into neither study are
/// never observed and have no representation.
enum class SampleRole : std::uint8_t { Trial, Survey };

enum class EffectScale : std::uint8_t { MeanDifference, OddsRatio };
enum class Estimator : std::uint8_t { Naive, Transport, SurveyWeighted };
enum class Learner : std::uint8_t { Logistic, Gbm };

std::string_view to_string(SampleRole role);
std::string_view to_string(EffectScale scale);
std::string_view to_string(Estimator estimator);
std::string_view to_string(Learner learner);

EffectScale parse_effect_scale(std::string_view text);
Estimator parse_estimator(std::string_view text);
Learner parse_learner(std::string_view text);

struct UnitRecord {
  SampleRole role = SampleRole::Trial;
  std::vector<double> covariates;
  std::optional<int> treatment;
  std::optional<double> outcome;
  std::optional<double> survey_weight;
};

/// Concatenated trial and survey samples in columnar form.
///
/// Row-level invariants are enforced on insertion (see Builder). The
/// dataset-level checks (arm sizes, survey size, separation hazards) are
/// reported by validate() so that degenerate draws can still be
/// represented and rejected downstream with a precise message.
///
/// Immutable once built; safe to share read-only across threads.
class CombinedDataset {
 public:
  class Builder {
   public:
    explicit Builder(std::vector<std::string> covariate_names);

    void reserve(std::size_t n);
    /// Row numbers in errors are 1-based insertion positions unless
    /// `row_label` is supplied.
    Builder& add_trial(std::span<const double> x, int treatment, double outcome,
                       std::optional<std::size_t> row_label = std::nullopt);
    Builder& add_survey(std::span<const double> x, double survey_weight,
                        std::optional<int> treatment = std::nullopt,
                        std::optional<double> outcome = std::nullopt,
                        std::optional<std::size_t> row_label = std::nullopt);
    Builder& add(const UnitRecord& record,
                 std::optional<std::size_t> row_label = std::nullopt);

    CombinedDataset build() &&;

   private:
    void check_covariates(std::span<const double> x, std::size_t row) const;

    std::vector<std::string> names_;
    std::vector<SampleRole> roles_;
    std::vector<double> covariates_;
    std::vector<std::int8_t> treatment_;
    std::vector<double> outcome_;
    std::vector<double> weight_;
  };

  static CombinedDataset from_records(std::vector<std::string> covariate_names,
                                      std::span<const UnitRecord> records);

  std::size_t size() const { return roles_.size(); }
  std::size_t n_covariates() const { return names_.size(); }
  std::size_t n_trial() const { return trial_rows_.size(); }
  std::size_t n_survey() const { return survey_rows_.size(); }

  /// Sum of survey weights over survey rows, recomputed on every call.
  double population_size_estimate() const;

  const std::vector<std::string>& covariate_names() const { return names_; }
  /// Column positions of `subset` within covariate_names(); throws
  /// ConfigError on unknown names.
  std::vector<std::size_t> covariate_indices(
      std::span<const std::string> subset) const;

  SampleRole role(std::size_t row) const { return roles_[row]; }
  bool is_trial(std::size_t row) const { return roles_[row] == SampleRole::Trial; }
  std::span<const double> covariates(std::size_t row) const {
    return {covariates_.data() + row * names_.size(), names_.size()};
  }
  double covariate(std::size_t row, std::size_t col) const {
    return covariates_[row * names_.size() + col];
  }
  /// -1 when absent.
  int treatment(std::size_t row) const { return treatment_[row]; }
  /// NaN when absent.
  double outcome(std::size_t row) const { return outcome_[row]; }
  /// Survey weight for survey rows; 1 for trial rows.
  double weight(std::size_t row) const { return weight_[row]; }

  const std::vector<std::size_t>& trial_rows() const { return trial_rows_; }
  const std::vector<std::size_t>& survey_rows() const { return survey_rows_; }

  UnitRecord record(std::size_t row) const;

  /// Rows `rows` of this dataset in the given order (duplicates allowed),
  /// with survey weights replaced by `survey_weights` where provided
  /// (same length as `rows`; ignored for trial rows).
  CombinedDataset select(std::span<const std::size_t> rows,
                         std::span<const double> survey_weights = {}) const;

  /// 64-bit content fingerprint used to tie fitted models and weights to
  /// the data they were built from. Not a cryptographic hash.
  std::uint64_t fingerprint() const;

 private:
  CombinedDataset() = default;
  void index_rows();

  std::vector<std::string> names_;
  std::vector<SampleRole> roles_;
  std::vector<double> covariates_;
  std::vector<std::int8_t> treatment_;
  std::vector<double> outcome_;
  std::vector<double> weight_;
  std::vector<std::size_t> trial_rows_;
  std::vector<std::size_t> survey_rows_;
};

/// What to estimate and how. Validated against a dataset by validate_spec().
struct EstimandSpec {
  EffectScale effect_scale = EffectScale::MeanDifference;
  Estimator estimator = Estimator::SurveyWeighted;
  Learner membership_learner = Learner::Logistic;
  std::vector<std::string> covariate_subset;
};

void validate_spec(const EstimandSpec& spec, const CombinedDataset& dataset);

enum class Severity : std::uint8_t { Error, Warning };

struct ValidationCheck {
  std::string name;
  bool passed = true;
  Severity severity = Severity::Error;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  /// True when no Error-severity check failed (warnings allowed).
  bool ok() const;
  std::vector<const ValidationCheck*> failures() const;
  std::vector<const ValidationCheck*> warnings() const;
};

ValidationReport validate(const CombinedDataset& dataset);

/// FNV-1a over raw bytes; shared by fingerprints and model hashes.
std::uint64_t fnv1a64(std::span<const std::byte> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

}  // namespace svytrans
