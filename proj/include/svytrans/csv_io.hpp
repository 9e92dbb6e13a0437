#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "svytrans/core_data.hpp"
#include "json.hpp"

namespace svytrans {

enum class ColumnRole { Covariate, Treatment, Outcome, SurveyWeight };

/// Column-role mapping shared by the trial and survey files.
///
/// Schema files are JSON:
///   { "delimiter": ",",
///     "columns": { "age": "covariate", "site": "covariate",
///                  "treat": "treatment", "y": "outcome", "wt": "survey_weight" },
///     "categorical": ["site"] }
/// Covariates keep the order they are listed in. A covariate column whose
/// values are not all numeric is treated as categorical even if it is not
/// listed under "categorical".
struct CsvSchema {
  char delimiter = ',';
  std::vector<std::pair<std::string, ColumnRole>> columns;
  std::vector<std::string> categorical;

  std::vector<std::string> columns_with(ColumnRole role) const;
};

CsvSchema parse_schema(const nlohmann::ordered_json& config);
CsvSchema load_schema(const std::filesystem::path& path);
nlohmann::ordered_json schema_to_json(const CsvSchema& schema);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position or -1.
  long column(std::string_view name) const;
};

/// RFC 4180 style: double-quoted fields, "" escapes, CRLF tolerated.
CsvTable read_csv(const std::filesystem::path& path, char delimiter = ',');
CsvTable parse_csv(std::string_view text, char delimiter = ',');
void write_csv(const std::filesystem::path& path, const CsvTable& table,
               char delimiter = ',');
std::string to_csv_string(const CsvTable& table, char delimiter = ',');

/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);
bool is_missing_token(std::string_view field);

struct LoadOptions {
  /// Survey weights default to 1 when the schema declares no weight column.
  /// Only meaningful for analyses that ignore survey weights.
  bool allow_missing_survey_weights = false;
};

/// Reads and validates the trial and survey files.
///
/// Categorical covariates are one-hot encoded over the union of levels seen
/// in both files, levels in lexicographic order with the first dropped; the
/// encoded columns are named "<column>=<level>". Errors cite 1-based data
/// row numbers (header excluded).
CombinedDataset load_csv(const std::filesystem::path& trial_path,
                         const std::filesystem::path& survey_path,
                         const CsvSchema& schema, const LoadOptions& options = {});

/// {"ok": bool, "checks": [{"name", "passed", "severity", "message"}]}
nlohmann::ordered_json validation_report_json(const ValidationReport& report);

/// Writes trial.csv, survey.csv and schema.json into `dir` such that
/// load_csv on them reproduces the covariate matrix and weights bit for bit.
void write_dataset_csv(const CombinedDataset& dataset, const std::filesystem::path& dir);

}  // namespace svytrans
