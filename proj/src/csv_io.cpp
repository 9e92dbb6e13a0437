#include "svytrans/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "svytrans/errors.hpp"

namespace svytrans {

namespace {

ColumnRole parse_role(const std::string& text) {
  if (text == "covariate") return ColumnRole::Covariate;
  if (text == "treatment") return ColumnRole::Treatment;
  if (text == "outcome") return ColumnRole::Outcome;
  if (text == "survey_weight") return ColumnRole::SurveyWeight;
  throw ConfigError("unknown column role '" + text + "'");
}

std::string_view role_name(ColumnRole role) {
  switch (role) {
    case ColumnRole::Covariate: return "covariate";
    case ColumnRole::Treatment: return "treatment";
    case ColumnRole::Outcome: return "outcome";
    case ColumnRole::SurveyWeight: return "survey_weight";
  }
  return "covariate";
}

std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<std::string> CsvSchema::columns_with(ColumnRole role) const {
  std::vector<std::string> out;
  for (const auto& [name, r] : columns)
    if (r == role) out.push_back(name);
  return out;
}

CsvSchema parse_schema(const nlohmann::ordered_json& config) {
  if (!config.is_object()) throw ConfigError("schema must be a JSON object");
  CsvSchema schema;
  if (config.contains("delimiter")) {
    const auto d = config.at("delimiter").get<std::string>();
    if (d.size() != 1) throw ConfigError("delimiter must be a single character");
    schema.delimiter = d[0];
  }
  if (!config.contains("columns") || !config.at("columns").is_object()) {
    throw ConfigError("schema needs a \"columns\" object");
  }
  for (const auto& [name, role] : config.at("columns").items()) {
    schema.columns.emplace_back(name, parse_role(role.get<std::string>()));
  }
  if (config.contains("categorical")) {
    schema.categorical = config.at("categorical").get<std::vector<std::string>>();
  }
  for (auto role : {ColumnRole::Treatment, ColumnRole::Outcome, ColumnRole::SurveyWeight}) {
    if (schema.columns_with(role).size() > 1) {
      throw ConfigError("schema declares more than one " + std::string(role_name(role)) +
                        " column");
    }
  }
  if (schema.columns_with(ColumnRole::Covariate).empty()) {
    throw ConfigError("schema declares no covariate columns");
  }
  return schema;
}

CsvSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema '" + path.string() + "'");
  try {
    return parse_schema(nlohmann::ordered_json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed schema '" + path.string() + "': " + e.what());
  }
}

nlohmann::ordered_json schema_to_json(const CsvSchema& schema) {
  nlohmann::ordered_json j;
  j["delimiter"] = std::string(1, schema.delimiter);
  auto& cols = j["columns"] = nlohmann::ordered_json::object();
  for (const auto& [name, role] : schema.columns) cols[name] = role_name(role);
  j["categorical"] = schema.categorical;
  return j;
}

long CsvTable::column(std::string_view name) const {
  auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<long>(it - header.begin());
}

CsvTable parse_csv(std::string_view text, char delim) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_has_content = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
      row_has_content = true;
    } else if (c == delim) {
      row.push_back(std::move(field));
      field.clear();
      row_has_content = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (row_has_content || !field.empty()) {
        row.push_back(std::move(field));
        records.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      row_has_content = false;
    } else {
      field += c;
      row_has_content = true;
    }
  }
  if (in_quotes) throw SchemaError("unterminated quoted field");
  if (row_has_content || !field.empty()) {
    row.push_back(std::move(field));
    records.push_back(std::move(row));
  }

  CsvTable table;
  if (records.empty()) return table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw SchemaError("data row " + std::to_string(r) + " has " +
                        std::to_string(records[r].size()) + " fields, header has " +
                        std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

CsvTable read_csv(const std::filesystem::path& path, char delimiter) {
  try {
    return parse_csv(read_file(path), delimiter);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

std::string to_csv_string(const CsvTable& table, char delim) {
  std::string out;
  auto emit = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += delim;
      const auto& f = fields[i];
      if (f.find_first_of(std::string{delim, '"', '\n', '\r'}) != std::string::npos) {
        out += '"';
        for (char c : f) out += c == '"' ? std::string("\"\"") : std::string(1, c);
        out += '"';
      } else {
        out += f;
      }
    }
    out += '\n';
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
  return out;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table, char delim) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << to_csv_string(table, delim);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

nlohmann::ordered_json validation_report_json(const ValidationReport& report) {
  nlohmann::ordered_json j;
  j["ok"] = report.ok();
  auto& checks = j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"severity", c.severity == Severity::Error ? "error" : "warning"},
                      {"message", c.message}});
  }
  return j;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

bool is_missing_token(std::string_view f) {
  return f.empty() || f == "NA" || f == "NaN" || f == "nan" || f == ".";
}

// --- load_csv --------------------------------------------------------------

CombinedDataset load_csv(const std::filesystem::path& trial_path,
                         const std::filesystem::path& survey_path,
                         const CsvSchema& schema, const LoadOptions& options) {
  const CsvTable trial = read_csv(trial_path, schema.delimiter);
  const CsvTable survey = read_csv(survey_path, schema.delimiter);

  const auto covariate_cols = schema.columns_with(ColumnRole::Covariate);
  const auto treatment_cols = schema.columns_with(ColumnRole::Treatment);
  const auto outcome_cols = schema.columns_with(ColumnRole::Outcome);
  const auto weight_cols = schema.columns_with(ColumnRole::SurveyWeight);

  if (treatment_cols.empty()) throw SchemaError("schema declares no treatment column");
  if (outcome_cols.empty()) throw SchemaError("schema declares no outcome column");
  if (weight_cols.empty() && !options.allow_missing_survey_weights) {
    throw SchemaError("schema declares no survey_weight column");
  }

  auto require = [](const CsvTable& t, const std::string& col, const char* which) {
    const long c = t.column(col);
    if (c < 0) {
      throw SchemaError(std::string("missing column '") + col + "' in " + which + " file");
    }
    return static_cast<std::size_t>(c);
  };

  if (trial.header.empty() || trial.rows.empty()) {
    throw ValidationError("trial file contains no data rows");
  }
  if (survey.header.empty() || survey.rows.empty()) {
    throw ValidationError("survey file contains no data rows");
  }

  std::vector<std::size_t> t_cov, s_cov;
  for (const auto& c : covariate_cols) {
    t_cov.push_back(require(trial, c, "trial"));
    s_cov.push_back(require(survey, c, "survey"));
  }
  const std::size_t t_treat = require(trial, treatment_cols[0], "trial");
  const std::size_t t_out = require(trial, outcome_cols[0], "trial");
  std::optional<std::size_t> s_weight;
  if (!weight_cols.empty()) s_weight = require(survey, weight_cols[0], "survey");
  const long s_treat = survey.column(treatment_cols[0]);
  const long s_out = survey.column(outcome_cols[0]);

  // Decide encoding per covariate.
  struct Encoding {
    bool categorical = false;
    std::vector<std::string> levels;  // kept levels (first dropped)
  };
  std::vector<Encoding> enc(covariate_cols.size());
  std::vector<std::string> names;
  for (std::size_t k = 0; k < covariate_cols.size(); ++k) {
    bool cat = std::find(schema.categorical.begin(), schema.categorical.end(),
                         covariate_cols[k]) != schema.categorical.end();
    std::set<std::string> levels;
    auto scan = [&](const CsvTable& t, std::size_t col) {
      for (const auto& r : t.rows) {
        if (is_missing_token(r[col])) continue;
        levels.insert(r[col]);
        if (!parse_number(r[col])) cat = true;
      }
    };
    scan(trial, t_cov[k]);
    scan(survey, s_cov[k]);
    enc[k].categorical = cat;
    if (cat) {
      enc[k].levels.assign(std::next(levels.begin(), levels.empty() ? 0 : 1), levels.end());
      for (const auto& lvl : enc[k].levels) names.push_back(covariate_cols[k] + "=" + lvl);
    } else {
      names.push_back(covariate_cols[k]);
    }
  }

  auto encode_row = [&](const std::vector<std::string>& row,
                        const std::vector<std::size_t>& cols, std::size_t row_no,
                        std::vector<double>& x) {
    x.clear();
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const std::string& f = row[cols[k]];
      if (is_missing_token(f)) {
        throw ValidationError("covariate '" + covariate_cols[k] + "' is missing", row_no);
      }
      if (enc[k].categorical) {
        for (const auto& lvl : enc[k].levels) x.push_back(f == lvl ? 1.0 : 0.0);
      } else {
        x.push_back(*parse_number(f));
      }
    }
  };

  auto parse_binary = [](const std::string& f, std::size_t row_no) -> int {
    auto v = parse_number(f);
    if (!v || (*v != 0.0 && *v != 1.0)) {
      throw ValidationError("treatment '" + f + "' is not binary (0/1)", row_no);
    }
    return static_cast<int>(*v);
  };

  CombinedDataset::Builder builder(names);
  builder.reserve(trial.rows.size() + survey.rows.size());
  std::vector<double> x;
  std::size_t row_no = 0;
  try {
    for (const auto& r : trial.rows) {
      ++row_no;
      encode_row(r, t_cov, row_no, x);
      if (is_missing_token(r[t_treat])) throw ValidationError("treatment is missing", row_no);
      const int a = parse_binary(r[t_treat], row_no);
      auto y = parse_number(r[t_out]);
      if (is_missing_token(r[t_out]) || !y) {
        throw ValidationError("outcome is missing or not numeric", row_no);
      }
      builder.add_trial(x, a, *y, row_no);
    }
  } catch (const ValidationError& e) {
    throw e.with_context("trial file");
  }

  row_no = 0;
  try {
    for (const auto& r : survey.rows) {
      ++row_no;
      encode_row(r, s_cov, row_no, x);
      double w = 1.0;
      if (s_weight) {
        auto v = parse_number(r[*s_weight]);
        if (is_missing_token(r[*s_weight]) || !v) {
          throw ValidationError("survey weight is missing or not numeric", row_no);
        }
        w = *v;
      }
      std::optional<int> a;
      std::optional<double> y;
      if (s_treat >= 0 && !is_missing_token(r[s_treat])) a = parse_binary(r[s_treat], row_no);
      if (s_out >= 0 && !is_missing_token(r[s_out])) y = parse_number(r[s_out]);
      builder.add_survey(x, w, a, y, row_no);
    }
  } catch (const ValidationError& e) {
    throw e.with_context("survey file");
  }

  CombinedDataset dataset = std::move(builder).build();
  const ValidationReport report = validate(dataset);
  if (!report.ok()) {
    std::string msg = "dataset failed validation:";
    for (const auto* f : report.failures()) msg += " " + f->message + ";";
    throw ValidationError(msg);
  }
  return dataset;
}

void write_dataset_csv(const CombinedDataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  CsvTable trial, survey;
  trial.header = d.covariate_names();
  trial.header.push_back("treatment");
  trial.header.push_back("outcome");
  survey.header = d.covariate_names();
  survey.header.push_back("survey_weight");
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<std::string> row;
    for (double v : d.covariates(i)) row.push_back(format_double(v));
    if (d.is_trial(i)) {
      row.push_back(std::to_string(d.treatment(i)));
      row.push_back(format_double(d.outcome(i)));
      trial.rows.push_back(std::move(row));
    } else {
      row.push_back(format_double(d.weight(i)));
      survey.rows.push_back(std::move(row));
    }
  }
  write_csv(dir / "trial.csv", trial);
  write_csv(dir / "survey.csv", survey);

  CsvSchema schema;
  for (const auto& n : d.covariate_names()) schema.columns.emplace_back(n, ColumnRole::Covariate);
  schema.columns.emplace_back("treatment", ColumnRole::Treatment);
  schema.columns.emplace_back("outcome", ColumnRole::Outcome);
  schema.columns.emplace_back("survey_weight", ColumnRole::SurveyWeight);
  std::ofstream out(dir / "schema.json");
  out << schema_to_json(schema).dump(2) << '\n';
}

}  // namespace svytrans
