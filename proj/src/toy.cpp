#include "svytrans/toy.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "svytrans/csv_io.hpp"
#include "svytrans/errors.hpp"
#include "svytrans/pipeline.hpp"

namespace svytrans {

namespace {

struct Stratum {
  double older;
  int n_trial;
  int n_survey;
  double survey_weight;
  double effect;
  int population;
};

constexpr Stratum kStrata[] = {{1.0, 100, 200, 5.0 / 2.0, 2.0, 500},
                               {0.0, 50, 300, 5.0 / 3.0, 4.0, 500}};

// Zero-sum unit deviations for a group of size m.
double deviation(int k, int m) {
  if (m % 2 == 1) {
    if (k == 0) return 0.0;
    --k;
  }
  return k % 2 == 0 ? -1.0 : 1.0;
}

struct TrialRow {
  double older;
  int treatment;
  double outcome;
};

std::vector<TrialRow> trial_rows() {
  std::vector<TrialRow> rows;
  for (const auto& s : kStrata) {
    const int treated = s.n_trial / 2;
    const int control = s.n_trial - treated;
    for (int k = 0; k < treated; ++k) rows.push_back({s.older, 1, s.effect + deviation(k, treated)});
    for (int k = 0; k < control; ++k) rows.push_back({s.older, 0, deviation(k, control)});
  }
  return rows;
}

double trial_weight_for(const std::vector<double>& values, const CombinedDataset& d,
                        const std::vector<std::size_t>& rows, double older) {
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (d.covariate(rows[k], 0) == older) return values[k];
  }
  throw NumericalError("toy stratum missing from the trial");
}

}  // namespace

CombinedDataset toy_dataset() {
  CombinedDataset::Builder b({"older"});
  for (const auto& r : trial_rows()) {
    const double x[] = {r.older};
    b.add_trial(x, r.treatment, r.outcome);
  }
  for (const auto& s : kStrata) {
    const double x[] = {s.older};
    for (int k = 0; k < s.n_survey; ++k) b.add_survey(x, s.survey_weight);
  }
  return std::move(b).build();
}

void write_toy_csv(const std::string& directory) {
  std::filesystem::create_directories(directory);
  const std::filesystem::path dir(directory);
  CsvTable trial;
  trial.header = {"older", "treatment", "outcome"};
  for (const auto& r : trial_rows()) {
    trial.rows.push_back({format_double(r.older), std::to_string(r.treatment),
                          format_double(r.outcome)});
  }
  write_csv(dir / "trial.csv", trial);

  CsvTable survey;
  survey.header = {"older", "survey_weight"};
  for (const auto& s : kStrata) {
    for (int k = 0; k < s.n_survey; ++k) {
      survey.rows.push_back({format_double(s.older), format_double(s.survey_weight)});
    }
  }
  write_csv(dir / "survey.csv", survey);

  std::ofstream schema(dir / "schema.json", std::ios::binary);
  schema << R"({
  "delimiter": ",",
  "columns": {
    "older": "covariate",
    "treatment": "treatment",
    "outcome": "outcome",
    "survey_weight": "survey_weight"
  }
}
)";
}

ToyResult run_toy() {
  const CombinedDataset d = toy_dataset();
  ToyResult r;
  EstimandSpec spec;
  spec.covariate_subset = {"older"};

  spec.estimator = Estimator::Naive;
  r.naive = run_pipeline(d, spec).estimate.point;

  spec.estimator = Estimator::Transport;
  const PipelineOutput g = run_pipeline(d, spec);
  r.transport = g.estimate.point;
  r.gamma_older = trial_weight_for(g.weights->values, d, g.weights->trial_rows, 1.0);
  r.gamma_younger = trial_weight_for(g.weights->values, d, g.weights->trial_rows, 0.0);

  spec.estimator = Estimator::SurveyWeighted;
  const PipelineOutput s = run_pipeline(d, spec);
  r.survey_weighted = s.estimate.point;
  r.delta_older = trial_weight_for(s.weights->values, d, s.weights->trial_rows, 1.0);
  r.delta_younger = trial_weight_for(s.weights->values, d, s.weights->trial_rows, 0.0);

  double pop = 0.0, num = 0.0;
  for (const auto& st : kStrata) {
    num += st.effect * st.population;
    pop += st.population;
  }
  r.true_pate = num / pop;
  return r;
}

std::string toy_report_text(const ToyResult& r) {
  // Twelve significant digits hide last-bit noise; the JSON report keeps full precision.
  auto fmt = [](double v) {
    std::ostringstream s;
    s << std::setprecision(12) << v;
    return s.str();
  };
  std::ostringstream o;
  o << "stratum   effect  population  survey  trial  survey_weight\n";
  o << "age > 40       2         500     200    100            5/2\n";
  o << "age <= 40      4         500     300     50            5/3\n\n";
  o << "true PATE        = 2 x 0.5 + 4 x 0.5 = " << fmt(r.true_pate) << "\n";
  o << "naive            = 2 x 2/3 + 4 x 1/3 = " << fmt(r.naive) << "\n";
  o << "gamma weights    : older 200/100 = " << fmt(r.gamma_older)
    << ", younger 300/50 = " << fmt(r.gamma_younger) << "\n";
  o << "transport        = (2 x 2/3 x 2 + 4 x 1/3 x 6) / (2/3 x 2 + 1/3 x 6) = "
    << fmt(r.transport) << "\n";
  o << "delta weights    : older 2 x 5/2 = " << fmt(r.delta_older)
    << ", younger 6 x 5/3 = " << fmt(r.delta_younger) << "\n";
  o << "survey weighted  = (2 x 2/3 x 5 + 4 x 1/3 x 10) / (2/3 x 5 + 1/3 x 10) = "
    << fmt(r.survey_weighted) << "\n";
  return o.str();
}

nlohmann::ordered_json toy_report_json(const ToyResult& r) {
  nlohmann::ordered_json j;
  j["strata"] = nlohmann::ordered_json::array();
  for (const auto& s : kStrata) {
    j["strata"].push_back({{"stratum", s.older == 1.0 ? "age > 40" : "age <= 40"},
                           {"effect", s.effect},
                           {"population", s.population},
                           {"survey", s.n_survey},
                           {"trial", s.n_trial},
                           {"survey_weight", s.survey_weight}});
  }
  j["true_pate"] = r.true_pate;
  j["weights"] = {{"gamma", {{"older", r.gamma_older}, {"younger", r.gamma_younger}}},
                  {"delta", {{"older", r.delta_older}, {"younger", r.delta_younger}}}};
  j["estimates"] = {{"naive", r.naive},
                    {"transport", r.transport},
                    {"svy_wtd", r.survey_weighted}};
  return j;
}

void check_toy_golden(const ToyResult& r, double tol) {
  const std::pair<const char*, std::pair<double, double>> checks[] = {
      {"naive", {r.naive, 8.0 / 3.0}},
      {"transport", {r.transport, 3.2}},
      {"svy_wtd", {r.survey_weighted, 3.0}},
      {"gamma older", {r.gamma_older, 2.0}},
      {"gamma younger", {r.gamma_younger, 6.0}},
      {"delta older", {r.delta_older, 5.0}},
      {"delta younger", {r.delta_younger, 10.0}},
  };
  for (const auto& [name, v] : checks) {
    if (!(std::abs(v.first - v.second) <= tol)) {
      throw NumericalError(std::string("toy example: ") + name + " = " + format_double(v.first) +
                           ", expected " + format_double(v.second));
    }
  }
}

}  // namespace svytrans
