// Writes two synthetic trial/survey pairs shaped like the applications the
// method was built for: a blood-pressure trial (continuous outcome) and a
// substance-use trial (binary outcome). No real data is used.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "svytrans/csv_io.hpp"
#include "svytrans/rng.hpp"
#include "svytrans/stats.hpp"

namespace fs = std::filesystem;
using namespace svytrans;

namespace {

struct Person {
  double age;
  int female;
  std::string race;
  double bmi;
  double sbp;
};

const char* kRaces[] = {"black", "hispanic", "other", "white"};

Person draw_person(Rng& rng, double age_mean, double p_female, const double* race_p) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::discrete_distribution<int> race(race_p, race_p + 4);
  Person p;
  p.age = std::clamp(age_mean + 11.0 * z(rng), 25.0, 85.0);
  p.female = std::bernoulli_distribution(p_female)(rng) ? 1 : 0;
  p.race = kRaces[race(rng)];
  p.bmi = std::clamp(29.0 + 4.5 * z(rng), 18.5, 40.0);
  p.sbp = std::clamp(128.0 + 0.25 * (p.age - 50.0) + 9.0 * z(rng), 100.0, 180.0);
  return p;
}

std::string fmt(double v, int digits = 2) {
  const double s = std::pow(10.0, digits);
  return format_double(std::round(v * s) / s);
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

// Continuous outcome: change in systolic pressure; the effect is larger for
// older and higher-pressure participants.
void blood_pressure(const fs::path& dir, std::uint64_t seed) {
  fs::create_directories(dir);
  Rng rng = make_rng(seed, 1);
  std::normal_distribution<double> z(0.0, 1.0);
  const double trial_race[] = {0.34, 0.03, 0.03, 0.60};
  const double pop_race[] = {0.12, 0.13, 0.08, 0.67};

  CsvTable trial;
  trial.header = {"age", "female", "race", "bmi", "sbp_baseline", "treatment", "sbp_change"};
  for (int i = 0; i < 810; ++i) {
    const Person p = draw_person(rng, 50.0, 0.62, trial_race);
    const int a = i % 2;
    const double effect = -3.0 - 0.08 * (p.age - 50.0) - 0.1 * (p.sbp - 130.0);
    const double y = -2.0 - 0.2 * (p.sbp - 130.0) + a * effect + 7.0 * z(rng);
    trial.rows.push_back({fmt(p.age, 0), std::to_string(p.female), p.race, fmt(p.bmi, 1),
                          fmt(p.sbp, 0), std::to_string(a), fmt(y, 1)});
  }
  write_csv(dir / "trial.csv", trial);

  CsvTable survey;
  survey.header = {"age", "female", "race", "bmi", "sbp_baseline", "survey_weight"};
  for (int i = 0; i < 2180; ++i) {
    const Person p = draw_person(rng, 56.0, 0.48, pop_race);
    // Older and minority respondents are oversampled, so they carry less weight.
    const double pi = expit(-6.2 + 0.02 * (p.age - 56.0) + (p.race != "white" ? 0.6 : 0.0));
    survey.rows.push_back({fmt(p.age, 0), std::to_string(p.female), p.race, fmt(p.bmi, 1),
                           fmt(p.sbp, 0), fmt(1.0 / pi, 1)});
  }
  write_csv(dir / "survey.csv", survey);

  write_text(dir / "schema.json", R"({
  "delimiter": ",",
  "columns": {
    "age": "covariate",
    "female": "covariate",
    "race": "covariate",
    "bmi": "covariate",
    "sbp_baseline": "covariate",
    "treatment": "treatment",
    "sbp_change": "outcome",
    "survey_weight": "survey_weight"
  },
  "categorical": ["race"]
}
)");
}

// Binary outcome: abstinence at end of treatment; younger participants
// benefit more.
void substance_use(const fs::path& dir, std::uint64_t seed) {
  fs::create_directories(dir);
  Rng rng = make_rng(seed, 2);
  std::normal_distribution<double> z(0.0, 1.0);

  CsvTable trial;
  trial.header = {"age", "female", "employed", "heroin", "treatment", "abstinent"};
  for (int i = 0; i < 500; ++i) {
    const double age = std::clamp(35.0 + 10.0 * z(rng), 18.0, 70.0);
    const int female = std::bernoulli_distribution(0.38)(rng);
    const int employed = std::bernoulli_distribution(0.55)(rng);
    const int heroin = std::bernoulli_distribution(0.35)(rng);
    const int a = i % 2;
    const double lo = -0.8 + 0.3 * employed - 0.5 * heroin +
                      a * (0.6 - 0.03 * (age - 35.0));
    const int y = std::bernoulli_distribution(expit(lo))(rng);
    trial.rows.push_back({fmt(age, 0), std::to_string(female), std::to_string(employed),
                          std::to_string(heroin), std::to_string(a), std::to_string(y)});
  }
  write_csv(dir / "trial.csv", trial);

  CsvTable survey;
  survey.header = {"age", "female", "employed", "heroin", "survey_weight"};
  for (int i = 0; i < 3000; ++i) {
    const double age = std::clamp(30.0 + 9.0 * z(rng), 18.0, 70.0);
    const int female = std::bernoulli_distribution(0.45)(rng);
    const int employed = std::bernoulli_distribution(0.62)(rng);
    const int heroin = std::bernoulli_distribution(0.18)(rng);
    const double pi = expit(-7.0 - 0.03 * (age - 30.0) + 0.4 * heroin);
    survey.rows.push_back({fmt(age, 0), std::to_string(female), std::to_string(employed),
                           std::to_string(heroin), fmt(1.0 / pi, 1)});
  }
  write_csv(dir / "survey.csv", survey);

  write_text(dir / "schema.json", R"({
  "delimiter": ",",
  "columns": {
    "age": "covariate",
    "female": "covariate",
    "employed": "covariate",
    "heroin": "covariate",
    "treatment": "treatment",
    "abstinent": "outcome",
    "survey_weight": "survey_weight"
  }
}
)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Write synthetic demo datasets", "make_demo_data"};
  std::string out = "data/demo";
  std::uint64_t seed = 7;
  app.add_option("--out", out, "Output directory")->capture_default_str();
  app.add_option("--seed", seed, "Seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  blood_pressure(fs::path(out) / "blood_pressure", seed);
  substance_use(fs::path(out) / "substance_use", seed);
  std::cout << "wrote " << out << "\n";
  return 0;
}
