#include "svytrans/simulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "svytrans/bootstrap.hpp"
#include "svytrans/csv_io.hpp"
#include "svytrans/diagnostics.hpp"
#include "svytrans/errors.hpp"
#include "svytrans/estimators.hpp"
#include "svytrans/pipeline.hpp"
#include "svytrans/stats.hpp"
#include "svytrans/weighting.hpp"

namespace svytrans {

namespace {

constexpr std::size_t kChunk = 4096;
// Stream tags under config.seed.
constexpr std::uint64_t kPopulationStream = 0x706f70;
constexpr std::uint64_t kReplicationStream = 0x726570;
constexpr std::uint64_t kBootstrapStream = 0x626f6f74;

const std::array<std::string, kSimCovariates> kNames{"X1", "X2", "X3", "X4", "X5", "X6"};

constexpr std::array<double, kSimCovariates> kTrialCoef{1, 1, 2, 0, 1, 0};
constexpr std::array<double, kSimCovariates> kSurveyCoef{2, 0, 1, 1, 1, 0};

double dot(const std::array<double, kSimCovariates>& c, const double* x) {
  double s = 0.0;
  for (int j = 0; j < kSimCovariates; ++j) s += c[j] * x[j];
  return s;
}

template <typename F>
void for_each_index(std::size_t n, Execution execution, F&& f) {
  if (execution == Execution::Serial) {
    for (std::size_t i = 0; i < n; ++i) f(i);
  } else {
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < n; ++i) f(i);
  }
}

double neumaier_mean(const std::vector<double>& v) {
  double sum = 0.0, c = 0.0;
  for (double x : v) {
    const double t = sum + x;
    c += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return (sum + c) / static_cast<double>(v.size());
}

}  // namespace

ScenarioConfig ScenarioConfig::full_scale() {
  ScenarioConfig c;
  c.population_size = 1000000;
  c.trial_scale = 0.0006;
  c.survey_scale = 0.004;
  c.n_replications = 1000;
  return c;
}

void ScenarioConfig::validate() const {
  if (population_size < 2) throw ConfigError("population_size must be at least 2");
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("rho must lie in [0, 1)");
  for (double g : {gamma1, gamma2, gamma3}) {
    if (!(g >= 0.0) || !std::isfinite(g)) throw ConfigError("gamma values must be nonnegative");
  }
  if (!(trial_scale >= 0.0 && trial_scale <= 1.0) ||
      !(survey_scale >= 0.0 && survey_scale <= 1.0)) {
    throw ConfigError("trial_scale and survey_scale must lie in [0, 1]");
  }
  if (!(treatment_probability > 0.0 && treatment_probability < 1.0)) {
    throw ConfigError("treatment_probability must lie in (0, 1)");
  }
  for (const auto& name : omitted_covariates) {
    if (std::find(kNames.begin(), kNames.end(), name) == kNames.end()) {
      throw ConfigError("unknown omitted covariate '" + name + "' (expected X1..X6)");
    }
  }
  if (included_covariates().empty()) throw ConfigError("every covariate is omitted");
  if (learners.empty()) throw ConfigError("at least one learner is required");
  if (n_replications < 1) throw ConfigError("n_replications must be positive");
  if (bootstrap_iterations < 0 || bootstrap_iterations == 1) {
    throw ConfigError("bootstrap_iterations must be 0 or at least 2");
  }
  if (bootstrap_strata < 1) throw ConfigError("bootstrap_strata must be positive");
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0)) {
    throw ConfigError("max_failure_fraction must lie in [0, 1]");
  }
}

std::vector<std::string> ScenarioConfig::included_covariates() const {
  std::vector<std::string> out;
  for (const auto& n : kNames) {
    if (std::find(omitted_covariates.begin(), omitted_covariates.end(), n) ==
        omitted_covariates.end()) {
      out.push_back(n);
    }
  }
  return out;
}

nlohmann::ordered_json to_json(const ScenarioConfig& c) {
  nlohmann::ordered_json j;
  j["population_size"] = c.population_size;
  j["rho"] = c.rho;
  j["gamma1"] = c.gamma1;
  j["gamma2"] = c.gamma2;
  j["gamma3"] = c.gamma3;
  j["trial_scale"] = c.trial_scale;
  j["survey_scale"] = c.survey_scale;
  j["treatment_probability"] = c.treatment_probability;
  j["omitted_covariates"] = c.omitted_covariates;
  auto& l = j["learners"] = nlohmann::ordered_json::array();
  for (Learner x : c.learners) l.push_back(std::string(to_string(x)));
  j["gbm"] = {{"n_trees", c.gbm.n_trees},
              {"depth", c.gbm.depth},
              {"shrinkage", c.gbm.shrinkage},
              {"min_child_weight", c.gbm.min_child_weight},
              {"stop_on_balance", c.gbm.stop_on_balance}};
  j["n_replications"] = c.n_replications;
  j["seed"] = c.seed;
  j["bootstrap_iterations"] = c.bootstrap_iterations;
  j["bootstrap_strata"] = c.bootstrap_strata;
  j["max_failure_fraction"] = c.max_failure_fraction;
  return j;
}

ScenarioConfig scenario_from_json(const nlohmann::ordered_json& j, const ScenarioConfig& base) {
  if (!j.is_object()) throw ConfigError("scenario config must be a JSON object");
  ScenarioConfig c = base;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "population_size") c.population_size = v.get<std::size_t>();
      else if (key == "rho") c.rho = v.get<double>();
      else if (key == "gamma1") c.gamma1 = v.get<double>();
      else if (key == "gamma2") c.gamma2 = v.get<double>();
      else if (key == "gamma3") c.gamma3 = v.get<double>();
      else if (key == "trial_scale") c.trial_scale = v.get<double>();
      else if (key == "survey_scale") c.survey_scale = v.get<double>();
      else if (key == "treatment_probability") c.treatment_probability = v.get<double>();
      else if (key == "omitted_covariates") c.omitted_covariates = v.get<std::vector<std::string>>();
      else if (key == "learners" || key == "learner") {
        c.learners.clear();
        if (v.is_string()) {
          c.learners.push_back(parse_learner(v.get<std::string>()));
        } else {
          for (const auto& s : v) c.learners.push_back(parse_learner(s.get<std::string>()));
        }
      } else if (key == "gbm") {
        for (const auto& [gk, gv] : v.items()) {
          if (gk == "n_trees") c.gbm.n_trees = gv.get<int>();
          else if (gk == "depth") c.gbm.depth = gv.get<int>();
          else if (gk == "shrinkage") c.gbm.shrinkage = gv.get<double>();
          else if (gk == "min_child_weight") c.gbm.min_child_weight = gv.get<double>();
          else if (gk == "stop_on_balance") c.gbm.stop_on_balance = gv.get<bool>();
          else throw ConfigError("unknown gbm key '" + gk + "'");
        }
      } else if (key == "n_replications") c.n_replications = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "bootstrap_iterations") c.bootstrap_iterations = v.get<int>();
      else if (key == "bootstrap_strata") c.bootstrap_strata = v.get<int>();
      else if (key == "max_failure_fraction") c.max_failure_fraction = v.get<double>();
      else if (key == "full_scale") {
        if (v.get<bool>()) {
          const ScenarioConfig p = ScenarioConfig::full_scale();
          c.population_size = p.population_size;
          c.trial_scale = p.trial_scale;
          c.survey_scale = p.survey_scale;
          c.n_replications = p.n_replications;
        }
      } else {
        throw ConfigError("unknown scenario key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed scenario config: ") + e.what());
  }
  return c;
}

double Population::pate() const {
  std::vector<double> d(size);
  for (std::size_t i = 0; i < size; ++i) d[i] = y1[i] - y0[i];
  return neumaier_mean(d);
}

Population generate_population(const ScenarioConfig& config, std::uint64_t seed,
                               Execution execution) {
  config.validate();
  const std::size_t n = config.population_size;
  Population pop;
  pop.size = n;
  pop.x.resize(n * kSimCovariates);
  pop.y0.resize(n);
  pop.y1.resize(n);
  pop.p_trial.resize(n);
  pop.p_survey.resize(n);

  const double rho = config.rho;
  const double tail = std::sqrt(1.0 - rho * rho);
  const std::uint64_t pop_seed = derive_seed(seed, kPopulationStream);
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;

  for_each_index(n_chunks, execution, [&](std::size_t c) {
    Rng rng = make_rng(pop_seed, c);
    std::normal_distribution<double> z(0.0, 1.0);
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      double* x = &pop.x[i * kSimCovariates];
      for (int k = 0; k < kSimCovariates; k += 2) {
        const double a = z(rng);
        const double b = z(rng);
        x[k] = a;
        x[k + 1] = rho * a + tail * b;
      }
      double sum = 0.0;
      for (int k = 0; k < kSimCovariates; ++k) sum += x[k];
      pop.y0[i] = z(rng);
      pop.y1[i] = kTruePate + config.gamma3 * sum + z(rng);
      pop.p_trial[i] = expit(config.gamma1 * dot(kTrialCoef, x));
      pop.p_survey[i] = expit(config.gamma2 * dot(kSurveyCoef, x));
    }
  });

  const double k1 = config.trial_scale / neumaier_mean(pop.p_trial);
  const double k2 = config.survey_scale / neumaier_mean(pop.p_survey);
  for (std::size_t i = 0; i < n; ++i) {
    pop.p_trial[i] *= k1;
    pop.p_survey[i] *= k2;
    if (pop.p_trial[i] + pop.p_survey[i] > 1.0) {
      throw ConfigError("scaled selection probabilities exceed 1 for population unit " +
                        std::to_string(i + 1) + "; lower trial_scale or survey_scale");
    }
  }
  return pop;
}

SampleDraw draw_samples(const Population& pop, const ScenarioConfig& config, Rng& rng) {
  std::vector<std::size_t> trial, survey;
  for (std::size_t i = 0; i < pop.size; ++i) {
    const double u = uniform01(rng);
    if (u < pop.p_trial[i]) {
      trial.push_back(i);
    } else if (u < pop.p_trial[i] + pop.p_survey[i]) {
      survey.push_back(i);
    }
  }

  CombinedDataset::Builder b(std::vector<std::string>(kNames.begin(), kNames.end()));
  b.reserve(trial.size() + survey.size());
  std::vector<std::size_t> index;
  std::vector<double> prob;
  std::bernoulli_distribution treat(config.treatment_probability);
  for (std::size_t i : trial) {
    const int a = treat(rng) ? 1 : 0;
    const double y = a == 1 ? pop.y1[i] : pop.y0[i];
    b.add_trial({&pop.x[i * kSimCovariates], kSimCovariates}, a, y);
    index.push_back(i);
    prob.push_back(pop.p_survey[i]);
  }
  for (std::size_t i : survey) {
    b.add_survey({&pop.x[i * kSimCovariates], kSimCovariates}, 1.0 / pop.p_survey[i]);
    index.push_back(i);
    prob.push_back(pop.p_survey[i]);
  }
  return SampleDraw{std::move(b).build(), std::move(index), std::move(prob)};
}

ReplicationResult run_replication(const Population& pop, const ScenarioConfig& config,
                                  std::uint64_t r) {
  ReplicationResult out;
  Rng rng = make_rng(derive_seed(config.seed, kReplicationStream), r);
  try {
    const SampleDraw draw = draw_samples(pop, config, rng);
    const CombinedDataset& d = draw.dataset;
    out.n_trial = d.n_trial();
    out.n_survey = d.n_survey();

    std::vector<double> sampled;
    sampled.reserve(d.n_survey());
    for (std::size_t row : d.survey_rows()) sampled.push_back(draw.survey_probability[row]);
    out.selection_asmd = selection_asmd(sampled, pop.p_survey);

    auto add = [&](Estimator e, std::optional<Learner> l, bool boot, double point, double se,
                   double lo, double hi) {
      out.cells.push_back({e, l, boot, point, se, lo <= kTruePate && kTruePate <= hi});
    };

    const PateEstimate naive = estimate_naive(d);
    add(Estimator::Naive, std::nullopt, false, naive.point, naive.se, naive.ci_low,
        naive.ci_high);

    PipelineOptions po;
    po.gbm = config.gbm;
    for (Learner learner : config.learners) {
      for (Estimator e : {Estimator::Transport, Estimator::SurveyWeighted}) {
        EstimandSpec spec;
        spec.estimator = e;
        spec.membership_learner = learner;
        spec.covariate_subset = config.included_covariates();
        const PateEstimate est = run_pipeline(d, spec, po).estimate;
        add(e, learner, false, est.point, est.se, est.ci_low, est.ci_high);

        if (config.bootstrap_iterations > 0) {
          BootstrapPlan plan;
          plan.n_iterations = config.bootstrap_iterations;
          plan.n_strata = config.bootstrap_strata;
          plan.rng_seed = derive_seed(derive_seed(config.seed, kBootstrapStream), r);
          plan.execution = Execution::Serial;
          const BootstrapResult br = double_bootstrap(d, spec, plan, po);
          add(e, learner, true, br.point, br.se, br.ci_low, br.ci_high);
        }
      }
    }
  } catch (const Error& e) {
    out.failed = true;
    out.failure = e.what();
    out.cells.clear();
  }
  return out;
}

const CellSummary& ScenarioSummary::cell(Estimator estimator, std::optional<Learner> learner,
                                         bool bootstrap) const {
  for (const auto& c : cells) {
    if (c.estimator == estimator && c.learner == learner && c.bootstrap == bootstrap) return c;
  }
  throw ConfigError("no summary cell for estimator " + std::string(to_string(estimator)));
}

ScenarioSummary summarize(const ScenarioConfig& config,
                          const std::vector<ReplicationResult>& reps, double population_pate) {
  ScenarioSummary s;
  s.config = config;
  s.population_pate = population_pate;

  struct Acc {
    std::vector<double> points;
    double se_sum = 0.0;
    int covered = 0;
  };
  std::vector<Acc> acc;
  int ok = 0;
  for (const auto& rep : reps) {
    if (rep.failed) {
      ++s.n_failed;
      continue;
    }
    ++ok;
    s.mean_selection_asmd += rep.selection_asmd;
    s.mean_n_trial += static_cast<double>(rep.n_trial);
    s.mean_n_survey += static_cast<double>(rep.n_survey);
    for (const auto& c : rep.cells) {
      std::size_t k = 0;
      while (k < s.cells.size() && !(s.cells[k].estimator == c.estimator &&
                                     s.cells[k].learner == c.learner &&
                                     s.cells[k].bootstrap == c.bootstrap)) {
        ++k;
      }
      if (k == s.cells.size()) {
        s.cells.push_back({c.estimator, c.learner, c.bootstrap});
        acc.emplace_back();
      }
      acc[k].points.push_back(c.point);
      acc[k].se_sum += c.se;
      acc[k].covered += c.covered ? 1 : 0;
    }
  }
  if (static_cast<double>(s.n_failed) >
      config.max_failure_fraction * static_cast<double>(reps.size())) {
    std::string first;
    for (const auto& rep : reps) {
      if (rep.failed) {
        first = rep.failure;
        break;
      }
    }
    throw NumericalError(std::to_string(s.n_failed) + " of " + std::to_string(reps.size()) +
                         " replications failed (first: " + first + ")");
  }
  if (ok == 0) return s;
  s.mean_selection_asmd /= ok;
  s.mean_n_trial /= ok;
  s.mean_n_survey /= ok;

  for (std::size_t k = 0; k < s.cells.size(); ++k) {
    CellSummary& c = s.cells[k];
    const auto& p = acc[k].points;
    c.n = static_cast<int>(p.size());
    c.mean_point = neumaier_mean(p);
    c.bias = c.mean_point - kTruePate;
    c.coverage = static_cast<double>(acc[k].covered) / c.n;
    c.mean_se = acc[k].se_sum / c.n;
    double ss = 0.0;
    for (double v : p) ss += (v - c.mean_point) * (v - c.mean_point);
    c.sd_point = c.n > 1 ? std::sqrt(ss / (c.n - 1)) : 0.0;
    c.mc_se = c.sd_point / std::sqrt(static_cast<double>(c.n));
  }
  return s;
}

ScenarioSummary run_scenario(const ScenarioConfig& config, Execution execution) {
  config.validate();
  const Population pop = generate_population(config, config.seed, execution);
  const auto n = static_cast<std::size_t>(config.n_replications);
  std::vector<ReplicationResult> reps(n);
  std::vector<std::exception_ptr> errors(n);
  for_each_index(n, execution, [&](std::size_t r) {
    try {
      reps[r] = run_replication(pop, config, r);
    } catch (...) {
      errors[r] = std::current_exception();
    }
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return summarize(config, reps, pop.pate());
}

std::vector<ScenarioConfig> expand_grid(const ScenarioConfig& base, const GridAxes& axes) {
  std::vector<ScenarioConfig> cells;
  std::size_t total = 1;
  for (const auto& [key, values] : axes.axes) {
    if (values.empty()) throw ConfigError("grid axis '" + key + "' has no values");
    total *= values.size();
  }
  for (std::size_t idx = 0; idx < total; ++idx) {
    nlohmann::ordered_json patch = nlohmann::ordered_json::object();
    std::size_t rem = idx;
    for (auto it = axes.axes.rbegin(); it != axes.axes.rend(); ++it) {
      patch[it->first] = it->second[rem % it->second.size()];
      rem /= it->second.size();
    }
    ScenarioConfig c = scenario_from_json(patch, base);
    if (!axes.common_random_numbers) c.seed = derive_seed(base.seed, idx);
    c.validate();
    cells.push_back(std::move(c));
  }
  return cells;
}

std::vector<ScenarioSummary> scenario_grid(const ScenarioConfig& base, const GridAxes& axes,
                                           Execution execution) {
  std::vector<ScenarioSummary> out;
  for (const auto& c : expand_grid(base, axes)) out.push_back(run_scenario(c, execution));
  return out;
}

std::pair<ScenarioConfig, GridAxes> parse_grid_config(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw ConfigError("grid config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    (void)v;
    if (key != "base" && key != "axes" && key != "common_random_numbers") {
      throw ConfigError("unknown grid config key '" + key + "'");
    }
  }
  const ScenarioConfig base =
      j.contains("base") ? scenario_from_json(j.at("base")) : ScenarioConfig{};
  GridAxes axes;
  if (j.contains("axes")) {
    const auto& a = j.at("axes");
    if (!a.is_object()) throw ConfigError("grid axes must be an object of arrays");
    for (const auto& [key, values] : a.items()) {
      if (!values.is_array()) throw ConfigError("grid axis '" + key + "' must be an array");
      axes.axes.emplace_back(key, std::vector<nlohmann::ordered_json>(values.begin(), values.end()));
    }
  }
  if (j.contains("common_random_numbers")) {
    if (!j.at("common_random_numbers").is_boolean()) {
      throw ConfigError("common_random_numbers must be a boolean");
    }
    axes.common_random_numbers = j.at("common_random_numbers").get<bool>();
  }
  base.validate();
  expand_grid(base, axes);
  return {base, axes};
}

std::string grid_csv(const std::vector<ScenarioSummary>& summaries) {
  CsvTable t;
  t.header = {"scenario",     "population_size", "rho",        "gamma1",      "gamma2",
              "gamma3",       "omitted",         "seed",       "estimator",   "learner",
              "variance",     "n",               "mean_point", "bias",        "coverage",
              "mean_se",      "sd_point",        "mc_se",      "selection_asmd",
              "mean_n_trial", "mean_n_survey",   "n_failed"};
  for (std::size_t s = 0; s < summaries.size(); ++s) {
    const auto& sm = summaries[s];
    const auto& c = sm.config;
    std::string omitted;
    for (const auto& o : c.omitted_covariates) omitted += (omitted.empty() ? "" : ";") + o;
    for (const auto& cell : sm.cells) {
      t.rows.push_back({std::to_string(s + 1), std::to_string(c.population_size),
                        format_double(c.rho), format_double(c.gamma1), format_double(c.gamma2),
                        format_double(c.gamma3), omitted, std::to_string(c.seed),
                        std::string(to_string(cell.estimator)),
                        cell.learner ? std::string(to_string(*cell.learner)) : "none",
                        cell.bootstrap ? "bootstrap" : "sandwich", std::to_string(cell.n),
                        format_double(cell.mean_point), format_double(cell.bias),
                        format_double(cell.coverage), format_double(cell.mean_se),
                        format_double(cell.sd_point), format_double(cell.mc_se),
                        format_double(sm.mean_selection_asmd), format_double(sm.mean_n_trial),
                        format_double(sm.mean_n_survey), std::to_string(sm.n_failed)});
    }
  }
  return to_csv_string(t);
}

}  // namespace svytrans
