#include "svytrans/cli.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "svytrans/csv_io.hpp"
#include "svytrans/errors.hpp"
#include "svytrans/pipeline.hpp"
#include "svytrans/simulation.hpp"
#include "svytrans/toy.hpp"
#include "svytrans/weighting.hpp"

#ifndef SVYTRANS_VERSION
#define SVYTRANS_VERSION "0.0.0"
#endif

namespace svytrans::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string version() { return SVYTRANS_VERSION; }

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return kExitConfig;
  return kExitValidation;
}

namespace {

std::string hex(const unsigned char* data, unsigned len) {
  std::ostringstream o;
  for (unsigned i = 0; i < len; ++i) {
    o << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(data[i]);
  }
  return o.str();
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw Error("SHA-256 initialisation failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }
  std::string finish() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx_, md, &len);
    return hex(md, len);
  }

 private:
  EVP_MD_CTX* ctx_;
};

ordered_json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

ordered_json estimate_json(const PateEstimate& e, std::optional<Learner> learner) {
  ordered_json j;
  j["estimator"] = std::string(to_string(e.estimator));
  j["learner"] = learner ? std::string(to_string(*learner)) : "none";
  j["effect_scale"] = std::string(to_string(e.effect_scale));
  j["point"] = e.point;
  j["se"] = e.se;
  j["se_scale"] = e.effect_scale == EffectScale::OddsRatio ? "log" : "identity";
  j["ci_low"] = e.ci_low;
  j["ci_high"] = e.ci_high;
  j["level"] = e.level;
  j["arm_means"] = {{"treated", e.arm_means.treated}, {"control", e.arm_means.control}};
  j["n_effective"] = {{"treated", e.n_effective.treated}, {"control", e.n_effective.control}};
  j["weight_variant"] =
      e.weight_variant ? ordered_json(std::string(to_string(*e.weight_variant))) : ordered_json();
  j["model_hash"] = e.model_hash.empty() ? ordered_json() : ordered_json(e.model_hash);
  j["cap_percentile"] = e.cap_percentile ? ordered_json(*e.cap_percentile) : ordered_json();
  return j;
}

ordered_json summary_json(const WeightVector& w) {
  const WeightSummary s = weight_summary(w);
  ordered_json top = ordered_json::array();
  for (std::size_t k = 0; k < s.top_rows.size(); ++k) {
    top.push_back({{"row_index", s.top_rows[k] + 1}, {"weight", s.top_values[k]}});
  }
  return {{"variant", std::string(to_string(w.variant))},
          {"model_hash", w.model_hash},
          {"min", s.min},
          {"max", s.max},
          {"cv", s.cv},
          {"ess", s.ess},
          {"largest", top}};
}

ordered_json estimate_config_json(const EstimateArgs& a) {
  ordered_json j;
  j["learner"] = std::string(to_string(a.learner));
  j["scale"] = std::string(to_string(a.scale));
  j["use_survey_weights"] = a.use_survey_weights;
  j["covariates"] = a.covariates;
  j["bootstrap"] = a.bootstrap;
  j["strata"] = a.strata;
  j["ci_method"] = a.ci_method == CiMethod::Percentile ? "percentile" : "normal";
  j["seed"] = a.seed;
  j["level"] = a.level;
  j["continuity_correction"] = a.continuity_correction;
  j["cap_percentile"] = a.cap_percentile ? ordered_json(*a.cap_percentile) : ordered_json();
  j["asmd_denominator"] = std::string(to_string(a.asmd_denominator));
  j["gbm"] = {{"n_trees", a.gbm.n_trees},
              {"depth", a.gbm.depth},
              {"shrinkage", a.gbm.shrinkage},
              {"min_child_weight", a.gbm.min_child_weight},
              {"stop_on_balance", a.gbm.stop_on_balance}};
  return j;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  Sha256 h;
  h.update(data.data(), data.size());
  return h.finish();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  Sha256 h;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.finish();
}

std::string manifest_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env && *env) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (end && *end == '\0' && v >= 0) t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ordered_json make_manifest(const std::string& command, const ordered_json& config,
                           const std::vector<fs::path>& inputs, std::uint64_t seed,
                           const std::vector<fs::path>& outputs) {
  ordered_json m;
  m["command"] = command;
  m["software"] = "svytrans " + version();
  m["config"] = config;
  m["config_sha256"] = sha256_hex(config.dump());
  auto& in = m["inputs"] = ordered_json::array();
  for (const auto& p : inputs) in.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
  m["seed"] = seed;
  auto& out = m["outputs"] = ordered_json::array();
  for (const auto& p : outputs) {
    out.push_back({{"path", p.filename().string()}, {"sha256", sha256_file(p)}});
  }
  m["timestamp"] = manifest_timestamp();
  return m;
}

ordered_json cmd_estimate(const EstimateArgs& a) {
  if (!(a.level > 0.0 && a.level < 1.0)) throw ConfigError("--level must lie in (0, 1)");
  if (a.bootstrap < 0 || a.bootstrap == 1) throw ConfigError("--bootstrap must be 0 or >= 2");

  const CsvSchema schema = load_schema(a.schema);
  LoadOptions lo;
  lo.allow_missing_survey_weights = !a.use_survey_weights;
  CombinedDataset d = load_csv(a.trial, a.survey, schema, lo);
  if (!a.use_survey_weights) {
    // Ignoring survey weights means every survey row counts once.
    std::vector<std::size_t> rows(d.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const std::vector<double> ones(d.size(), 1.0);
    d = d.select(rows, ones);
  }
  fs::create_directories(a.out_dir);

  const std::vector<std::string> covariates =
      a.covariates.empty() ? d.covariate_names() : a.covariates;

  PipelineOptions po;
  po.gbm = a.gbm;
  po.level = a.level;
  po.continuity_correction = a.continuity_correction;
  po.cap_percentile = a.cap_percentile;

  BootstrapPlan plan;
  plan.n_iterations = a.bootstrap;
  plan.n_strata = a.strata;
  plan.rng_seed = a.seed;
  plan.ci_method = a.ci_method;
  plan.level = a.level;

  ordered_json doc;
  doc["software"] = "svytrans " + version();
  doc["effect_scale"] = std::string(to_string(a.scale));
  doc["learner"] = std::string(to_string(a.learner));
  doc["covariates"] = covariates;
  doc["n_trial"] = d.n_trial();
  doc["n_survey"] = d.n_survey();
  doc["population_size_estimate"] = a.use_survey_weights ? ordered_json(d.population_size_estimate())
                                                         : ordered_json();
  auto& warn = doc["warnings"] = ordered_json::array();
  const ValidationReport report = validate(d);
  for (const auto* w : report.warnings()) warn.push_back(w->name + ": " + w->message);

  CsvTable long_csv;
  long_csv.header = {"estimator", "learner", "variance", "point", "se", "ci_low", "ci_high"};
  auto add_long = [&](const std::string& est, const std::string& learner, const char* var,
                      double point, double se, double lo_, double hi) {
    long_csv.rows.push_back({est, learner, var, format_double(point), format_double(se),
                             format_double(lo_), format_double(hi)});
  };

  auto& ests = doc["estimates"] = ordered_json::array();
  EstimandSpec spec;
  spec.effect_scale = a.scale;
  spec.membership_learner = a.learner;
  spec.covariate_subset = covariates;

  spec.estimator = Estimator::Naive;
  const PateEstimate naive = run_pipeline(d, spec, po).estimate;
  ests.push_back(estimate_json(naive, std::nullopt));
  add_long("naive", "none", "sandwich", naive.point, naive.se, naive.ci_low, naive.ci_high);

  std::vector<Estimator> weighted{Estimator::Transport};
  if (a.use_survey_weights) weighted.push_back(Estimator::SurveyWeighted);

  ordered_json models;
  ordered_json summaries;
  CsvTable weights_csv;
  weights_csv.header = {"row_index", "variant", "model_hash", "weight"};
  CsvTable replicates_csv;
  replicates_csv.header = {"estimator", "replicate", "estimate"};
  std::optional<WeightVector> gamma, delta;
  for (Estimator e : weighted) {
    spec.estimator = e;
    PipelineOutput out = run_pipeline(d, spec, po);
    ordered_json ej = estimate_json(out.estimate, a.learner);
    add_long(std::string(to_string(e)), std::string(to_string(a.learner)), "sandwich",
             out.estimate.point, out.estimate.se, out.estimate.ci_low, out.estimate.ci_high);
    if (a.bootstrap > 0) {
      plan.rng_seed = derive_seed(a.seed, static_cast<std::uint64_t>(e));
      const BootstrapResult br = double_bootstrap(d, spec, plan, po);
      ej["bootstrap"] = {{"iterations", a.bootstrap},
                         {"strata", a.strata},
                         {"ci_method", a.ci_method == CiMethod::Percentile ? "percentile" : "normal"},
                         {"se", br.se},
                         {"ci_low", br.ci_low},
                         {"ci_high", br.ci_high},
                         {"n_failed", br.n_failed},
                         {"warnings", br.warnings}};
      add_long(std::string(to_string(e)), std::string(to_string(a.learner)), "bootstrap",
               br.point, br.se, br.ci_low, br.ci_high);
      for (std::size_t b = 0; b < br.replicate_estimates.size(); ++b) {
        replicates_csv.rows.push_back({std::string(to_string(e)), std::to_string(b + 1),
                                       format_double(br.replicate_estimates[b])});
      }
    }
    ests.push_back(std::move(ej));

    const WeightVector& w = *out.weights;
    for (std::size_t k = 0; k < w.size(); ++k) {
      weights_csv.rows.push_back({std::to_string(w.trial_rows[k] + 1),
                                  std::string(to_string(w.variant)), w.model_hash,
                                  format_double(w.values[k])});
    }
    const std::string key = e == Estimator::Transport ? "gamma" : "delta";
    summaries[key] = summary_json(w);
    models[key] = out.model->to_json();
    for (const auto& w : out.model->warnings) warn.push_back(key + " model: " + w);
    (e == Estimator::Transport ? gamma : delta) = std::move(*out.weights);
  }
  doc["weights"] = summaries;

  // Without survey weights every survey weight is 1 and delta reduces to gamma.
  const BalanceTable bt = balance_table(d, *gamma, delta ? *delta : *gamma, a.asmd_denominator);
  CsvTable wide, tall;
  wide.header = {"covariate",  "mean_trial", "mean_survey_raw", "mean_population",
                 "asmd_pre",   "asmd_post_gamma", "asmd_post_delta"};
  tall.header = {"covariate", "comparison", "asmd"};
  auto& bj = doc["balance"] = ordered_json::array();
  for (const auto& r : bt.rows) {
    wide.rows.push_back({r.covariate, format_double(r.mean_trial), format_double(r.mean_survey_raw),
                         format_double(r.mean_population), format_double(r.asmd_pre),
                         format_double(r.asmd_post_gamma), format_double(r.asmd_post_delta)});
    tall.rows.push_back({r.covariate, "pre", format_double(r.asmd_pre)});
    tall.rows.push_back({r.covariate, "post_gamma", format_double(r.asmd_post_gamma)});
    tall.rows.push_back({r.covariate, "post_delta", format_double(r.asmd_post_delta)});
    bj.push_back({{"covariate", r.covariate},
                  {"mean_trial", r.mean_trial},
                  {"mean_survey_raw", r.mean_survey_raw},
                  {"mean_population", r.mean_population},
                  {"asmd_pre", r.asmd_pre},
                  {"asmd_post_gamma", r.asmd_post_gamma},
                  {"asmd_post_delta", r.asmd_post_delta}});
  }
  doc["asmd_denominator"] = std::string(to_string(a.asmd_denominator));

  const fs::path dir = a.out_dir;
  std::vector<fs::path> outputs{dir / "estimates.json", dir / "estimates_long.csv",
                                dir / "balance.csv",    dir / "balance_long.csv",
                                dir / "weights.csv",    dir / "models.json",
                                dir / "validation.json"};
  write_text(outputs[0], doc.dump(2) + "\n");
  write_csv(outputs[1], long_csv);
  write_csv(outputs[2], wide);
  write_csv(outputs[3], tall);
  write_csv(outputs[4], weights_csv);
  write_text(outputs[5], models.dump(2) + "\n");
  write_text(outputs[6], validation_report_json(report).dump(2) + "\n");
  if (a.bootstrap > 0) {
    outputs.push_back(dir / "bootstrap_replicates.csv");
    write_csv(outputs.back(), replicates_csv);
  }
  const ordered_json manifest = make_manifest("estimate", estimate_config_json(a),
                                              {a.trial, a.survey, a.schema}, a.seed, outputs);
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return doc;
}

std::string cmd_simulate(const SimulateArgs& a) {
  const ordered_json cfg = read_json(a.config);
  auto [base, axes] = parse_grid_config(cfg);
  if (a.full_scale) {
    const ScenarioConfig p = ScenarioConfig::full_scale();
    base.population_size = p.population_size;
    base.trial_scale = p.trial_scale;
    base.survey_scale = p.survey_scale;
    base.n_replications = p.n_replications;
  }
  if (a.replications) base.n_replications = *a.replications;
  base.validate();
  const auto summaries = scenario_grid(base, axes, a.execution);
  const std::string csv = grid_csv(summaries);
  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  write_text(a.out, csv);

  ordered_json config;
  config["grid"] = cfg;
  config["full_scale"] = a.full_scale;
  config["replications"] = a.replications ? ordered_json(*a.replications) : ordered_json();
  const ordered_json manifest = make_manifest("simulate", config, {a.config}, base.seed, {a.out});
  fs::path mpath = a.out;
  mpath += ".manifest.json";
  write_text(mpath, manifest.dump(2) + "\n");
  return csv;
}

std::string cmd_toy(bool json) {
  const ToyResult r = run_toy();
  check_toy_golden(r);
  return json ? toy_report_json(r).dump(2) + "\n" : toy_report_text(r);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transport randomized-trial effects to a survey-weighted target population",
               "svytrans"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  EstimateArgs ea;
  std::string learner = "logistic", scale = "meandiff", denom = "pooled", ci = "percentile";
  bool no_survey_weights = false;
  std::optional<double> cap;
  auto* est = app.add_subcommand("estimate", "Estimate the PATE from trial and survey CSV files");
  est->add_option("--trial", ea.trial, "Trial CSV")->required()->check(CLI::ExistingFile);
  est->add_option("--survey", ea.survey, "Survey CSV")->required()->check(CLI::ExistingFile);
  est->add_option("--schema", ea.schema, "Column-role schema (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  est->add_option("--out", ea.out_dir, "Output directory")->required();
  est->add_option("--learner", learner, "Membership model: logistic or gbm")
      ->capture_default_str()
      ->check(CLI::IsMember({"logistic", "gbm"}));
  est->add_option("--scale", scale, "Effect scale: meandiff or oddsratio")
      ->capture_default_str()
      ->check(CLI::IsMember({"meandiff", "oddsratio"}));
  est->add_flag("--no-survey-weights", no_survey_weights,
                "Ignore survey weights (naive and gamma estimators only)");
  est->add_option("--covariates", ea.covariates, "Covariate subset (default: all)")
      ->delimiter(',');
  est->add_option("--bootstrap", ea.bootstrap, "Double-bootstrap iterations (0 = off)")
      ->capture_default_str();
  est->add_option("--strata", ea.strata, "Survey-weight strata for the bootstrap")
      ->capture_default_str();
  est->add_option("--ci-method", ci, "Bootstrap interval: percentile or normal")
      ->capture_default_str()
      ->check(CLI::IsMember({"percentile", "normal"}));
  est->add_option("--seed", ea.seed, "Bootstrap seed")->capture_default_str();
  est->add_option("--level", ea.level, "Confidence level")->capture_default_str();
  est->add_flag("--continuity-correction", ea.continuity_correction,
                "Odds ratios: add 0.5 to zero cells");
  est->add_option("--cap-percentile", cap, "Cap weights at this percentile (0, 100]");
  est->add_option("--asmd-denominator", denom, "pooled, trial or population")
      ->capture_default_str()
      ->check(CLI::IsMember({"pooled", "trial", "population"}));
  est->add_option("--gbm-trees", ea.gbm.n_trees, "GBM trees")->capture_default_str();
  est->add_option("--gbm-depth", ea.gbm.depth, "GBM tree depth")->capture_default_str();
  est->add_option("--gbm-shrinkage", ea.gbm.shrinkage, "GBM shrinkage")->capture_default_str();
  est->add_option("--gbm-min-child-weight", ea.gbm.min_child_weight,
                  "GBM minimum child weight")
      ->capture_default_str();
  est->add_flag("--gbm-stop-on-balance", ea.gbm.stop_on_balance,
                "Truncate the GBM ensemble at its best mean ASMD");

  SimulateArgs sa;
  bool serial = false;
  std::optional<int> reps;
  auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo scenario grid");
  sim->add_option("--config", sa.config, "Scenario grid (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  sim->add_option("--out", sa.out, "Results CSV")->required();
  sim->add_flag("--serial", serial, "Use the serial reference implementation");
  sim->add_flag("--full-scale", sa.full_scale,
                "Population 10^6, scales 0.0006/0.004, 1000 replications");
  sim->add_option("--replications", reps, "Override replications per cell");

  bool toy_json = false;
  std::string toy_dir;
  auto* toy = app.add_subcommand("toy", "Print the two-stratum worked example");
  toy->add_flag("--json", toy_json, "Print JSON");
  toy->add_option("--write-csv", toy_dir, "Also write the toy CSVs and schema here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, ee;
    const int code = app.exit(e, o, ee);
    out << o.str();
    err << ee.str();
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (est->parsed()) {
      ea.learner = parse_learner(learner);
      ea.scale = parse_effect_scale(scale);
      ea.asmd_denominator = parse_asmd_denominator(denom);
      ea.ci_method = ci == "percentile" ? CiMethod::Percentile : CiMethod::NormalApprox;
      ea.use_survey_weights = !no_survey_weights;
      ea.cap_percentile = cap;
      const ordered_json doc = cmd_estimate(ea);
      for (const auto& e : doc["estimates"]) {
        out << std::left << std::setw(10) << e["estimator"].get<std::string>() << " "
            << format_double(e["point"].get<double>()) << "  ["
            << format_double(e["ci_low"].get<double>()) << ", "
            << format_double(e["ci_high"].get<double>()) << "]\n";
      }
      out << "wrote " << ea.out_dir.string() << "\n";
    } else if (sim->parsed()) {
      sa.execution = serial ? Execution::Serial : Execution::Parallel;
      sa.replications = reps;
      cmd_simulate(sa);
      out << "wrote " << sa.out.string() << "\n";
    } else if (toy->parsed()) {
      if (!toy_dir.empty()) write_toy_csv(toy_dir);
      out << cmd_toy(toy_json);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}

}  // namespace svytrans::cli
