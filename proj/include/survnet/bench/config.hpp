#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "../models.hpp"
#include "../simgen.hpp"

//! Experiment configuration, stored as JSON:
//!
//!   {
//!     "version": 1,
//!     "name": "table1",
//!     "seed": 2024,
//!     "repetitions": 5,
//!     "train_fraction": 0.6666666666666666,
//!     "models": ["CoxL1", "Cox-nnet", "NNsurv", "NNsurv-deep"],
//!     "cells": [ {"family": "cox", "baseline": {"kind": "weibull", "shape": 2, "rate": 1.3e-7},
//!                 "n": 200, "p": 10, "k": 10, "beta_scale": 1.05, "censor_target": 0.3}, ... ],
//!     "model_options": { ... },
//!     "output_dir": "results/table1"
//!   }
//!
//! Instead of "cells", a "grid" object {"family", "baseline", "n": [...],
//! "p": [...]} expands to one cell per (n, p). Omitted keys take defaults;
//! "k" defaults to p and "beta_scale" to the family's calibrated value.

namespace survnet::bench {

inline constexpr int kConfigVersion = 1;

struct CellSpec
{
  ModelFamily family = ModelFamily::cox;
  BaselineDist baseline = BaselineDist::weibull(kWeibullShape, kWeibullRate);
  Index n = 200;
  Index p = 10;
  Index k = -1;  // -1: all p covariates relevant
  double beta_scale = std::numeric_limits<double>::quiet_NaN();  // NaN: family default
  double censor_target = 0.3;

  SimulationSpec simulation(std::uint64_t seed) const
  {
    SimulationSpec s;
    s.family = family;
    s.baseline = baseline;
    s.n = n;
    s.p = p;
    s.k = k < 0 ? p : k;
    s.beta_scale = std::isnan(beta_scale) ? default_beta_scale(family) : beta_scale;
    s.censor_target = censor_target;
    s.seed = seed;
    s.validate();
    return s;
  }

  //! Stable identifier used for seeding and resume bookkeeping.
  std::string key() const
  {
    std::ostringstream ss;
    ss << to_string(family) << '/' << baseline.name() << '/' << n << '/' << p;
    return ss.str();
  }
};

struct ExperimentConfig
{
  int version = kConfigVersion;
  std::string name = "experiment";
  std::uint64_t seed = 2024;
  int repetitions = 5;
  double train_fraction = 2.0 / 3.0;
  std::vector<ModelKind> models = all_models();
  std::vector<CellSpec> cells;
  ModelOptions options{};
  std::string output_dir;

  void validate() const
  {
    if (version != kConfigVersion)
      throw std::invalid_argument("config: unsupported version " + std::to_string(version));
    if (cells.empty())
      throw std::invalid_argument("config: the simulation grid is empty");
    if (repetitions < 1)
      throw std::invalid_argument("config: repetitions must be >= 1");
    if (models.empty())
      throw std::invalid_argument("config: no models listed");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
      throw std::invalid_argument("config: train_fraction must lie in (0,1)");
    std::set<std::string> keys;
    for (const auto& c : cells) {
      c.simulation(0);
      if (!keys.insert(c.key()).second)
        throw std::invalid_argument("config: duplicate cell " + c.key() +
                                    " (cells must differ in family, baseline kind, n or p)");
    }
  }
};

//! Value of SURVNET_OUTPUT_DIR, or "survnet-results".
inline std::string default_output_dir()
{
  const char* env = std::getenv("SURVNET_OUTPUT_DIR");
  return env && *env ? std::string(env) : std::string("survnet-results");
}

inline std::vector<CellSpec> expand_grid(ModelFamily family, const BaselineDist& baseline,
                                         const std::vector<Index>& ns, const std::vector<Index>& ps)
{
  std::vector<CellSpec> cells;
  for (Index n : ns)
    for (Index p : ps) {
      CellSpec c;
      c.family = family;
      c.baseline = baseline;
      c.n = n;
      c.p = p;
      cells.push_back(c);
    }
  return cells;
}

//! Built-in configurations: table1 (Cox / Weibull), table2 (AH / log-normal,
//! sigma = 0.7) and table3 (AFT / log-normal), each over n in {200, 1000}
//! and p in {10, 100, 1000}.
inline ExperimentConfig builtin_config(const std::string& name)
{
  ExperimentConfig cfg;
  cfg.name = name;
  const std::vector<Index> ns{200, 1000}, ps{10, 100, 1000};
  if (name == "table1")
    cfg.cells = expand_grid(ModelFamily::cox, BaselineDist::weibull(kWeibullShape, kWeibullRate), ns, ps);
  else if (name == "table2")
    cfg.cells = expand_grid(ModelFamily::ah, BaselineDist::lognormal(kLogNormalMu, kLogNormalSigmaAH), ns, ps);
  else if (name == "table3")
    cfg.cells = expand_grid(ModelFamily::aft, BaselineDist::lognormal(kLogNormalMu, kLogNormalSigma), ns, ps);
  else
    throw std::invalid_argument("unknown built-in config '" + name + "' (expected table1, table2 or table3)");
  cfg.output_dir = default_output_dir() + "/" + name;
  return cfg;
}

// ---- JSON mapping -------------------------------------------------------

namespace detail {

using nlohmann::json;

inline json baseline_to_json(const BaselineDist& b)
{
  if (b.kind == BaselineDist::Kind::weibull)
    return {{"kind", "weibull"}, {"shape", b.shape}, {"rate", b.rate}};
  return {{"kind", "lognormal"}, {"mu", b.mu}, {"sigma", b.sigma}};
}

inline BaselineDist baseline_from_json(const json& j)
{
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "weibull")
    return BaselineDist::weibull(j.value("shape", kWeibullShape), j.value("rate", kWeibullRate));
  if (kind == "lognormal")
    return BaselineDist::lognormal(j.value("mu", kLogNormalMu), j.value("sigma", kLogNormalSigma));
  throw std::invalid_argument("config: unknown baseline kind '" + kind + "'");
}

inline BaselineDist default_baseline(ModelFamily f)
{
  switch (f) {
    case ModelFamily::cox: return BaselineDist::weibull(kWeibullShape, kWeibullRate);
    case ModelFamily::ah: return BaselineDist::lognormal(kLogNormalMu, kLogNormalSigmaAH);
    case ModelFamily::aft: return BaselineDist::lognormal(kLogNormalMu, kLogNormalSigma);
  }
  return {};
}

inline json train_to_json(const nnet::TrainConfig& c)
{
  return {{"learning_rate", c.learning_rate}, {"ridge", c.ridge},
          {"ridge_grid", c.ridge_grid},       {"cv_folds", c.cv_folds},
          {"epochs", c.epochs},               {"batch_size", c.batch_size},
          {"patience", c.patience},           {"validation_fraction", c.validation_fraction},
          {"hidden", c.hidden}};
}

inline nnet::TrainConfig train_from_json(const json& j, nnet::TrainConfig c)
{
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.ridge = j.value("ridge", c.ridge);
  c.ridge_grid = j.value("ridge_grid", c.ridge_grid);
  c.cv_folds = j.value("cv_folds", c.cv_folds);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.patience = j.value("patience", c.patience);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.hidden = j.value("hidden", c.hidden);
  if (!(c.learning_rate > 0.0) || c.epochs < 1 || c.batch_size < 1 || c.patience < 1 || c.cv_folds < 2 ||
      c.validation_fraction < 0.0 || c.validation_fraction >= 1.0)
    throw std::invalid_argument("config: invalid network training settings");
  return c;
}

inline json options_to_json(const ModelOptions& o)
{
  json j{{"lasso_folds", o.lasso_folds},
         {"lasso_tol", o.lasso.tol},
         {"lasso_max_iter", o.lasso.max_iter},
         {"gl_kappa", o.gl_kappa},
         {"intervals", o.intervals},
         {"coxnnet", train_to_json(o.coxnnet)},
         {"nnsurv", train_to_json(o.nnsurv)}};
  if (o.lasso_lambda)
    j["lasso_lambda"] = *o.lasso_lambda;
  return j;
}

inline ModelOptions options_from_json(const json& j)
{
  ModelOptions o;
  o.lasso_folds = j.value("lasso_folds", o.lasso_folds);
  o.lasso.tol = j.value("lasso_tol", o.lasso.tol);
  o.lasso.max_iter = j.value("lasso_max_iter", o.lasso.max_iter);
  if (j.contains("lasso_lambda") && !j["lasso_lambda"].is_null())
    o.lasso_lambda = j["lasso_lambda"].get<double>();
  o.gl_kappa = j.value("gl_kappa", o.gl_kappa);
  o.intervals = j.value("intervals", o.intervals);
  if (j.contains("coxnnet"))
    o.coxnnet = train_from_json(j["coxnnet"], o.coxnnet);
  if (j.contains("nnsurv"))
    o.nnsurv = train_from_json(j["nnsurv"], o.nnsurv);
  if (o.lasso_folds < 2 || o.intervals < 2 || !(o.gl_kappa >= 0.0))
    throw std::invalid_argument("config: invalid model options");
  return o;
}

inline CellSpec cell_from_json(const json& j)
{
  CellSpec c;
  c.family = parse_family(j.value("family", std::string("cox")));
  c.baseline = j.contains("baseline") ? baseline_from_json(j["baseline"]) : default_baseline(c.family);
  c.n = j.at("n").get<Index>();
  c.p = j.at("p").get<Index>();
  if (j.contains("k") && !j["k"].is_null())
    c.k = j["k"].get<Index>();
  if (j.contains("beta_scale") && !j["beta_scale"].is_null())
    c.beta_scale = j["beta_scale"].get<double>();
  c.censor_target = j.value("censor_target", c.censor_target);
  return c;
}

inline json cell_to_json(const CellSpec& c)
{
  json j{{"family", to_string(c.family)}, {"baseline", baseline_to_json(c.baseline)},
         {"n", c.n},                      {"p", c.p},
         {"censor_target", c.censor_target}};
  j["k"] = c.k < 0 ? json(nullptr) : json(c.k);
  j["beta_scale"] = std::isnan(c.beta_scale) ? json(nullptr) : json(c.beta_scale);
  return j;
}

} // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& cfg)
{
  nlohmann::json models = nlohmann::json::array();
  for (ModelKind m : cfg.models)
    models.push_back(model_name(m));
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : cfg.cells)
    cells.push_back(detail::cell_to_json(c));
  return {{"version", cfg.version},
          {"name", cfg.name},
          {"seed", cfg.seed},
          {"repetitions", cfg.repetitions},
          {"train_fraction", cfg.train_fraction},
          {"models", models},
          {"cells", cells},
          {"model_options", detail::options_to_json(cfg.options)},
          {"output_dir", cfg.output_dir}};
}

inline ExperimentConfig config_from_json(const nlohmann::json& j)
{
  ExperimentConfig cfg;
  try {
    if (!j.contains("version"))
      throw std::invalid_argument("config: missing 'version'");
    cfg.version = j.at("version").get<int>();
    if (cfg.version != kConfigVersion)
      throw std::invalid_argument("config: unsupported version " + std::to_string(cfg.version));
    cfg.name = j.value("name", cfg.name);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.repetitions = j.value("repetitions", cfg.repetitions);
    cfg.train_fraction = j.value("train_fraction", cfg.train_fraction);
    if (j.contains("models")) {
      cfg.models.clear();
      for (const auto& m : j["models"])
        cfg.models.push_back(parse_model(m.get<std::string>()));
    }
    if (j.contains("cells"))
      for (const auto& c : j["cells"])
        cfg.cells.push_back(detail::cell_from_json(c));
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      ModelFamily f = parse_family(g.value("family", std::string("cox")));
      BaselineDist b = g.contains("baseline") ? detail::baseline_from_json(g["baseline"]) : detail::default_baseline(f);
      auto more = expand_grid(f, b, g.value("n", std::vector<Index>{200, 1000}),
                              g.value("p", std::vector<Index>{10, 100, 1000}));
      for (auto& c : more) {
        if (g.contains("censor_target"))
          c.censor_target = g["censor_target"].get<double>();
        if (g.contains("beta_scale") && !g["beta_scale"].is_null())
          c.beta_scale = g["beta_scale"].get<double>();
      }
      cfg.cells.insert(cfg.cells.end(), more.begin(), more.end());
    }
    if (j.contains("model_options"))
      cfg.options = detail::options_from_json(j["model_options"]);
    cfg.output_dir = j.value("output_dir", default_output_dir() + "/" + cfg.name);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  return config_from_json(j);
}

inline void save_config(const ExperimentConfig& cfg, const std::string& path)
{
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot create '" + path + "'");
  out << config_to_json(cfg).dump(2) << '\n';
}

} // namespace survnet::bench
