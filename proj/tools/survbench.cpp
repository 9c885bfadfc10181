//! survbench: simulate data, fit and evaluate models, run benchmark grids.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <survnet/bench/config.hpp>
#include <survnet/bench/csv.hpp>
#include <survnet/bench/runner.hpp>
#include <survnet/bench/table.hpp>
#include <survnet/metrics.hpp>
#include <survnet/serialize.hpp>
#include <survnet/simgen.hpp>

namespace sb = survnet::bench;
using survnet::Index;

namespace {

struct SimulateArgs
{
  std::string family = "cox";
  std::string baseline;
  double shape = survnet::kWeibullShape;
  double rate = survnet::kWeibullRate;
  double mu = survnet::kLogNormalMu;
  std::optional<double> sigma;
  Index n = 1000;
  Index p = 10;
  std::optional<Index> k;
  std::optional<double> beta_scale;
  double censor = 0.3;
  std::uint64_t seed = 1;
  std::string out;
};

struct FitArgs
{
  std::string data;
  std::string model = "CoxL1";
  std::string out;
  std::uint64_t seed = 1;
  std::optional<double> lambda;
  std::optional<int> epochs;
  std::optional<double> learning_rate;
  std::optional<double> ridge;
  double kappa = 1.0;
  std::size_t intervals = 20;
};

struct EvalArgs
{
  std::string model;
  std::string data;
};

struct BenchArgs
{
  std::string config;
  std::string data;
  std::string print_config;
  std::string format = "markdown";
  std::string output_dir;
  std::optional<int> repetitions;
  std::vector<std::string> models;
  std::uint64_t seed = 2024;
  bool quiet = false;
};

struct ReproduceArgs
{
  std::string name;
  std::string format = "markdown";
  std::string output_dir;
  std::optional<int> repetitions;
  std::vector<Index> n_filter;
  std::vector<Index> p_filter;
  std::vector<std::string> models;
  bool quiet = false;
};

int do_simulate(const SimulateArgs& a)
{
  survnet::SimulationSpec s;
  s.family = survnet::parse_family(a.family);
  std::string base = a.baseline.empty() ? (s.family == survnet::ModelFamily::cox ? "weibull" : "lognormal") : a.baseline;
  if (base == "weibull")
    s.baseline = survnet::BaselineDist::weibull(a.shape, a.rate);
  else if (base == "lognormal")
    s.baseline = survnet::BaselineDist::lognormal(
      a.mu, a.sigma.value_or(s.family == survnet::ModelFamily::ah ? survnet::kLogNormalSigmaAH : survnet::kLogNormalSigma));
  else
    throw std::invalid_argument("unknown baseline '" + base + "' (expected weibull or lognormal)");
  s.n = a.n;
  s.p = a.p;
  s.k = a.k.value_or(a.p);
  s.beta_scale = a.beta_scale.value_or(survnet::default_beta_scale(s.family));
  s.censor_target = a.censor;
  s.seed = a.seed;
  auto sim = survnet::generate(s);
  if (a.out.empty() || a.out == "-")
    sb::write_dataset(std::cout, sim.data);
  else
    sb::save_csv(sim.data, a.out);
  std::size_t events = 0;
  for (int e : sim.data.event())
    events += static_cast<std::size_t>(e);
  std::cerr << "simulated n=" << s.n << " p=" << s.p << ", censored fraction "
            << 1.0 - static_cast<double>(events) / static_cast<double>(s.n) << '\n';
  return 0;
}

int do_fit(const FitArgs& a)
{
  auto data = sb::load_csv(a.data);
  survnet::ModelOptions opts;
  opts.lasso_lambda = a.lambda;
  opts.gl_kappa = a.kappa;
  opts.intervals = a.intervals;
  for (auto* c : {&opts.coxnnet, &opts.nnsurv}) {
    if (a.epochs)
      c->epochs = *a.epochs;
    if (a.learning_rate)
      c->learning_rate = *a.learning_rate;
    if (a.ridge) {
      c->ridge = *a.ridge;
      c->ridge_grid.clear();
    }
  }
  auto kind = survnet::parse_model(a.model);
  auto fitted = survnet::fit_model(kind, data, opts, a.seed);
  std::ofstream out(a.out);
  if (!out)
    throw std::runtime_error("cannot create '" + a.out + "'");
  survnet::save_model(fitted, out);
  std::cerr << "fitted " << fitted.name() << " on n=" << data.n() << " p=" << data.p() << " -> " << a.out << '\n';
  return 0;
}

int do_eval(const EvalArgs& a)
{
  std::ifstream in(a.model);
  if (!in)
    throw std::runtime_error("cannot open model '" + a.model + "'");
  auto model = survnet::load_model(in);
  auto data = sb::load_csv(a.data);
  auto rep = survnet::evaluate_predictions(model.survival_curves(data.x()), data);
  std::cout << "model " << model.name() << "\nn " << data.n() << "\nc_td " << sb::detail::fixed4(rep.c_td)
            << "\nibs " << sb::detail::fixed4(rep.ibs) << '\n';
  return 0;
}

void apply_overrides(sb::ExperimentConfig& cfg, const std::string& output_dir, std::optional<int> reps,
                     const std::vector<std::string>& models)
{
  if (!output_dir.empty())
    cfg.output_dir = output_dir;
  if (reps)
    cfg.repetitions = *reps;
  if (!models.empty()) {
    cfg.models.clear();
    for (const auto& m : models)
      cfg.models.push_back(survnet::parse_model(m));
  }
}

void write_tables(const std::vector<sb::ResultRow>& rows, const std::string& dir, const std::string& format)
{
  auto fmt = sb::parse_table_format(format);
  std::string table = sb::emit_table(rows, fmt);
  auto path = std::filesystem::path(dir) / (fmt == sb::TableFormat::csv ? "table.csv" : "table.md");
  std::ofstream out(path);
  out << table;
  std::cout << table;
  std::cerr << "raw rows: " << (std::filesystem::path(dir) / "results.csv").string() << ", table: " << path.string()
            << '\n';
}

sb::RunOptions run_options(bool quiet)
{
  sb::RunOptions r;
  if (!quiet)
    r.log = [](const std::string& msg) { std::cerr << msg << '\n'; };
  return r;
}

int do_bench(const BenchArgs& a)
{
  if (!a.print_config.empty()) {
    std::cout << sb::config_to_json(sb::builtin_config(a.print_config)).dump(2) << '\n';
    return 0;
  }
  if (!a.data.empty()) {
    sb::ExperimentConfig cfg = a.config.empty() ? sb::ExperimentConfig{} : sb::load_config(a.config);
    if (a.config.empty()) {
      cfg.seed = a.seed;
      cfg.output_dir = sb::default_output_dir() + "/" + std::filesystem::path(a.data).stem().string();
    }
    apply_overrides(cfg, a.output_dir, a.repetitions, a.models);
    auto rows = sb::run_real(a.data, cfg, run_options(a.quiet));
    write_tables(rows, cfg.output_dir, a.format);
    return 0;
  }
  if (a.config.empty())
    throw std::invalid_argument("bench needs --config, --data or --print-config");
  auto cfg = sb::load_config(a.config);
  apply_overrides(cfg, a.output_dir, a.repetitions, a.models);
  auto rows = sb::run_grid(cfg, run_options(a.quiet));
  write_tables(rows, cfg.output_dir, a.format);
  return 0;
}

int do_reproduce(const ReproduceArgs& a)
{
  auto cfg = sb::builtin_config(a.name);
  apply_overrides(cfg, a.output_dir, a.repetitions, a.models);
  auto keep = [](const std::vector<Index>& filter, Index v) {
    return filter.empty() || std::find(filter.begin(), filter.end(), v) != filter.end();
  };
  std::vector<sb::CellSpec> cells;
  for (const auto& c : cfg.cells)
    if (keep(a.n_filter, c.n) && keep(a.p_filter, c.p))
      cells.push_back(c);
  cfg.cells = cells;
  auto rows = sb::run_grid(cfg, run_options(a.quiet));
  write_tables(rows, cfg.output_dir, a.format);
  return 0;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"survbench: survival simulation and model benchmarking"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "draw a censored dataset and write it as CSV");
  s->add_option("--family", sim.family, "cox, ah or aft")->capture_default_str();
  s->add_option("--baseline", sim.baseline, "weibull or lognormal (default: weibull for cox, else lognormal)");
  s->add_option("--shape", sim.shape, "Weibull shape")->capture_default_str();
  s->add_option("--rate", sim.rate, "Weibull rate")->capture_default_str();
  s->add_option("--mu", sim.mu, "log-normal location")->capture_default_str();
  s->add_option("--sigma", sim.sigma, "log-normal scale (default 0.7 for ah, 0.176 otherwise)");
  s->add_option("-n,--n", sim.n, "subjects")->capture_default_str();
  s->add_option("-p,--p", sim.p, "covariates")->capture_default_str();
  s->add_option("--k", sim.k, "relevant covariates (default p)");
  s->add_option("--beta-scale", sim.beta_scale, "coefficient norm (default: calibrated per family)");
  s->add_option("--censor", sim.censor, "target censoring fraction")->capture_default_str();
  s->add_option("--seed", sim.seed, "random seed")->capture_default_str();
  s->add_option("-o,--out", sim.out, "output CSV (default stdout)");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "fit a model on a dataset and save it");
  f->add_option("--data", fit.data, "dataset CSV")->required();
  f->add_option("--model", fit.model, "CoxL1, Cox-nnet, NNsurv or NNsurv-deep")->capture_default_str();
  f->add_option("-o,--out", fit.out, "model file")->required();
  f->add_option("--seed", fit.seed, "random seed")->capture_default_str();
  f->add_option("--lambda", fit.lambda, "fixed lasso penalty (default: cross-validated)");
  f->add_option("--epochs", fit.epochs, "network training epochs");
  f->add_option("--lr", fit.learning_rate, "network learning rate");
  f->add_option("--ridge", fit.ridge, "fixed network ridge weight (default: cross-validated)");
  f->add_option("--kappa", fit.kappa, "bandwidth selection constant")->capture_default_str();
  f->add_option("--intervals", fit.intervals, "discrete-time intervals")->capture_default_str();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "score a saved model on a dataset");
  e->add_option("--model", ev.model, "model file")->required();
  e->add_option("--data", ev.data, "dataset CSV")->required();

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "run a configured grid (or a dataset file) and emit tables");
  b->add_option("--config", bench.config, "JSON experiment config");
  b->add_option("--data", bench.data, "dataset CSV: fit every model over repeated splits");
  b->add_option("--print-config", bench.print_config, "print a built-in config (table1|table2|table3) and exit");
  b->add_option("--format", bench.format, "csv or markdown")->capture_default_str();
  b->add_option("--output-dir", bench.output_dir, "override the output directory");
  b->add_option("--reps", bench.repetitions, "override repetitions");
  b->add_option("--models", bench.models, "override the model list");
  b->add_option("--seed", bench.seed, "seed for --data runs without a config")->capture_default_str();
  b->add_flag("-q,--quiet", bench.quiet, "no progress output");

  ReproduceArgs rep;
  auto* r = app.add_subcommand("reproduce", "run a built-in simulation grid");
  r->add_option("name", rep.name, "table1, table2 or table3")->required();
  r->add_option("--format", rep.format, "csv or markdown")->capture_default_str();
  r->add_option("--output-dir", rep.output_dir, "override the output directory");
  r->add_option("--reps", rep.repetitions, "override repetitions");
  r->add_option("--n", rep.n_filter, "only these sample sizes");
  r->add_option("--p", rep.p_filter, "only these dimensions");
  r->add_option("--models", rep.models, "override the model list");
  r->add_flag("-q,--quiet", rep.quiet, "no progress output");

  CLI11_PARSE(app, argc, argv);
  try {
    if (s->parsed())
      return do_simulate(sim);
    if (f->parsed())
      return do_fit(fit);
    if (e->parsed())
      return do_eval(ev);
    if (b->parsed())
      return do_bench(bench);
    if (r->parsed())
      return do_reproduce(rep);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 1;
}
