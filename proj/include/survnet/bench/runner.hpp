#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "../metrics.hpp"
#include "../models.hpp"
#include "../simgen.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "results.hpp"

namespace survnet::bench {

struct RunOptions
{
  //! Stop after this many newly written rows (negative: run to completion).
  //! Used to exercise interruption and resume.
  long long stop_after = -1;
  //! Progress messages; ignored when empty.
  std::function<void(const std::string&)> log{};
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void append_error(const std::string& dir, const std::string& message)
{
  std::ofstream out(std::filesystem::path(dir) / "errors.log", std::ios::app);
  out << message << '\n';
}

//! Shared driver: for each repetition, `prepare` produces (train, test) and
//! optionally the reference metrics; every missing row is computed and
//! appended as soon as it is known.
struct Job
{
  ResultRow prototype;  // family, baseline, n, p filled in
  bool with_reference = false;
  std::function<void(std::uint64_t seed, SurvivalDataset& train, SurvivalDataset& test, MetricReport* reference)>
    prepare;
};

class Driver
{
public:
  Driver(const ExperimentConfig& cfg, const RunOptions& run)
    : cfg_(cfg)
    , run_(run)
    , dir_(cfg.output_dir.empty() ? default_output_dir() : cfg.output_dir)
  {
    std::filesystem::create_directories(dir_);
    store_.emplace((std::filesystem::path(dir_) / "results.csv").string());
  }

  const std::string& output_dir() const { return dir_; }
  const ResultStore& store() const { return *store_; }
  bool stopped() const { return stopped_; }

  //! Rows of `job` in canonical order, after computing the missing ones.
  std::vector<ResultRow> run(const Job& job, const std::string& seed_tag)
  {
    std::vector<ResultRow> out;
    for (int rep = 0; rep < cfg_.repetitions; ++rep) {
      const std::uint64_t seed = derive_seed(cfg_.seed, seed_tag, static_cast<std::uint64_t>(rep));
      std::vector<ResultRow> wanted;
      if (job.with_reference)
        wanted.push_back(row(job, rep, seed, kReferenceName));
      for (ModelKind m : cfg_.models)
        wanted.push_back(row(job, rep, seed, model_name(m)));

      bool missing = false;
      for (const auto& w : wanted)
        missing = missing || !store_->contains(w);
      if (missing && !stopped_)
        compute(job, seed, wanted);
      for (const auto& w : wanted)
        for (const auto& r : store_->rows())
          if (r.key() == w.key()) {
            out.push_back(r);
            break;
          }
    }
    return out;
  }

private:
  ResultRow row(const Job& job, int rep, std::uint64_t seed, const std::string& model) const
  {
    ResultRow r = job.prototype;
    r.rep = rep;
    r.seed = seed;
    r.model = model;
    return r;
  }

  void emit(ResultRow r)
  {
    if (stopped_)
      return;
    store_->append(r);
    ++written_;
    if (run_.log)
      run_.log(r.cell_key() + " rep " + std::to_string(r.rep) + " " + r.model + ": C_td " +
               io::format_double(r.c_td) + ", IBS " + io::format_double(r.ibs));
    if (run_.stop_after >= 0 && written_ >= run_.stop_after)
      stopped_ = true;
  }

  void fail(ResultRow r, const std::string& what)
  {
    if (stopped_)
      return;
    append_error(dir_, r.cell_key() + " rep " + std::to_string(r.rep) + " " + r.model + ": " + what);
    r.c_td = r.ibs = std::numeric_limits<double>::quiet_NaN();
    emit(r);
  }

  void compute(const Job& job, std::uint64_t seed, const std::vector<ResultRow>& wanted)
  {
    auto t0 = std::chrono::steady_clock::now();
    SurvivalDataset train, test;
    MetricReport reference;
    try {
      job.prepare(seed, train, test, job.with_reference ? &reference : nullptr);
    } catch (const std::exception& e) {
      for (const auto& w : wanted)
        if (!store_->contains(w))
          fail(w, std::string("data preparation failed: ") + e.what());
      return;
    }
    double prep_seconds = seconds_since(t0);
    std::size_t k = 0;
    if (job.with_reference) {
      ResultRow r = wanted[k++];
      if (!store_->contains(r)) {
        r.c_td = reference.c_td;
        r.ibs = reference.ibs;
        r.wall_seconds = prep_seconds;
        emit(r);
      }
    }
    for (ModelKind m : cfg_.models) {
      ResultRow r = wanted[k++];
      if (store_->contains(r) || stopped_)
        continue;
      auto t1 = std::chrono::steady_clock::now();
      try {
        FittedModel fitted = fit_model(m, train, cfg_.options, derive_seed(seed, model_name(m)));
        MetricReport rep_m = evaluate_predictions(fitted.survival_curves(test.x()), test);
        r.c_td = rep_m.c_td;
        r.ibs = rep_m.ibs;
        r.wall_seconds = seconds_since(t1);
        emit(r);
      } catch (const std::exception& e) {
        r.wall_seconds = seconds_since(t1);
        fail(r, e.what());
      }
    }
  }

  const ExperimentConfig& cfg_;
  RunOptions run_;
  std::string dir_;
  std::optional<ResultStore> store_;
  long long written_ = 0;
  bool stopped_ = false;
};

} // namespace detail

//! Simulates every cell and repetition, fits the configured models on a
//! stratified train split and scores them (and the exact model) on the test
//! split. Rows are appended to <output_dir>/results.csv as they complete;
//! rows already present are reused, so an interrupted run resumes where it
//! stopped. Returns the rows for the whole grid in canonical order.
inline std::vector<ResultRow> run_grid(const ExperimentConfig& cfg, const RunOptions& run = {})
{
  cfg.validate();
  detail::Driver driver(cfg, run);
  std::vector<ResultRow> all;
  for (const CellSpec& cell : cfg.cells) {
    detail::Job job;
    job.prototype.family = to_string(cell.family);
    job.prototype.baseline = cell.baseline.name();
    job.prototype.n = cell.n;
    job.prototype.p = cell.p;
    job.with_reference = true;
    job.prepare = [&](std::uint64_t seed, SurvivalDataset& train, SurvivalDataset& test, MetricReport* ref) {
      SimulatedDataset sim = generate(cell.simulation(seed));
      Split s = split_indices(sim.data.event(), cfg.train_fraction, derive_seed(seed, "split"));
      train = sim.data.subset(s.train);
      test = sim.data.subset(s.test);
      if (ref)
        *ref = reference_metrics(sim, test);
    };
    auto rows = driver.run(job, cell.key());
    all.insert(all.end(), rows.begin(), rows.end());
  }
  return all;
}

//! Fits the configured models on a dataset file over `repetitions` random
//! stratified splits. No reference row: the truth is unknown.
inline std::vector<ResultRow> run_real(const std::string& path, const ExperimentConfig& cfg_in,
                                       const RunOptions& run = {})
{
  ExperimentConfig cfg = cfg_in;
  if (cfg.repetitions < 1 || cfg.models.empty() || !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
    throw std::invalid_argument("run_real: invalid configuration");
  DatasetFile file = load_dataset_file(path);
  detail::Driver driver(cfg, run);
  detail::Job job;
  job.prototype.family = "real";
  job.prototype.baseline = std::filesystem::path(path).stem().string();
  job.prototype.n = file.data.n();
  job.prototype.p = file.data.p();
  job.prepare = [&](std::uint64_t seed, SurvivalDataset& train, SurvivalDataset& test, MetricReport*) {
    Split s = split_indices(file.data.event(), cfg.train_fraction, derive_seed(seed, "split"));
    train = file.data.subset(s.train);
    test = file.data.subset(s.test);
  };
  return driver.run(job, job.prototype.cell_key());
}

} // namespace survnet::bench
