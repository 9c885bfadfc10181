#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "../baseline.hpp"
#include "../core.hpp"
#include "mlp.hpp"

namespace survnet::nnet {

//! Negative partial likelihood of theta = net(x) over time-sorted rows, with
//! a squared ridge penalty on every weight and bias.
class CoxNnetProblem
{
public:
  explicit CoxNnetProblem(const SurvivalDataset& data)
    : rs_(data)
    , xs_(rs_.sorted_rows(data.x()))
  {
  }

  const CoxRiskStructure& risk() const { return rs_; }
  const Matrix& sorted_inputs() const { return xs_; }

  double negative_loglik(const Mlp& net) const
  {
    Vector theta = net.predict(xs_).col(0);
    return -rs_.loglik(theta);
  }

  LossGrad loss_and_grad(const Mlp& net, double ridge) const
  {
    ForwardCache cache = net.forward(xs_);
    Vector theta = cache.output().col(0);
    Vector g_theta;
    double ll = rs_.loglik(theta, g_theta);
    Matrix d_out = -g_theta;
    LossGrad out;
    out.grad = net.backward(xs_, cache, d_out);
    out.grad += 2.0 * ridge * net.params();
    out.loss = -ll + ridge * net.params().squaredNorm();
    return out;
  }

private:
  CoxRiskStructure rs_;
  Matrix xs_;
};

//! Loss -L(beta, W, b) + ridge (||beta||^2 + ||W||^2 + ||b||^2) and its
//! gradient; data.x() holds the network inputs.
inline LossGrad coxnnet_loss_and_grad(const Mlp& net, const SurvivalDataset& data, double ridge)
{
  if (net.output_dim() != 1)
    throw std::invalid_argument("coxnnet_loss_and_grad: network must have a single output");
  if (data.n_events() == 0)
    warn("coxnnet_loss_and_grad: no events in batch; loss reduces to the penalty");
  return CoxNnetProblem(data).loss_and_grad(net, ridge);
}

inline Mlp make_coxnnet(Index p, const TrainConfig& cfg)
{
  std::vector<Index> hidden = cfg.hidden.empty() ? std::vector<Index>{default_hidden_size(p)} : cfg.hidden;
  return Mlp::make(p, hidden, 1, Activation::tanh, Activation::identity);
}

struct CoxNnetFit
{
  Standardizer transform;
  Mlp net;
  double ridge = 0.0;
  TrainTrace trace;
  std::vector<double> cv_score;  // per ridge grid value, when cross-validated
  Vector train_scores;           // h_i = exp(theta_i - shift) on the fitting data
  // Mean training theta. The partial likelihood ignores constant offsets,
  // so scores are centred to keep exp() in range.
  double shift = 0.0;

  double theta(const Eigen::Ref<const Vector>& x) const
  {
    return mlp_forward(net, transform.apply_row(x))[0];
  }
  double score(const Eigen::Ref<const Vector>& x) const { return std::exp(theta(x) - shift); }

  Vector scores(const Matrix& x) const
  {
    return (net.predict(transform.apply(x)).col(0).array() - shift).exp().matrix();
  }
};

namespace detail {

//! Trains one network on already-standardized data.
inline Mlp train_coxnnet_once(const SurvivalDataset& z, double ridge, const TrainConfig& cfg,
                              std::uint64_t seed, TrainTrace* trace_out = nullptr)
{
  Mlp net = make_coxnnet(z.p(), cfg);
  net.initialize(derive_seed(seed, "coxnnet-init"));

  SurvivalDataset fit_part = z;
  bool validate = false;
  if (cfg.validation_fraction > 0.0) {
    try {
      Split s = split_indices(z.event(), 1.0 - cfg.validation_fraction, derive_seed(seed, "coxnnet-val"));
      Index held = 0;
      for (Index i : s.test)
        held += z.event(i);
      if (held > 0) {
        fit_part = z.subset(s.train);
        validate = fit_part.n_events() > 0;
        if (!validate)
          fit_part = z;
      }
    } catch (const std::invalid_argument&) {
      // too small to hold out a validation part
    }
  }
  CoxNnetProblem problem(fit_part);
  // Held-out contribution: full-data log partial likelihood minus the
  // fitting part's, so validation risk sets span every subject.
  std::optional<CoxNnetProblem> all_problem;
  double val_events = 1.0;
  if (validate) {
    all_problem.emplace(z);
    val_events = static_cast<double>(z.n_events() - fit_part.n_events());
  }

  TrainConfig run = cfg;
  if (!validate)
    run.patience = cfg.epochs + 1;
  double last_train = 0.0;
  TrainTrace trace = train_with_early_stopping(
    net, run,
    [&](Mlp& m, Adam& opt) {
      LossGrad lg = problem.loss_and_grad(m, ridge);
      opt.step(m.params(), lg.grad);
      last_train = lg.loss;
      return lg.loss;
    },
    [&](const Mlp& m) {
      if (!validate)
        return last_train;
      return (all_problem->negative_loglik(m) - problem.negative_loglik(m)) / val_events;
    });
  if (trace_out)
    *trace_out = std::move(trace);
  return net;
}

} // namespace detail

inline std::vector<double> default_coxnnet_ridge_grid() { return {0.1, 1.0, 10.0, 100.0, 1000.0}; }

//! Standardizes, selects the ridge weight by k-fold cross-validation of the
//! held-out partial likelihood contribution, and refits on all of `data`.
inline CoxNnetFit coxnnet_fit(const SurvivalDataset& data, const TrainConfig& cfg)
{
  if (data.n_events() == 0)
    throw std::invalid_argument("coxnnet_fit: data has no events");
  CoxNnetFit fit;
  fit.transform = fit_standardizer(data.x());
  SurvivalDataset z = data.with_covariates(fit.transform.apply(data.x()));

  std::vector<double> grid = cfg.ridge_grid;
  if (grid.empty())
    grid = {cfg.ridge};
  fit.ridge = grid.front();
  if (grid.size() > 1) {
    std::vector<int> fold = stratified_folds(z.event(), cfg.cv_folds, derive_seed(cfg.seed, "coxnnet-cv"));
    CoxRiskStructure full_rs(z);
    Matrix full_x = full_rs.sorted_rows(z.x());
    fit.cv_score.assign(grid.size(), 0.0);
    int used = 0;
    for (int f = 0; f < cfg.cv_folds; ++f) {
      auto [in, out] = fold_indices(fold, f);
      Index held = 0;
      for (Index i : out)
        held += z.event(i);
      SurvivalDataset train = z.subset(in);
      if (held == 0 || train.n_events() == 0) {
        warn("coxnnet_fit: CV fold " + std::to_string(f) + " has no events; skipped");
        continue;
      }
      CoxRiskStructure train_rs(train);
      Matrix train_x = train_rs.sorted_rows(train.x());
      for (std::size_t g = 0; g < grid.size(); ++g) {
        Mlp net = detail::train_coxnnet_once(train, grid[g], cfg, derive_seed(cfg.seed, "coxnnet-fold", static_cast<std::uint64_t>(f)));
        double full_ll = full_rs.loglik(net.predict(full_x).col(0));
        double train_ll = train_rs.loglik(net.predict(train_x).col(0));
        fit.cv_score[g] += full_ll - train_ll;
      }
      ++used;
    }
    if (used == 0)
      throw std::runtime_error("coxnnet_fit: every CV fold was skipped");
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g)
      if (fit.cv_score[g] > fit.cv_score[best])
        best = g;
    fit.ridge = grid[best];
  }
  fit.net = detail::train_coxnnet_once(z, fit.ridge, cfg, derive_seed(cfg.seed, "coxnnet-final"), &fit.trace);
  Vector theta = fit.net.predict(z.x()).col(0);
  if (!theta.allFinite())
    throw std::runtime_error("coxnnet_fit: non-finite risk scores after training");
  fit.shift = theta.mean();
  fit.train_scores = (theta.array() - fit.shift).exp().matrix();
  return fit;
}

//! Survival curve of covariate row x from the shared baseline estimate.
inline SurvivalCurve coxnnet_survival(const CoxNnetFit& fit, const BaselineEstimate& base,
                                      const Eigen::Ref<const Vector>& x)
{
  return survival_from_scores(base, fit.score(x));
}

} // namespace survnet::nnet
