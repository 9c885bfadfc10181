#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"

namespace survnet {

//! sum_i delta_i [beta^T x_i - log sum_{l in R_i} exp(beta^T x_l)]
inline double partial_loglik(const SurvivalDataset& data, const Vector& beta)
{
  if (beta.size() != data.p())
    throw std::invalid_argument("partial_loglik: coefficient length does not match covariates");
  if (!data.x().allFinite())
    throw std::domain_error("partial_loglik: non-finite covariates");
  CoxRiskStructure rs(data);
  Matrix xs = rs.sorted_rows(data.x());
  return rs.loglik(xs * beta);
}

inline Vector partial_loglik_grad(const SurvivalDataset& data, const Vector& beta)
{
  if (beta.size() != data.p())
    throw std::invalid_argument("partial_loglik_grad: coefficient length does not match covariates");
  if (!data.x().allFinite())
    throw std::domain_error("partial_loglik_grad: non-finite covariates");
  CoxRiskStructure rs(data);
  Matrix xs = rs.sorted_rows(data.x());
  Vector g_eta;
  rs.loglik(xs * beta, g_eta);
  return xs.transpose() * g_eta;
}

struct LassoOptions
{
  double tol = 1e-7;       // relative objective change
  int max_iter = 10000;
  bool standardize = true;
};

struct CoxFit
{
  Vector beta_hat;          // on the standardized scale
  double lambda = 0.0;
  Standardizer transform;
  int iterations = 0;
  double objective = 0.0;
  bool converged = false;
  std::vector<double> objective_trace;

  Index p() const { return beta_hat.size(); }
  Index nonzeros() const { return (beta_hat.array() != 0.0).count(); }

  //! beta_hat^T standardize(x)
  double linear_predictor(const Eigen::Ref<const Vector>& x) const
  {
    return transform.apply_row(x).dot(beta_hat);
  }
};

inline double soft_threshold(double v, double t)
{
  if (v > t)
    return v - t;
  if (v < -t)
    return v + t;
  return 0.0;
}

//! Penalised negative partial likelihood on time-sorted, standardized data.
class CoxLassoProblem
{
public:
  CoxLassoProblem(const SurvivalDataset& data, bool standardize)
    : rs_(data)
  {
    if (!data.x().allFinite())
      throw std::domain_error("fit_lasso: non-finite covariates");
    transform_ = standardize ? fit_standardizer(data.x()) : Standardizer::identity(data.p());
    xs_ = rs_.sorted_rows(transform_.apply(data.x()));
  }

  const Standardizer& transform() const { return transform_; }
  Index p() const { return xs_.cols(); }

  //! Smooth part f(beta) = -PL(beta).
  double value(const Vector& beta) const { return -rs_.loglik(xs_ * beta); }

  double value(const Vector& beta, Vector& grad) const
  {
    Vector g_eta;
    double ll = rs_.loglik(xs_ * beta, g_eta);
    grad = -(xs_.transpose() * g_eta);
    return -ll;
  }

  //! Smallest lambda with an all-zero solution: max_j |dPL/dbeta_j (0)|.
  double lambda_max() const
  {
    Vector g;
    value(Vector::Zero(p()), g);
    return g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
  }

  //! Monotone accelerated proximal gradient (FISTA with function-value
  //! restart) and backtracking on the step size.
  CoxFit solve(double lambda, const LassoOptions& opts, const Vector* warm = nullptr,
               double* step_hint = nullptr) const
  {
    if (!(lambda >= 0.0))
      throw std::invalid_argument("fit_lasso: lambda must be nonnegative");
    const Index d = p();
    Vector x = warm ? *warm : Vector::Zero(d);
    auto objective = [&](const Vector& b, double f) { return f + lambda * b.lpNorm<1>(); };

    double fx = value(x);
    double Fx = objective(x, fx);
    CoxFit fit;
    fit.lambda = lambda;
    fit.transform = transform_;
    fit.objective_trace.push_back(Fx);

    double step = step_hint && *step_hint > 0.0 ? *step_hint : 1.0;
    Vector y = x, x_prev = x, gy, z;
    double t = 1.0;
    bool momentum = false;
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
      double fy = value(y, gy);
      double fz = 0.0;
      for (int bt = 0; bt < 200; ++bt) {
        z = y - step * gy;
        for (Index j = 0; j < d; ++j)
          z[j] = soft_threshold(z[j], step * lambda);
        fz = value(z);
        Vector diff = z - y;
        double bound = fy + gy.dot(diff) + diff.squaredNorm() / (2.0 * step);
        if (fz <= bound + 1e-12 * std::abs(fy))
          break;
        step *= 0.5;
      }
      double Fz = objective(z, fz);
      if (!std::isfinite(Fz))
        throw std::runtime_error("fit_lasso: objective diverged (non-finite) at iteration " +
                                 std::to_string(iter));
      if (Fz > Fx) {
        if (momentum) {
          y = x;
          t = 1.0;
          momentum = false;
          continue;
        }
        fit.converged = true;  // plain prox step cannot improve: stationary
        break;
      }
      double rel = (Fx - Fz) / (std::abs(Fx) + 1e-12);
      x_prev = x;
      x = z;
      Fx = Fz;
      fit.objective_trace.push_back(Fx);
      if (rel < opts.tol) {
        fit.converged = true;
        ++iter;
        break;
      }
      double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = x + ((t - 1.0) / t_next) * (x - x_prev);
      t = t_next;
      momentum = true;
    }
    if (step_hint)
      *step_hint = step;
    fit.beta_hat = std::move(x);
    fit.iterations = iter;
    fit.objective = Fx;
    return fit;
  }

private:
  CoxRiskStructure rs_;
  Standardizer transform_;
  Matrix xs_;
};

//! Minimizes -partial_loglik + lambda ||beta||_1.
inline CoxFit fit_lasso(const SurvivalDataset& data, double lambda, const LassoOptions& opts = {})
{
  CoxLassoProblem problem(data, opts.standardize);
  return problem.solve(lambda, opts);
}

//! `count` log-spaced values from lambda_max down to ratio * lambda_max.
inline std::vector<double> lambda_path(double lambda_max, int count = 20, double ratio = 0.01)
{
  std::vector<double> path;
  if (count <= 0)
    return path;
  if (count == 1 || lambda_max <= 0.0)
    return std::vector<double>(static_cast<std::size_t>(count), std::max(lambda_max, 0.0));
  for (int k = 0; k < count; ++k)
    path.push_back(lambda_max * std::pow(ratio, static_cast<double>(k) / (count - 1)));
  return path;
}

inline std::vector<double> default_lambda_path(const SurvivalDataset& data, const LassoOptions& opts = {})
{
  CoxLassoProblem problem(data, opts.standardize);
  return lambda_path(problem.lambda_max());
}

//! Fits along a path (sorted descending by the caller) with warm starts.
inline std::vector<CoxFit> fit_lasso_path(const SurvivalDataset& data, const std::vector<double>& path,
                                          const LassoOptions& opts = {})
{
  CoxLassoProblem problem(data, opts.standardize);
  std::vector<CoxFit> fits;
  Vector warm = Vector::Zero(data.p());
  double step = 0.0;
  for (double lam : path) {
    fits.push_back(problem.solve(lam, opts, &warm, &step));
    warm = fits.back().beta_hat;
  }
  return fits;
}

struct LassoCvResult
{
  double best_lambda = 0.0;
  std::size_t best_index = 0;
  std::vector<double> path;
  std::vector<double> score;  // summed held-out partial likelihood per lambda
  int folds_used = 0;
};

//! Cross-validated lambda using the full-minus-training partial likelihood
//! contribution of each held-out fold.
inline LassoCvResult cv_lambda(const SurvivalDataset& data, int nfolds, std::vector<double> path,
                               std::uint64_t seed, const LassoOptions& opts = {})
{
  if (nfolds < 2)
    throw std::invalid_argument("cv_lambda: need at least 2 folds");
  if (path.empty())
    path = default_lambda_path(data, opts);
  std::sort(path.begin(), path.end(), std::greater<>());

  LassoCvResult res;
  res.path = path;
  res.score.assign(path.size(), 0.0);
  if (path.size() == 1) {
    res.best_lambda = path.front();
    return res;
  }

  std::vector<int> fold = stratified_folds(data.event(), nfolds, seed);
  CoxRiskStructure full_rs(data);
  for (int f = 0; f < nfolds; ++f) {
    auto [train_idx, test_idx] = fold_indices(fold, f);
    Index held_events = 0;
    for (Index i : test_idx)
      held_events += data.event(i);
    if (held_events == 0 || train_idx.empty()) {
      warn("cv_lambda: fold " + std::to_string(f) + " has no held-out events; skipped");
      continue;
    }
    SurvivalDataset train = data.subset(train_idx);
    if (train.n_events() == 0) {
      warn("cv_lambda: fold " + std::to_string(f) + " has no training events; skipped");
      continue;
    }
    std::vector<CoxFit> fits = fit_lasso_path(train, path, opts);
    CoxRiskStructure train_rs(train);
    Matrix full_x = full_rs.sorted_rows(fits.front().transform.apply(data.x()));
    Matrix train_x = train_rs.sorted_rows(fits.front().transform.apply(train.x()));
    for (std::size_t k = 0; k < path.size(); ++k) {
      const Vector& b = fits[k].beta_hat;
      res.score[k] += full_rs.loglik(full_x * b) - train_rs.loglik(train_x * b);
    }
    ++res.folds_used;
  }
  if (res.folds_used == 0)
    throw std::runtime_error("cv_lambda: every fold was skipped (no usable events)");
  std::size_t best = 0;
  for (std::size_t k = 1; k < path.size(); ++k)
    if (res.score[k] > res.score[best])
      best = k;
  res.best_index = best;
  res.best_lambda = path[best];
  return res;
}

//! Cross-validated lambda, then a warm-started refit on all of `data`.
inline CoxFit fit_lasso_cv(const SurvivalDataset& data, int nfolds, std::uint64_t seed,
                           const LassoOptions& opts = {}, LassoCvResult* cv_out = nullptr)
{
  LassoCvResult cv = cv_lambda(data, nfolds, {}, seed, opts);
  std::vector<double> upto(cv.path.begin(), cv.path.begin() + static_cast<std::ptrdiff_t>(cv.best_index) + 1);
  std::vector<CoxFit> fits = fit_lasso_path(data, upto, opts);
  if (cv_out)
    *cv_out = cv;
  return fits.back();
}

//! exp(beta_hat^T x) after the stored standardization.
inline double risk_score(const CoxFit& fit, const Eigen::Ref<const Vector>& x)
{
  if (x.size() != fit.p())
    throw std::invalid_argument("risk_score: covariate length does not match the fit");
  return std::exp(fit.linear_predictor(x));
}

} // namespace survnet
