#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iostream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "random.hpp"

namespace survnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

//! Sink for non-fatal diagnostics (skipped folds, degenerate estimates...).
//! Defaults to std::clog; tests can swap it to capture or silence messages.
inline std::function<void(const std::string&)>& warning_sink()
{
  static std::function<void(const std::string&)> sink = [](const std::string& msg) {
    std::clog << "survnet warning: " << msg << '\n';
  };
  return sink;
}

inline void warn(const std::string& msg)
{
  if (warning_sink())
    warning_sink()(msg);
}

//! Covariates, observed times T_i = min(Y_i, C_i) and event indicators.
class SurvivalDataset
{
public:
  SurvivalDataset() = default;

  SurvivalDataset(Matrix x, Vector time, std::vector<int> event)
    : x_(std::move(x))
    , time_(std::move(time))
    , event_(std::move(event))
  {
    validate();
  }

  const Matrix& x() const { return x_; }
  const Vector& time() const { return time_; }
  const std::vector<int>& event() const { return event_; }

  Index n() const { return time_.size(); }
  Index p() const { return x_.cols(); }
  double time(Index i) const { return time_[i]; }
  int event(Index i) const { return event_[static_cast<std::size_t>(i)]; }

  Index n_events() const
  {
    return std::count(event_.begin(), event_.end(), 1);
  }

  double censoring_fraction() const
  {
    return n() == 0 ? 0.0 : 1.0 - static_cast<double>(n_events()) / static_cast<double>(n());
  }

  //! Rows selected by `rows`, in that order.
  SurvivalDataset subset(std::span<const Index> rows) const
  {
    Matrix x(static_cast<Index>(rows.size()), p());
    Vector t(static_cast<Index>(rows.size()));
    std::vector<int> e(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      x.row(static_cast<Index>(k)) = x_.row(rows[k]);
      t[static_cast<Index>(k)] = time_[rows[k]];
      e[k] = event_[static_cast<std::size_t>(rows[k])];
    }
    return SurvivalDataset(std::move(x), std::move(t), std::move(e));
  }

  //! Same subjects with a replaced covariate matrix.
  SurvivalDataset with_covariates(Matrix x) const
  {
    return SurvivalDataset(std::move(x), time_, event_);
  }

private:
  void validate() const
  {
    if (x_.rows() != time_.size() || static_cast<std::size_t>(time_.size()) != event_.size())
      throw std::invalid_argument("SurvivalDataset: covariate rows, times and events differ in length");
    for (Index i = 0; i < time_.size(); ++i) {
      if (!std::isfinite(time_[i]) || time_[i] <= 0.0)
        throw std::invalid_argument("SurvivalDataset: time of subject " + std::to_string(i) +
                                    " is not strictly positive and finite");
      int e = event_[static_cast<std::size_t>(i)];
      if (e != 0 && e != 1)
        throw std::invalid_argument("SurvivalDataset: event of subject " + std::to_string(i) +
                                    " is not 0 or 1");
    }
  }

  Matrix x_;
  Vector time_;
  std::vector<int> event_;
};

enum class Interpolation
{
  step,   // right-continuous: value of the last grid point <= t
  linear
};

//! Survival function S(t) tabulated on a strictly increasing grid.
//! Evaluates to 1 before the first grid point and stays flat after the last.
class SurvivalCurve
{
public:
  SurvivalCurve() = default;

  SurvivalCurve(std::vector<double> grid, std::vector<double> probs,
                Interpolation interp = Interpolation::linear)
    : grid_(std::move(grid))
    , probs_(std::move(probs))
    , interp_(interp)
  {
    if (grid_.size() != probs_.size() || grid_.empty())
      throw std::invalid_argument("SurvivalCurve: grid and probabilities must be non-empty and equal length");
    for (std::size_t k = 1; k < grid_.size(); ++k)
      if (!(grid_[k] > grid_[k - 1]))
        throw std::invalid_argument("SurvivalCurve: grid must be strictly increasing");
    for (std::size_t k = 0; k < probs_.size(); ++k) {
      if (!(probs_[k] >= 0.0 && probs_[k] <= 1.0))
        throw std::invalid_argument("SurvivalCurve: probability outside [0,1]");
      if (k > 0 && probs_[k] > probs_[k - 1])
        throw std::invalid_argument("SurvivalCurve: probabilities must be non-increasing");
    }
  }

  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& probs() const { return probs_; }
  Interpolation interpolation() const { return interp_; }

  double at(double t) const
  {
    if (t < grid_.front())
      return 1.0;
    auto it = std::upper_bound(grid_.begin(), grid_.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - grid_.begin());
    if (hi == grid_.size())
      return probs_.back();
    std::size_t lo = hi - 1;
    if (interp_ == Interpolation::step)
      return probs_[lo];
    double w = (t - grid_[lo]) / (grid_[hi] - grid_[lo]);
    return probs_[lo] + w * (probs_[hi] - probs_[lo]);
  }

private:
  std::vector<double> grid_;
  std::vector<double> probs_;
  Interpolation interp_ = Interpolation::linear;
};

//! Risk sets R_i = { l : T_l >= T_i } stored as suffixes of the ascending
//! time order: R_i = { order[k] : k >= start(i) }.
class RiskSetIndex
{
public:
  explicit RiskSetIndex(const Vector& time)
  {
    const Index n = time.size();
    order_.resize(static_cast<std::size_t>(n));
    std::iota(order_.begin(), order_.end(), Index{0});
    std::stable_sort(order_.begin(), order_.end(),
                     [&](Index a, Index b) { return time[a] < time[b]; });
    position_.assign(static_cast<std::size_t>(n), 0);
    group_start_.assign(static_cast<std::size_t>(n), 0);
    group_end_.assign(static_cast<std::size_t>(n), 0);
    std::size_t k = 0;
    while (k < order_.size()) {
      std::size_t e = k;
      while (e + 1 < order_.size() && time[order_[e + 1]] == time[order_[k]])
        ++e;
      for (std::size_t j = k; j <= e; ++j) {
        group_start_[j] = k;
        group_end_[j] = e + 1;
      }
      k = e + 1;
    }
    for (std::size_t j = 0; j < order_.size(); ++j)
      position_[static_cast<std::size_t>(order_[j])] = j;
  }

  std::size_t size() const { return order_.size(); }

  //! Subjects sorted by ascending observed time (stable on input order).
  const std::vector<Index>& order() const { return order_; }

  //! Members of R_i for subject i (original index).
  std::span<const Index> members(Index i) const
  {
    std::size_t s = group_start_[position_[static_cast<std::size_t>(i)]];
    return std::span<const Index>(order_).subspan(s);
  }

  std::size_t risk_set_size(Index i) const { return members(i).size(); }

  //! First sorted position of the tie group containing sorted position k.
  std::size_t group_start(std::size_t k) const { return group_start_[k]; }
  //! One past the last sorted position of the tie group containing k.
  std::size_t group_end(std::size_t k) const { return group_end_[k]; }

private:
  std::vector<Index> order_;
  std::vector<std::size_t> position_;
  std::vector<std::size_t> group_start_;
  std::vector<std::size_t> group_end_;
};

inline RiskSetIndex build_risk_sets(const SurvivalDataset& data)
{
  return RiskSetIndex(data.time());
}

//! Cox partial log-likelihood and its derivative with respect to the
//! linear predictor, for data pre-sorted by ascending time. Ties follow
//! Breslow: tied subjects share the full tie group in their risk sets.
class CoxRiskStructure
{
public:
  CoxRiskStructure() = default;

  explicit CoxRiskStructure(const SurvivalDataset& data)
    : index_(data.time())
  {
    const std::size_t n = index_.size();
    event_.resize(n);
    for (std::size_t k = 0; k < n; ++k)
      event_[k] = data.event(index_.order()[k]);
  }

  const RiskSetIndex& index() const { return index_; }
  std::size_t size() const { return index_.size(); }
  //! Event indicator at sorted position k.
  int event(std::size_t k) const { return event_[k]; }

  //! Covariate rows permuted into ascending time order.
  Matrix sorted_rows(const Matrix& x) const
  {
    Matrix out(x.rows(), x.cols());
    for (std::size_t k = 0; k < size(); ++k)
      out.row(static_cast<Index>(k)) = x.row(index_.order()[k]);
    return out;
  }

  //! sum_i delta_i [eta_i - log sum_{l in R_i} exp(eta_l)], eta in sorted order.
  double loglik(const Vector& eta) const { return evaluate(eta, nullptr); }

  //! Log-likelihood and gradient with respect to eta (sorted order).
  double loglik(const Vector& eta, Vector& grad) const { return evaluate(eta, &grad); }

private:
  double evaluate(const Vector& eta, Vector* grad) const
  {
    const std::size_t n = size();
    if (static_cast<std::size_t>(eta.size()) != n)
      throw std::invalid_argument("CoxRiskStructure: linear predictor length mismatch");
    if (n == 0) {
      if (grad)
        grad->resize(0);
      return 0.0;
    }
    const double shift = eta.maxCoeff();
    if (!std::isfinite(shift))
      throw std::domain_error("Cox partial likelihood: non-finite linear predictor");
    // suffix[k] = sum_{j >= k} exp(eta_j - shift)
    std::vector<double> suffix(n + 1, 0.0);
    for (std::size_t k = n; k-- > 0;)
      suffix[k] = suffix[k + 1] + std::exp(eta[static_cast<Index>(k)] - shift);

    double ll = 0.0;
    // acc[k] = sum over events i with T_i <= T_k of 1 / S0_i
    std::vector<double> inv_s0(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      if (event_[k] != 1)
        continue;
      double s0 = suffix[index_.group_start(k)];
      ll += eta[static_cast<Index>(k)] - shift - std::log(s0);
      inv_s0[k] = 1.0 / s0;
    }
    if (grad) {
      grad->resize(static_cast<Index>(n));
      double acc = 0.0;
      std::size_t k = 0;
      while (k < n) {
        std::size_t e = index_.group_end(k);
        for (std::size_t j = k; j < e; ++j)
          acc += inv_s0[j];
        for (std::size_t j = k; j < e; ++j)
          (*grad)[static_cast<Index>(j)] =
            event_[j] - std::exp(eta[static_cast<Index>(j)] - shift) * acc;
        k = e;
      }
    }
    return ll;
  }

  RiskSetIndex index_;
  std::vector<int> event_;
};

//! Per-column affine transform (x - mean) / scale; scale 0 marks a constant
//! column, which maps to zero.
struct Standardizer
{
  Vector mean;
  Vector scale;

  Index dim() const { return mean.size(); }

  Matrix apply(const Matrix& x) const
  {
    if (x.cols() != mean.size())
      throw std::invalid_argument("Standardizer: column count mismatch");
    Matrix out(x.rows(), x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
      if (scale[j] > 0.0)
        out.col(j) = (x.col(j).array() - mean[j]) / scale[j];
      else
        out.col(j).setZero();
    }
    return out;
  }

  Vector apply_row(const Eigen::Ref<const Vector>& x) const
  {
    if (x.size() != mean.size())
      throw std::invalid_argument("Standardizer: covariate length mismatch");
    Vector out(x.size());
    for (Index j = 0; j < x.size(); ++j)
      out[j] = scale[j] > 0.0 ? (x[j] - mean[j]) / scale[j] : 0.0;
    return out;
  }

  static Standardizer identity(Index p)
  {
    return Standardizer{Vector::Zero(p), Vector::Ones(p)};
  }
};

//! Column-wise mean and sample (n-1) standard deviation.
inline Standardizer fit_standardizer(const Matrix& x)
{
  if (x.cols() < 1)
    throw std::invalid_argument("standardize_covariates: need at least one column");
  const Index n = x.rows();
  Standardizer s{Vector::Zero(x.cols()), Vector::Zero(x.cols())};
  for (Index j = 0; j < x.cols(); ++j) {
    if (n == 0)
      continue;
    double m = x.col(j).mean();
    s.mean[j] = m;
    if (n < 2)
      continue;
    double ss = (x.col(j).array() - m).square().sum();
    double sd = std::sqrt(ss / static_cast<double>(n - 1));
    // Treat columns whose spread is pure rounding noise as constant.
    double tol = 1e-14 * std::max(1.0, std::abs(m));
    s.scale[j] = sd > tol ? sd : 0.0;
  }
  return s;
}

inline std::pair<Matrix, Standardizer> standardize_covariates(const Matrix& x)
{
  Standardizer s = fit_standardizer(x);
  return {s.apply(x), std::move(s)};
}

struct Split
{
  std::vector<Index> train;
  std::vector<Index> test;
  std::uint64_t seed = 0;
};

//! Stratified on the event indicator: each stratum contributes
//! round(fraction * size) subjects to the training part.
inline Split split_indices(const std::vector<int>& event, double fraction, std::uint64_t seed)
{
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("train_test_split: fraction must lie in (0,1)");
  Rng rng(derive_seed(seed, "split"));
  Split split;
  split.seed = seed;
  for (int stratum : {1, 0}) {
    std::vector<Index> members;
    for (std::size_t i = 0; i < event.size(); ++i)
      if (event[i] == stratum)
        members.push_back(static_cast<Index>(i));
    rng.shuffle(members);
    auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.insert(split.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  if (split.train.empty() || split.test.empty())
    throw std::invalid_argument("train_test_split: fraction " + std::to_string(fraction) +
                                " leaves an empty part for n=" + std::to_string(event.size()));
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

inline std::pair<SurvivalDataset, SurvivalDataset>
train_test_split(const SurvivalDataset& data, double fraction, std::uint64_t seed)
{
  Split s = split_indices(data.event(), fraction, seed);
  return {data.subset(s.train), data.subset(s.test)};
}

//! Fold label in [0, k) per subject, balanced within each event stratum.
inline std::vector<int> stratified_folds(const std::vector<int>& event, int k, std::uint64_t seed)
{
  if (k < 2)
    throw std::invalid_argument("stratified_folds: need at least 2 folds");
  Rng rng(derive_seed(seed, "folds"));
  std::vector<int> fold(event.size(), 0);
  int offset = 0;
  for (int stratum : {1, 0}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < event.size(); ++i)
      if (event[i] == stratum)
        members.push_back(i);
    rng.shuffle(members);
    for (std::size_t j = 0; j < members.size(); ++j)
      fold[members[j]] = static_cast<int>((j + static_cast<std::size_t>(offset)) % static_cast<std::size_t>(k));
    offset += static_cast<int>(members.size() % static_cast<std::size_t>(k));
  }
  return fold;
}

inline std::pair<std::vector<Index>, std::vector<Index>>
fold_indices(const std::vector<int>& fold, int which)
{
  std::vector<Index> in, out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    (fold[i] == which ? out : in).push_back(static_cast<Index>(i));
  return {in, out};
}

} // namespace survnet
