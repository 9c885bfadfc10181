#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "core.hpp"

namespace survnet {

inline double epanechnikov(double u)
{
  return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
}

//! Smoothed baseline hazard tabulated on a grid, with its trapezoidal integral.
struct BaselineEstimate
{
  std::vector<double> grid;
  std::vector<double> alpha_hat;
  std::vector<double> cumulative;
  double bandwidth = 0.0;

  //! H0(t), linear between grid points and flat beyond the last one.
  double cumulative_at(double t) const
  {
    if (grid.empty() || t <= grid.front())
      return grid.empty() ? 0.0 : cumulative.front();
    auto it = std::upper_bound(grid.begin(), grid.end(), t);
    if (it == grid.end())
      return cumulative.back();
    std::size_t hi = static_cast<std::size_t>(it - grid.begin()), lo = hi - 1;
    double w = (t - grid[lo]) / (grid[hi] - grid[lo]);
    return cumulative[lo] + w * (cumulative[hi] - cumulative[lo]);
  }
};

//! `points` equispaced times on [0, max observed time].
inline std::vector<double> baseline_grid(const SurvivalDataset& data, std::size_t points = 200)
{
  if (data.n() == 0 || points < 2)
    throw std::invalid_argument("baseline_grid: need data and at least 2 points");
  double tmax = data.time().maxCoeff();
  std::vector<double> g(points);
  for (std::size_t k = 0; k < points; ++k)
    g[k] = tmax * static_cast<double>(k) / static_cast<double>(points - 1);
  return g;
}

//! Counting-process increments delta_i / sum_{l in R_i} h_l at each T_i.
inline std::vector<double> breslow_increments(const SurvivalDataset& data, const Vector& scores)
{
  if (scores.size() != data.n())
    throw std::invalid_argument("ramlau_hansen: one score per subject required");
  for (Index i = 0; i < scores.size(); ++i)
    if (!(scores[i] > 0.0) || !std::isfinite(scores[i]))
      throw std::invalid_argument("ramlau_hansen: scores must be positive and finite");
  RiskSetIndex rs(data.time());
  const auto& order = rs.order();
  const std::size_t n = order.size();
  std::vector<double> suffix(n + 1, 0.0);
  for (std::size_t k = n; k-- > 0;)
    suffix[k] = suffix[k + 1] + scores[order[k]];
  std::vector<double> inc(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    Index i = order[k];
    if (data.event(i) == 1)
      inc[static_cast<std::size_t>(i)] = 1.0 / suffix[rs.group_start(k)];
  }
  return inc;
}

inline void integrate_cumulative(BaselineEstimate& est)
{
  est.cumulative.assign(est.grid.size(), 0.0);
  for (std::size_t k = 1; k < est.grid.size(); ++k)
    est.cumulative[k] = est.cumulative[k - 1] +
                        0.5 * (est.alpha_hat[k] + est.alpha_hat[k - 1]) * (est.grid[k] - est.grid[k - 1]);
}

namespace detail {

inline std::vector<double> kernel_smooth(const SurvivalDataset& data, const std::vector<double>& inc,
                                         double m, const std::vector<double>& grid)
{
  std::vector<double> alpha(grid.size(), 0.0);
  for (Index i = 0; i < data.n(); ++i) {
    double w = inc[static_cast<std::size_t>(i)];
    if (w == 0.0)
      continue;
    double ti = data.time(i);
    auto lo = std::lower_bound(grid.begin(), grid.end(), ti - m);
    for (auto it = lo; it != grid.end() && *it <= ti + m; ++it)
      alpha[static_cast<std::size_t>(it - grid.begin())] += epanechnikov((*it - ti) / m) * w;
  }
  for (double& a : alpha)
    a = std::max(0.0, a / m);
  return alpha;
}

} // namespace detail

//! Kernel-smoothed Breslow increments:
//! alpha(t) = (1/m) sum_i K((t - T_i)/m) delta_i / sum_{l in R_i} h_l.
inline BaselineEstimate ramlau_hansen(const SurvivalDataset& data, const Vector& scores, double m,
                                      const std::vector<double>& grid)
{
  if (!(m > 0.0))
    throw std::invalid_argument("ramlau_hansen: bandwidth must be positive");
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1]))
      throw std::invalid_argument("ramlau_hansen: grid must be increasing");
  BaselineEstimate est;
  est.grid = grid;
  est.bandwidth = m;
  if (data.n_events() == 0) {
    warn("ramlau_hansen: no events; baseline hazard estimate is identically zero");
    est.alpha_hat.assign(grid.size(), 0.0);
    est.cumulative.assign(grid.size(), 0.0);
    return est;
  }
  std::vector<double> inc = breslow_increments(data, scores);
  est.alpha_hat = detail::kernel_smooth(data, inc, m, grid);
  integrate_cumulative(est);
  return est;
}

//! Dyadic bandwidths range/50 * 2^j up to range/2.
inline std::vector<double> default_bandwidth_grid(double range)
{
  std::vector<double> g;
  for (double m = range / 50.0; m <= range / 2.0 * (1.0 + 1e-12); m *= 2.0)
    g.push_back(m);
  return g;
}

struct GlSelection
{
  double bandwidth = 0.0;
  std::vector<double> criterion;  // A(m) + V(m) per candidate
};

//! Goldenshluger-Lepski choice among `bandwidths`:
//! A(m) = max_{m' <= m} [ ||a_{m'} - a_m||_inf - V(m') ]_+,
//! V(m) = kappa log(n) / (n m); returns argmin A(m) + V(m), larger m on ties.
//! Time is measured in units of the grid range and the sup-norm is taken
//! over s(t) a(t) with s(t) = (1/n) sum_{T_i >= t} h_i, the scale on which
//! V is a variance proxy. This leaves the choice unchanged when the time
//! unit or the scores are rescaled.
inline GlSelection select_bandwidth_gl_detail(const SurvivalDataset& data, const Vector& scores,
                                              const std::vector<double>& grid,
                                              const std::vector<double>& bandwidths, double kappa = 1.0)
{
  if (bandwidths.empty())
    throw std::invalid_argument("select_bandwidth_gl: empty bandwidth grid");
  for (std::size_t k = 0; k < bandwidths.size(); ++k)
    if (!(bandwidths[k] > 0.0) || (k > 0 && !(bandwidths[k] > bandwidths[k - 1])))
      throw std::invalid_argument("select_bandwidth_gl: bandwidths must be positive and increasing");
  if (!(kappa >= 0.0))
    throw std::invalid_argument("select_bandwidth_gl: kappa must be nonnegative");
  if (grid.size() < 2 || !(grid.back() > grid.front()))
    throw std::invalid_argument("select_bandwidth_gl: grid must span a positive range");
  GlSelection sel;
  if (bandwidths.size() == 1) {
    sel.bandwidth = bandwidths.front();
    sel.criterion.assign(1, 0.0);
    return sel;
  }
  if (std::isinf(kappa)) {
    // the variance term dominates every comparison
    for (double m : bandwidths)
      sel.criterion.push_back(-m);
    sel.bandwidth = bandwidths.back();
    return sel;
  }
  const double n = static_cast<double>(data.n());
  const double range = grid.back() - grid.front();
  std::vector<double> inc = breslow_increments(data, scores);

  RiskSetIndex rs(data.time());
  const auto& order = rs.order();
  std::vector<double> weight(grid.size(), 0.0);
  {
    double tail = scores.sum();
    std::size_t k = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      while (k < order.size() && data.time(order[k]) < grid[g])
        tail -= scores[order[k++]];
      weight[g] = std::max(0.0, tail) / n * range;
    }
  }

  std::vector<std::vector<double>> est;
  for (double m : bandwidths)
    est.push_back(detail::kernel_smooth(data, inc, m, grid));
  auto variance = [&](double m) { return kappa * std::log(n) / (n * m / range); };
  std::size_t best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < bandwidths.size(); ++a) {
    double A = 0.0;
    for (std::size_t b = 0; b < a; ++b) {
      double sup = 0.0;
      for (std::size_t g = 0; g < grid.size(); ++g)
        sup = std::max(sup, weight[g] * std::abs(est[b][g] - est[a][g]));
      A = std::max(A, sup - variance(bandwidths[b]));
    }
    double total = A + variance(bandwidths[a]);
    sel.criterion.push_back(total);
    if (total <= best_val) {
      best_val = total;
      best = a;
    }
  }
  sel.bandwidth = bandwidths[best];
  return sel;
}

inline double select_bandwidth_gl(const SurvivalDataset& data, const Vector& scores,
                                  const std::vector<double>& grid, const std::vector<double>& bandwidths,
                                  double kappa = 1.0)
{
  return select_bandwidth_gl_detail(data, scores, grid, bandwidths, kappa).bandwidth;
}

//! Grid, GL bandwidth and Ramlau-Hansen estimate with the default settings.
inline BaselineEstimate estimate_baseline(const SurvivalDataset& data, const Vector& scores,
                                          double kappa = 1.0, std::size_t grid_points = 200)
{
  std::vector<double> grid = baseline_grid(data, grid_points);
  if (data.n_events() == 0)
    return ramlau_hansen(data, scores, grid.back() / 50.0, grid);
  double m = select_bandwidth_gl(data, scores, grid, default_bandwidth_grid(grid.back()), kappa);
  return ramlau_hansen(data, scores, m, grid);
}

//! S(t) = exp(-score * H0(t)) on the baseline grid.
inline SurvivalCurve survival_from_scores(const BaselineEstimate& base, double score)
{
  if (!(score > 0.0))
    throw std::invalid_argument("survival_from_scores: score must be positive");
  std::vector<double> probs(base.grid.size());
  for (std::size_t k = 0; k < probs.size(); ++k) {
    probs[k] = base.cumulative[k] > 0.0 ? std::exp(-score * base.cumulative[k]) : 1.0;
    if (k > 0)
      probs[k] = std::min(probs[k], probs[k - 1]);
  }
  return SurvivalCurve(base.grid, std::move(probs), Interpolation::linear);
}

} // namespace survnet
