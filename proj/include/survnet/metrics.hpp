#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "core.hpp"
#include "simgen.hpp"

namespace survnet {

//! Product-limit estimate; drops only at times with indicator 1.
struct KaplanMeier
{
  std::vector<double> times;      // distinct times with at least one event
  std::vector<double> surv;       // S(times[k])
  std::vector<Index> at_risk;
  std::vector<Index> events;

  //! Right-continuous S(t).
  double at(double t) const
  {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    return it == times.begin() ? 1.0 : surv[static_cast<std::size_t>(it - times.begin()) - 1];
  }

  //! Left limit S(t-).
  double left(double t) const
  {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    return it == times.begin() ? 1.0 : surv[static_cast<std::size_t>(it - times.begin()) - 1];
  }

  //! Smallest strictly positive value reached, or 1 when S never drops.
  double last_positive() const
  {
    double v = 1.0;
    for (double s : surv)
      if (s > 0.0)
        v = s;
    return v;
  }
};

inline KaplanMeier kaplan_meier(std::span<const double> times, std::span<const int> indicators)
{
  if (times.size() != indicators.size() || times.empty())
    throw std::invalid_argument("kaplan_meier: need n >= 1 times with matching indicators");
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
  KaplanMeier km;
  double s = 1.0;
  std::size_t k = 0;
  const std::size_t n = times.size();
  while (k < n) {
    std::size_t e = k;
    Index d = 0;
    while (e < n && times[order[e]] == times[order[k]]) {
      d += indicators[order[e]] == 1 ? 1 : 0;
      ++e;
    }
    if (d > 0) {
      auto r = static_cast<Index>(n - k);
      s *= 1.0 - static_cast<double>(d) / static_cast<double>(r);
      km.times.push_back(times[order[k]]);
      km.surv.push_back(s);
      km.at_risk.push_back(r);
      km.events.push_back(d);
    }
    k = e;
  }
  return km;
}

inline KaplanMeier kaplan_meier(const Vector& times, const std::vector<int>& indicators)
{
  return kaplan_meier(std::span<const double>(times.data(), static_cast<std::size_t>(times.size())),
                      std::span<const int>(indicators));
}

//! Kaplan-Meier of the censoring distribution G (indicators flipped).
inline KaplanMeier censoring_km(const Vector& times, const std::vector<int>& events)
{
  std::vector<int> flipped(events.size());
  for (std::size_t i = 0; i < events.size(); ++i)
    flipped[i] = 1 - events[i];
  return kaplan_meier(times, flipped);
}

//! Time-dependent concordance: over comparable ordered pairs (T_i < T_j with
//! delta_i = 1, or T_i = T_j with delta_i = 1, delta_j = 0), the pair is
//! concordant when S_i(T_i) < S_j(T_i); equal predictions count one half.
inline double c_index_td(const std::vector<SurvivalCurve>& predictions, const Vector& times,
                         const std::vector<int>& events)
{
  const std::size_t n = predictions.size();
  if (static_cast<std::size_t>(times.size()) != n || events.size() != n)
    throw std::invalid_argument("c_index_td: predictions, times and events differ in length");
  double conc = 0.0, comp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (events[i] != 1)
      continue;
    const double ti = times[static_cast<Index>(i)];
    const double si = predictions[i].at(ti);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i)
        continue;
      const double tj = times[static_cast<Index>(j)];
      if (!(ti < tj || (ti == tj && events[j] == 0)))
        continue;
      comp += 1.0;
      const double sj = predictions[j].at(ti);
      if (si < sj)
        conc += 1.0;
      else if (si == sj)
        conc += 0.5;
    }
  }
  if (comp == 0.0)
    throw std::invalid_argument("c_index_td: no comparable pairs");
  return conc / comp;
}

struct BrierDiagnostics
{
  Index clamped_weights = 0;  // times G-hat hit zero and was replaced
};

//! IPCW Brier score at t with Y_i(t) = 1{T_i >= t} and weights
//! (1 - Y_i) delta_i / G(T_i-) + Y_i / G(t-).
inline double brier_score(const std::vector<SurvivalCurve>& predictions, const Vector& times,
                          const std::vector<int>& events, double t, const KaplanMeier& censor_km,
                          BrierDiagnostics* diag = nullptr)
{
  const std::size_t n = predictions.size();
  if (static_cast<std::size_t>(times.size()) != n || events.size() != n || n == 0)
    throw std::invalid_argument("brier_score: predictions, times and events differ in length");
  const double floor_g = censor_km.last_positive();
  auto weight_of = [&](double g) {
    if (g > 0.0)
      return 1.0 / g;
    if (diag)
      ++diag->clamped_weights;
    return 1.0 / floor_g;
  };
  const double g_t = censor_km.left(t);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ti = times[static_cast<Index>(i)];
    const double s = predictions[i].at(t);
    if (ti >= t) {
      sum += weight_of(g_t) * (1.0 - s) * (1.0 - s);
    } else if (events[i] == 1) {
      sum += weight_of(censor_km.left(ti)) * s * s;
    }
  }
  return sum / static_cast<double>(n);
}

//! `points` equispaced evaluation times on [0, tau].
inline std::vector<double> brier_grid(double tau, std::size_t points = 100)
{
  std::vector<double> g(points);
  for (std::size_t k = 0; k < points; ++k)
    g[k] = tau * static_cast<double>(k) / static_cast<double>(points - 1);
  return g;
}

//! Trapezoidal average of a (t, value) trace over its own time span.
inline double integrate_trace(const std::vector<std::pair<double, double>>& trace)
{
  if (trace.size() < 2)
    throw std::invalid_argument("integrate_trace: need at least two points");
  double area = 0.0;
  for (std::size_t k = 1; k < trace.size(); ++k)
    area += 0.5 * (trace[k].second + trace[k - 1].second) * (trace[k].first - trace[k - 1].first);
  double span = trace.back().first - trace.front().first;
  if (!(span > 0.0))
    throw std::invalid_argument("integrate_trace: degenerate time span");
  return area / span;
}

struct MetricReport
{
  double c_td = 0.0;
  double ibs = 0.0;
  std::vector<std::pair<double, double>> brier_trace;
  double tau = 0.0;
  Index clamped_weights = 0;
};

//! Brier trace on a 100-point grid over [0, tau], tau = max observed time,
//! and its trapezoidal integral divided by tau.
inline MetricReport integrated_brier(const std::vector<SurvivalCurve>& predictions, const Vector& times,
                                     const std::vector<int>& events)
{
  if (times.size() == 0)
    throw std::invalid_argument("integrated_brier: empty data");
  MetricReport rep;
  rep.tau = times.maxCoeff();
  KaplanMeier g = censoring_km(times, events);
  BrierDiagnostics diag;
  for (double t : brier_grid(rep.tau))
    rep.brier_trace.emplace_back(t, brier_score(predictions, times, events, t, g, &diag));
  rep.ibs = integrate_trace(rep.brier_trace);
  rep.clamped_weights = diag.clamped_weights;
  return rep;
}

inline MetricReport evaluate_predictions(const std::vector<SurvivalCurve>& predictions, const Vector& times,
                                         const std::vector<int>& events)
{
  MetricReport rep = integrated_brier(predictions, times, events);
  rep.c_td = c_index_td(predictions, times, events);
  return rep;
}

inline MetricReport evaluate_predictions(const std::vector<SurvivalCurve>& predictions,
                                         const SurvivalDataset& data)
{
  return evaluate_predictions(predictions, data.time(), data.event());
}

//! Exact-model curves for the rows of `x`, tabulated at every time the
//! metrics evaluate (observed times of `test` and the Brier grid).
inline std::vector<SurvivalCurve> reference_curves(const SimulatedDataset& sim, const SurvivalDataset& test)
{
  std::set<double> pts{0.0};
  for (Index i = 0; i < test.n(); ++i)
    pts.insert(test.time(i));
  for (double t : brier_grid(test.time().maxCoeff()))
    pts.insert(t);
  std::vector<double> grid(pts.begin(), pts.end());
  std::vector<SurvivalCurve> curves;
  curves.reserve(static_cast<std::size_t>(test.n()));
  for (Index i = 0; i < test.n(); ++i)
    curves.push_back(true_survival(sim, test.x().row(i).transpose(), grid));
  return curves;
}

//! C_td and IBS of the data-generating model on the test subjects.
inline MetricReport reference_metrics(const SimulatedDataset& sim, const std::vector<Index>& test_rows)
{
  SurvivalDataset test = sim.data.subset(test_rows);
  return evaluate_predictions(reference_curves(sim, test), test);
}

inline MetricReport reference_metrics(const SimulatedDataset& sim, const SurvivalDataset& test)
{
  return evaluate_predictions(reference_curves(sim, test), test);
}

} // namespace survnet
