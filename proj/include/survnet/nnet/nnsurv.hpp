#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "../core.hpp"
#include "mlp.hpp"

namespace survnet::nnet {

inline constexpr double kHazardClamp = 1e-12;

//! Cut points t_0 = 0 < t_1 < ... < t_L and interval midpoints a_l of
//! A_l = (t_{l-1}, t_l].
struct DiscreteTimeGrid
{
  std::vector<double> cuts;
  std::vector<double> midpoints;

  static DiscreteTimeGrid from_cuts(std::vector<double> cuts)
  {
    if (cuts.size() < 3)
      throw std::invalid_argument("DiscreteTimeGrid: need at least two intervals");
    for (std::size_t k = 1; k < cuts.size(); ++k)
      if (!(cuts[k] > cuts[k - 1]))
        throw std::invalid_argument("DiscreteTimeGrid: cut points must be strictly increasing");
    DiscreteTimeGrid g;
    g.cuts = std::move(cuts);
    for (std::size_t l = 1; l < g.cuts.size(); ++l)
      g.midpoints.push_back(0.5 * (g.cuts[l - 1] + g.cuts[l]));
    return g;
  }

  std::size_t intervals() const { return midpoints.size(); }

  //! 1-based l with t in (t_{l-1}, t_l]; times past t_L map to L.
  std::size_t interval_of(double t) const
  {
    auto it = std::lower_bound(cuts.begin() + 1, cuts.end(), t);
    if (it == cuts.end())
      return intervals();
    return static_cast<std::size_t>(it - cuts.begin());
  }
};

//! Cuts at the empirical l/L quantiles of the observed times, t_L = max T.
inline DiscreteTimeGrid build_time_grid(const SurvivalDataset& data, std::size_t L)
{
  if (L < 2)
    throw std::invalid_argument("build_time_grid: need L >= 2");
  std::vector<double> t(data.time().data(), data.time().data() + data.n());
  std::sort(t.begin(), t.end());
  std::vector<double> u = t;
  auto distinct = static_cast<std::size_t>(std::unique(u.begin(), u.end()) - u.begin());
  if (distinct < L)
    throw std::invalid_argument("build_time_grid: " + std::to_string(distinct) +
                                " distinct times cannot support " + std::to_string(L) + " intervals");
  auto quantile = [&](double q) {
    double pos = q * static_cast<double>(t.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = std::min(lo + 1, t.size() - 1);
    return t[lo] + (pos - static_cast<double>(lo)) * (t[hi] - t[lo]);
  };
  std::vector<double> cuts{0.0};
  for (std::size_t l = 1; l < L; ++l)
    cuts.push_back(quantile(static_cast<double>(l) / static_cast<double>(L)));
  cuts.push_back(t.back());
  for (std::size_t k = 1; k < cuts.size(); ++k)
    if (!(cuts[k] > cuts[k - 1]))
      throw std::invalid_argument("build_time_grid: tied quantiles; too few distinct times for L = " +
                                  std::to_string(L));
  return DiscreteTimeGrid::from_cuts(std::move(cuts));
}

//! One row (x_i, a_l) per subject and interval l = 1..l_i with target
//! d_il = 0 for l < l_i and d_{i l_i} = delta_i.
struct DuplicatedBatch
{
  Matrix inputs;
  Vector target;
  std::vector<Index> subject;
  std::vector<std::size_t> interval;  // 1-based

  Index rows() const { return inputs.rows(); }
};

inline DuplicatedBatch duplicate(const SurvivalDataset& data, const DiscreteTimeGrid& grid)
{
  std::vector<std::size_t> li(static_cast<std::size_t>(data.n()));
  Index rows = 0;
  for (Index i = 0; i < data.n(); ++i) {
    li[static_cast<std::size_t>(i)] = grid.interval_of(data.time(i));
    rows += static_cast<Index>(li[static_cast<std::size_t>(i)]);
  }
  DuplicatedBatch b;
  const Index p = data.p();
  b.inputs.resize(rows, p + 1);
  b.target.resize(rows);
  b.subject.reserve(static_cast<std::size_t>(rows));
  b.interval.reserve(static_cast<std::size_t>(rows));
  Index r = 0;
  for (Index i = 0; i < data.n(); ++i) {
    std::size_t last = li[static_cast<std::size_t>(i)];
    for (std::size_t l = 1; l <= last; ++l, ++r) {
      b.inputs.row(r).head(p) = data.x().row(i);
      b.inputs(r, p) = grid.midpoints[l - 1];
      b.target[r] = (l == last) ? static_cast<double>(data.event(i)) : 0.0;
      b.subject.push_back(i);
      b.interval.push_back(l);
    }
  }
  return b;
}

//! Cross-entropy of sigmoid hazards over the selected rows (all rows when
//! `rows` is empty), plus ridge * ||params||^2. `scale` multiplies the data
//! term so a mini-batch can stand in for the full sum.
inline LossGrad nnsurv_loss_and_grad(const Mlp& net, const Matrix& inputs, const Vector& target,
                                     double ridge, double scale = 1.0)
{
  if (net.output_dim() != 1 || net.layers().back().act != Activation::sigmoid)
    throw std::invalid_argument("nnsurv_loss_and_grad: network needs one sigmoid output");
  ForwardCache cache = net.forward(inputs);
  const Matrix& h = cache.output();
  double ce = 0.0;
  for (Index r = 0; r < h.rows(); ++r) {
    double hr = std::clamp(h(r, 0), kHazardClamp, 1.0 - kHazardClamp);
    ce -= target[r] * std::log(hr) + (1.0 - target[r]) * std::log(1.0 - hr);
  }
  // d CE / d z = h - d for a sigmoid output; backward() multiplies by the
  // sigmoid slope h(1-h), so hand it d CE / d h.
  Matrix d_out(h.rows(), 1);
  for (Index r = 0; r < h.rows(); ++r) {
    double hr = std::clamp(h(r, 0), kHazardClamp, 1.0 - kHazardClamp);
    d_out(r, 0) = scale * (hr - target[r]) / (hr * (1.0 - hr));
  }
  LossGrad out;
  out.grad = net.backward(inputs, cache, d_out);
  out.grad += 2.0 * ridge * net.params();
  out.loss = scale * ce + ridge * net.params().squaredNorm();
  return out;
}

inline LossGrad nnsurv_loss_and_grad(const Mlp& net, const DuplicatedBatch& batch, double ridge)
{
  return nnsurv_loss_and_grad(net, batch.inputs, batch.target, ridge);
}

inline double nnsurv_cross_entropy(const Mlp& net, const Matrix& inputs, const Vector& target)
{
  Matrix h = net.predict(inputs);
  double ce = 0.0;
  for (Index r = 0; r < h.rows(); ++r) {
    double hr = std::clamp(h(r, 0), kHazardClamp, 1.0 - kHazardClamp);
    ce -= target[r] * std::log(hr) + (1.0 - target[r]) * std::log(1.0 - hr);
  }
  return ce;
}

inline Mlp make_nnsurv(Index inputs, int depth, const TrainConfig& cfg)
{
  if (depth != 1 && depth != 2)
    throw std::invalid_argument("make_nnsurv: depth must be 1 or 2");
  std::vector<Index> hidden = cfg.hidden;
  if (hidden.empty())
    hidden.assign(static_cast<std::size_t>(depth), default_hidden_size(inputs - 1));
  return Mlp::make(inputs, hidden, 1, Activation::relu, Activation::sigmoid);
}

struct NnsurvFit
{
  DiscreteTimeGrid grid;
  Standardizer transform;  // over (x, midpoint) columns of the duplicated rows
  Mlp net;
  int depth = 1;
  double ridge = 0.0;
  TrainTrace trace;
  std::vector<double> cv_score;  // held-out mean cross-entropy per ridge value

  //! Network inputs for subject x at every interval midpoint.
  Matrix interval_inputs(const Eigen::Ref<const Vector>& x) const
  {
    const Index p = x.size();
    if (p + 1 != transform.dim())
      throw std::invalid_argument("NnsurvFit: covariate length mismatch");
    Matrix rows(static_cast<Index>(grid.intervals()), p + 1);
    for (std::size_t l = 0; l < grid.intervals(); ++l) {
      rows.row(static_cast<Index>(l)).head(p) = x.transpose();
      rows(static_cast<Index>(l), p) = grid.midpoints[l];
    }
    return transform.apply(rows);
  }

  //! Discrete hazards h_l(x, a_l), l = 1..L, clamped into (0,1).
  Vector hazards(const Eigen::Ref<const Vector>& x) const
  {
    Vector h = net.predict(interval_inputs(x)).col(0);
    for (Index l = 0; l < h.size(); ++l)
      h[l] = std::clamp(h[l], kHazardClamp, 1.0 - kHazardClamp);
    return h;
  }
};

namespace detail {

struct RowSet
{
  Matrix inputs;
  Vector target;
};

inline RowSet rows_for_subjects(const DuplicatedBatch& b, const Matrix& inputs,
                                const std::vector<char>& keep)
{
  Index count = 0;
  for (Index r = 0; r < b.rows(); ++r)
    count += keep[static_cast<std::size_t>(b.subject[static_cast<std::size_t>(r)])] ? 1 : 0;
  RowSet s{Matrix(count, inputs.cols()), Vector(count)};
  Index k = 0;
  for (Index r = 0; r < b.rows(); ++r) {
    if (!keep[static_cast<std::size_t>(b.subject[static_cast<std::size_t>(r)])])
      continue;
    s.inputs.row(k) = inputs.row(r);
    s.target[k] = b.target[r];
    ++k;
  }
  return s;
}

inline Mlp train_nnsurv_once(const RowSet& train, const RowSet* val, int depth, double ridge,
                             const TrainConfig& cfg, std::uint64_t seed, TrainTrace* trace_out = nullptr)
{
  Mlp net = make_nnsurv(train.inputs.cols(), depth, cfg);
  net.initialize(derive_seed(seed, "nnsurv-init"));
  const Index n = train.inputs.rows();
  const Index bs = std::max<Index>(1, std::min(cfg.batch_size, n));
  Rng rng(derive_seed(seed, "nnsurv-batches"));
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  TrainConfig run = cfg;
  if (!val || val->inputs.rows() == 0)
    run.patience = cfg.epochs + 1;
  double last_train = 0.0;
  Matrix xb;
  Vector yb;
  TrainTrace trace = train_with_early_stopping(
    net, run,
    [&](Mlp& m, Adam& opt) {
      rng.shuffle(perm);
      double total = 0.0;
      for (Index start = 0; start < n; start += bs) {
        Index len = std::min(bs, n - start);
        xb.resize(len, train.inputs.cols());
        yb.resize(len);
        for (Index k = 0; k < len; ++k) {
          xb.row(k) = train.inputs.row(perm[static_cast<std::size_t>(start + k)]);
          yb[k] = train.target[perm[static_cast<std::size_t>(start + k)]];
        }
        LossGrad lg = nnsurv_loss_and_grad(m, xb, yb, ridge, static_cast<double>(n) / static_cast<double>(len));
        opt.step(m.params(), lg.grad);
        total += lg.loss * static_cast<double>(len) / static_cast<double>(n);
      }
      last_train = total;
      return total;
    },
    [&](const Mlp& m) {
      if (!val || val->inputs.rows() == 0)
        return last_train;
      return nnsurv_cross_entropy(m, val->inputs, val->target) / static_cast<double>(val->inputs.rows());
    });
  if (trace_out)
    *trace_out = std::move(trace);
  return net;
}

inline std::vector<char> subjects_mask(std::size_t n, const std::vector<Index>& idx)
{
  std::vector<char> keep(n, 0);
  for (Index i : idx)
    keep[static_cast<std::size_t>(i)] = 1;
  return keep;
}

//! Splits subjects of `keep` into a fitting part and a validation part.
inline std::pair<RowSet, RowSet> with_validation(const DuplicatedBatch& b, const Matrix& inputs,
                                                 const std::vector<int>& event, const std::vector<Index>& subjects,
                                                 double fraction, std::uint64_t seed)
{
  std::vector<char> fit_keep(event.size(), 0), val_keep(event.size(), 0);
  std::vector<int> ev;
  for (Index i : subjects)
    ev.push_back(event[static_cast<std::size_t>(i)]);
  bool split_ok = false;
  if (fraction > 0.0) {
    try {
      Split s = split_indices(ev, 1.0 - fraction, seed);
      for (Index k : s.train)
        fit_keep[static_cast<std::size_t>(subjects[static_cast<std::size_t>(k)])] = 1;
      for (Index k : s.test)
        val_keep[static_cast<std::size_t>(subjects[static_cast<std::size_t>(k)])] = 1;
      split_ok = true;
    } catch (const std::invalid_argument&) {
    }
  }
  if (!split_ok) {
    for (Index i : subjects)
      fit_keep[static_cast<std::size_t>(i)] = 1;
  }
  return {rows_for_subjects(b, inputs, fit_keep), rows_for_subjects(b, inputs, val_keep)};
}

} // namespace detail

inline std::vector<double> default_nnsurv_ridge_grid() { return {0.1, 1.0, 10.0}; }

//! Discrete-time network: depth 1 is NNsurv, depth 2 NNsurv-deep. The ridge
//! weight is chosen by k-fold CV (subjects as units) on held-out
//! cross-entropy per duplicated row.
inline NnsurvFit nnsurv_fit(const SurvivalDataset& data, const TrainConfig& cfg, int depth,
                            std::size_t intervals = 20)
{
  NnsurvFit fit;
  fit.depth = depth;
  fit.grid = build_time_grid(data, intervals);
  DuplicatedBatch batch = duplicate(data, fit.grid);
  fit.transform = fit_standardizer(batch.inputs);
  Matrix inputs = fit.transform.apply(batch.inputs);

  std::vector<double> grid = cfg.ridge_grid;
  if (grid.empty())
    grid = {cfg.ridge};
  fit.ridge = grid.front();
  const std::size_t n = static_cast<std::size_t>(data.n());
  if (grid.size() > 1) {
    std::vector<int> fold = stratified_folds(data.event(), cfg.cv_folds, derive_seed(cfg.seed, "nnsurv-cv"));
    fit.cv_score.assign(grid.size(), 0.0);
    for (int f = 0; f < cfg.cv_folds; ++f) {
      auto [in, out] = fold_indices(fold, f);
      if (in.empty() || out.empty())
        continue;
      auto [train, val] = detail::with_validation(batch, inputs, data.event(), in, cfg.validation_fraction,
                                                  derive_seed(cfg.seed, "nnsurv-val", static_cast<std::uint64_t>(f)));
      detail::RowSet held = detail::rows_for_subjects(batch, inputs, detail::subjects_mask(n, out));
      for (std::size_t g = 0; g < grid.size(); ++g) {
        Mlp net = detail::train_nnsurv_once(train, &val, depth, grid[g], cfg,
                                            derive_seed(cfg.seed, "nnsurv-fold", static_cast<std::uint64_t>(f)));
        fit.cv_score[g] += nnsurv_cross_entropy(net, held.inputs, held.target) / static_cast<double>(held.inputs.rows());
      }
    }
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g)
      if (fit.cv_score[g] < fit.cv_score[best])
        best = g;
    fit.ridge = grid[best];
  }
  std::vector<Index> all(n);
  std::iota(all.begin(), all.end(), Index{0});
  auto [train, val] = detail::with_validation(batch, inputs, data.event(), all, cfg.validation_fraction,
                                              derive_seed(cfg.seed, "nnsurv-val-final"));
  fit.net = detail::train_nnsurv_once(train, &val, depth, fit.ridge, cfg, derive_seed(cfg.seed, "nnsurv-final"),
                                      &fit.trace);
  return fit;
}

//! S(t_l) = prod_{l' <= l} (1 - h_{l'}), step function on the cut points.
inline SurvivalCurve nnsurv_survival_from_hazards(const DiscreteTimeGrid& grid, const Vector& hazards)
{
  if (static_cast<std::size_t>(hazards.size()) != grid.intervals())
    throw std::invalid_argument("nnsurv_survival: one hazard per interval required");
  std::vector<double> probs(grid.cuts.size());
  probs[0] = 1.0;
  for (std::size_t l = 1; l < probs.size(); ++l)
    probs[l] = probs[l - 1] * (1.0 - std::clamp(hazards[static_cast<Index>(l - 1)], 0.0, 1.0));
  return SurvivalCurve(grid.cuts, std::move(probs), Interpolation::step);
}

inline SurvivalCurve nnsurv_survival(const NnsurvFit& fit, const Eigen::Ref<const Vector>& x)
{
  return nnsurv_survival_from_hazards(fit.grid, fit.hazards(x));
}

} // namespace survnet::nnet
