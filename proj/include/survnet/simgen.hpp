#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/tools/roots.hpp>

#include "core.hpp"

namespace survnet {

// Reference baseline parameters used for table reproduction.
inline constexpr double kWeibullShape = 2.0;
inline constexpr double kWeibullRate = 1.3e-7;
inline constexpr double kLogNormalMu = 7.73;
inline constexpr double kLogNormalSigma = 0.1760;
inline constexpr double kLogNormalSigmaAH = 0.7;

//! Signal strength ||beta||_2 of the default coefficient vector. Calibrated
//! once so the exact-model C_td on Cox-Weibull, p = 10, 30% censoring sits
//! near 0.744 (see tests/simgen_test.cpp, ReferenceConcordanceCalibration).
inline constexpr double kDefaultBetaScale = 1.05;
//! Same for the AH / log-normal (sigma = 0.7) simulation, targeting an
//! exact-model C_td near 0.7225.
inline constexpr double kAhBetaScale = 1.8;

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

//! Standard normal upper tail 1 - Phi(z), accurate for large z.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

inline double normal_quantile(double u)
{
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

//! log(1 - Phi(z)), finite far into the upper tail.
inline double log_normal_sf(double z)
{
  if (z < 30.0)
    return std::log(normal_sf(z));
  double z2 = z * z;
  return -0.5 * z2 - std::log(z) - 0.5 * std::log(2.0 * M_PI) + std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

//! z with log(1 - Phi(z)) = -u, for u > 0.
inline double normal_quantile_log_sf(double u)
{
  double p = -std::expm1(-u);  // Phi(z)
  if (p < 0.5)
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
  if (u < 700.0)
    return std::sqrt(2.0) * boost::math::erfc_inv(2.0 * std::exp(-u));
  double z = std::sqrt(2.0 * u);
  for (int it = 0; it < 50; ++it) {
    // d/dz log(1 - Phi(z)) ~ -z - 1/z in this range
    double step = (log_normal_sf(z) + u) / (-z - 1.0 / z);
    z -= step;
    if (std::abs(step) < 1e-14 * z)
      break;
  }
  return z;
}

//! Baseline distribution of the survival time: Weibull(shape a, rate lambda)
//! with H0(t) = lambda t^a, or log-normal(mu, sigma) on the log scale.
struct BaselineDist
{
  enum class Kind
  {
    weibull,
    lognormal
  };

  Kind kind = Kind::weibull;
  double shape = kWeibullShape;  // a
  double rate = kWeibullRate;    // lambda
  double mu = kLogNormalMu;
  double sigma = kLogNormalSigma;

  static BaselineDist weibull(double a, double lambda)
  {
    if (!(a > 0.0) || !(lambda > 0.0))
      throw std::invalid_argument("Weibull baseline requires a > 0 and lambda > 0");
    BaselineDist d;
    d.kind = Kind::weibull;
    d.shape = a;
    d.rate = lambda;
    return d;
  }

  static BaselineDist lognormal(double mu, double sigma)
  {
    if (!(sigma > 0.0) || !std::isfinite(mu))
      throw std::invalid_argument("log-normal baseline requires sigma > 0 and finite mu");
    BaselineDist d;
    d.kind = Kind::lognormal;
    d.mu = mu;
    d.sigma = sigma;
    return d;
  }

  std::string name() const { return kind == Kind::weibull ? "weibull" : "lognormal"; }

  double cumulative_hazard(double t) const
  {
    if (t <= 0.0)
      return 0.0;
    if (kind == Kind::weibull)
      return rate * std::pow(t, shape);
    return -log_normal_sf((std::log(t) - mu) / sigma);
  }

  double hazard(double t) const
  {
    if (t <= 0.0)
      return kind == Kind::weibull && shape < 1.0 ? std::numeric_limits<double>::infinity() : 0.0;
    if (kind == Kind::weibull)
      return shape * rate * std::pow(t, shape - 1.0);
    double z = (std::log(t) - mu) / sigma;
    double log_dens = -0.5 * z * z - std::log(sigma * t * std::sqrt(2.0 * M_PI));
    return std::exp(log_dens - log_normal_sf(z));
  }

  //! H0^{-1}(u) for u >= 0.
  double inverse_cumulative_hazard(double u) const
  {
    if (!(u >= 0.0))
      throw std::domain_error("inverse_cumulative_hazard: argument must be nonnegative");
    if (kind == Kind::weibull)
      return std::pow(u / rate, 1.0 / shape);
    if (u == 0.0)
      return 0.0;
    // exp(sigma Phi^{-1}(1 - e^{-u}) + mu)
    return std::exp(sigma * normal_quantile_log_sf(u) + mu);
  }
};

inline double inverse_cumulative_hazard(const BaselineDist& baseline, double u)
{
  return baseline.inverse_cumulative_hazard(u);
}

enum class ModelFamily
{
  cox,
  ah,
  aft
};

inline std::string to_string(ModelFamily f)
{
  switch (f) {
    case ModelFamily::cox: return "cox";
    case ModelFamily::ah: return "ah";
    case ModelFamily::aft: return "aft";
  }
  return "?";
}

inline ModelFamily parse_family(const std::string& s)
{
  if (s == "cox" || s == "Cox")
    return ModelFamily::cox;
  if (s == "ah" || s == "AH")
    return ModelFamily::ah;
  if (s == "aft" || s == "AFT")
    return ModelFamily::aft;
  throw std::invalid_argument("unknown model family '" + s + "'");
}

inline double default_beta_scale(ModelFamily family)
{
  return family == ModelFamily::ah ? kAhBetaScale : kDefaultBetaScale;
}

//! (psi1, psi2) for linear predictor c = beta^T x, so that
//! S(t | x) = exp(-H0(psi1 t) psi2).
inline std::pair<double, double> family_psi(ModelFamily family, double c)
{
  switch (family) {
    case ModelFamily::cox: return {1.0, std::exp(c)};
    case ModelFamily::ah: return {std::exp(c), std::exp(-c)};
    case ModelFamily::aft: return {std::exp(c), 1.0};
  }
  throw std::logic_error("unreachable");
}

//! Inverse-transform draw T = H0^{-1}(-log(1-u) / psi2) / psi1.
inline double draw_survival_time(ModelFamily family, const BaselineDist& baseline,
                                 double linear_predictor, double u)
{
  if (!(u > 0.0 && u < 1.0))
    throw std::domain_error("draw_survival_time: u must lie in the open interval (0,1)");
  auto [psi1, psi2] = family_psi(family, linear_predictor);
  return baseline.inverse_cumulative_hazard(-std::log1p(-u) / psi2) / psi1;
}

inline double draw_survival_time(ModelFamily family, const BaselineDist& baseline,
                                 const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& beta,
                                 double u)
{
  if (x.size() != beta.size())
    throw std::invalid_argument("draw_survival_time: covariate and coefficient lengths differ");
  return draw_survival_time(family, baseline, x.dot(beta), u);
}

inline double model_survival(ModelFamily family, const BaselineDist& baseline,
                             double linear_predictor, double t)
{
  if (t <= 0.0)
    return 1.0;
  auto [psi1, psi2] = family_psi(family, linear_predictor);
  return std::exp(-baseline.cumulative_hazard(psi1 * t) * psi2);
}

//! Weibull moments: E(T) = Gamma(1/a + 1) / lambda^{1/a},
//! Var(T) = (Gamma(2/a + 1) - Gamma(1/a + 1)^2) / lambda^{2/a}.
inline std::pair<double, double> weibull_moments(double a, double lambda)
{
  double g1 = std::tgamma(1.0 / a + 1.0);
  double g2 = std::tgamma(2.0 / a + 1.0);
  double mean = g1 / std::pow(lambda, 1.0 / a);
  double var = (g2 - g1 * g1) / std::pow(lambda, 2.0 / a);
  return {mean, std::sqrt(var)};
}

inline std::pair<double, double> lognormal_moments(double mu, double sigma)
{
  double mean = std::exp(mu + 0.5 * sigma * sigma);
  double var = (std::exp(sigma * sigma) - 1.0) * mean * mean;
  return {mean, std::sqrt(var)};
}

struct WeibullParams
{
  double shape;
  double rate;
};

//! Solves the Weibull mean/sd system; the coefficient of variation depends
//! on the shape only, so this is a 1-D root search on a in [0.2, 20].
inline WeibullParams calibrate_weibull(double target_mean, double target_sd)
{
  if (!(target_mean > 0.0) || !(target_sd > 0.0))
    throw std::invalid_argument("calibrate_weibull: targets must be positive");
  const double cv2 = (target_sd / target_mean) * (target_sd / target_mean);
  auto excess = [cv2](double a) {
    double g1 = std::tgamma(1.0 / a + 1.0);
    double g2 = std::tgamma(2.0 / a + 1.0);
    return std::log(g2 / (g1 * g1)) - std::log1p(cv2);
  };
  const double lo = 0.2, hi = 20.0;
  double flo = excess(lo), fhi = excess(hi);
  if (flo * fhi > 0.0)
    throw std::domain_error("calibrate_weibull: no shape in [0.2, 20] matches sd/mean = " +
                            std::to_string(target_sd / target_mean));
  boost::uintmax_t iters = 200;
  auto [a_lo, a_hi] = boost::math::tools::toms748_solve(
    excess, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(52), iters);
  double a = 0.5 * (a_lo + a_hi);
  double lambda = std::pow(std::tgamma(1.0 / a + 1.0) / target_mean, a);
  return {a, lambda};
}

//! Weibull rate matching a target mean for a fixed shape.
inline double weibull_rate_for_mean(double shape, double target_mean)
{
  return std::pow(std::tgamma(1.0 / shape + 1.0) / target_mean, shape);
}

struct LogNormalParams
{
  double mu;
  double sigma;
};

//! Closed form: sigma^2 = ln(1 + Var/E^2), mu = ln E - sigma^2 / 2.
inline LogNormalParams calibrate_lognormal(double target_mean, double target_sd)
{
  if (!(target_mean > 0.0) || !(target_sd >= 0.0))
    throw std::invalid_argument("calibrate_lognormal: targets must be positive");
  double r = target_sd / target_mean;
  double s2 = std::log1p(r * r);
  return {std::log(target_mean) - 0.5 * s2, std::sqrt(s2)};
}

//! mu giving the target mean for a chosen sigma.
inline double lognormal_mu_for_sigma(double target_mean, double sigma)
{
  return std::log(target_mean) - 0.5 * sigma * sigma;
}

struct SimulationSpec
{
  ModelFamily family = ModelFamily::cox;
  BaselineDist baseline = BaselineDist::weibull(kWeibullShape, kWeibullRate);
  Index n = 200;
  Index p = 10;
  Index k = 10;  // relevant covariates
  double beta_scale = kDefaultBetaScale;
  double censor_target = 0.3;
  std::uint64_t seed = 1;

  void validate() const
  {
    if (n < 2)
      throw std::invalid_argument("SimulationSpec: n must be at least 2");
    if (p < 1 || k < 0 || k > p)
      throw std::invalid_argument("SimulationSpec: need 0 <= k <= p and p >= 1");
    if (!(censor_target >= 0.0 && censor_target < 1.0))
      throw std::invalid_argument("SimulationSpec: censor_target must lie in [0,1)");
    if (!std::isfinite(beta_scale))
      throw std::invalid_argument("SimulationSpec: beta_scale must be finite");
  }
};

//! First k coefficients nonzero with alternating signs, magnitude scale/sqrt(k).
inline Vector make_beta(Index p, Index k, double beta_scale)
{
  Vector beta = Vector::Zero(p);
  if (k == 0)
    return beta;
  double mag = beta_scale / std::sqrt(static_cast<double>(k));
  for (Index j = 0; j < k; ++j)
    beta[j] = (j % 2 == 0) ? mag : -mag;
  return beta;
}

struct SimulatedDataset
{
  SurvivalDataset data;
  Vector true_beta;
  Vector true_event_times;  // Y_i
  Vector censor_times;      // C_i (infinite when censoring is disabled)
  double censor_rate = 0.0;
  ModelFamily family = ModelFamily::cox;
  BaselineDist baseline;
};

//! Exponential censoring rate r with mean_i (1 - exp(-r Y_i)) = target, i.e.
//! the conditional censoring probability averaged over the drawn times.
inline double calibrate_censor_rate(const Vector& event_times, double target)
{
  auto censored = [&](double log_rate) {
    double r = std::exp(log_rate);
    double s = 0.0;
    for (Index i = 0; i < event_times.size(); ++i)
      s += -std::expm1(-r * event_times[i]);
    return s / static_cast<double>(event_times.size());
  };
  std::vector<double> sorted(event_times.data(), event_times.data() + event_times.size());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  double med = sorted[sorted.size() / 2];
  double lo = std::log(1e-10 / med), hi = std::log(1e10 / med);
  double flo = censored(lo) - target, fhi = censored(hi) - target;
  if (flo > 0.0 || fhi < 0.0)
    throw std::domain_error("generate: censoring calibration failed to bracket target " +
                            std::to_string(target) + " (achievable range [" +
                            std::to_string(flo + target) + ", " + std::to_string(fhi + target) + "])");
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    double mid = 0.5 * (lo + hi);
    if (censored(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

//! Draws a censored dataset. Every subject owns deterministic streams
//! derived from (seed, subject), so output is independent of evaluation order.
inline SimulatedDataset generate(const SimulationSpec& spec)
{
  spec.validate();
  const Index n = spec.n, p = spec.p;
  Vector beta = make_beta(p, spec.k, spec.beta_scale);
  Matrix x(n, p);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    Rng rx(derive_seed(spec.seed, "covariates", static_cast<std::uint64_t>(i)));
    for (Index j = 0; j < p; ++j)
      x(i, j) = rx.normal();
    Rng ru(derive_seed(spec.seed, "event-time", static_cast<std::uint64_t>(i)));
    y[i] = draw_survival_time(spec.family, spec.baseline, x.row(i).dot(beta), ru.uniform());
    if (!(y[i] > 0.0) || !std::isfinite(y[i]))
      throw std::domain_error("generate: drew a degenerate survival time for subject " + std::to_string(i));
  }

  Vector c = Vector::Constant(n, std::numeric_limits<double>::infinity());
  double rate = 0.0;
  if (spec.censor_target > 0.0) {
    rate = calibrate_censor_rate(y, spec.censor_target);
    for (Index i = 0; i < n; ++i) {
      Rng rc(derive_seed(spec.seed, "censoring", static_cast<std::uint64_t>(i)));
      c[i] = rc.exponential(rate);
    }
  }
  Vector t(n);
  std::vector<int> e(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    bool observed = y[i] <= c[i];
    t[i] = observed ? y[i] : c[i];
    e[static_cast<std::size_t>(i)] = observed ? 1 : 0;
  }
  SimulatedDataset out{SurvivalDataset(std::move(x), std::move(t), std::move(e)),
                       std::move(beta), std::move(y), std::move(c), rate, spec.family, spec.baseline};
  return out;
}

//! Exact model survival S(t | x) on `grid`.
inline SurvivalCurve true_survival(const SimulatedDataset& sim, const Eigen::Ref<const Vector>& x,
                                   const std::vector<double>& grid)
{
  if (x.size() != sim.true_beta.size())
    throw std::invalid_argument("true_survival: covariate length mismatch");
  double c = x.dot(sim.true_beta);
  std::vector<double> probs(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (k > 0 && !(grid[k] > grid[k - 1]))
      throw std::invalid_argument("true_survival: grid must be increasing");
    probs[k] = model_survival(sim.family, sim.baseline, c, grid[k]);
    if (k > 0)
      probs[k] = std::min(probs[k], probs[k - 1]);  // guard rounding
  }
  return SurvivalCurve(grid, std::move(probs), Interpolation::linear);
}

} // namespace survnet
