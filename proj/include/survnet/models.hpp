#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "baseline.hpp"
#include "core.hpp"
#include "coxlasso.hpp"
#include "nnet/coxnnet.hpp"
#include "nnet/nnsurv.hpp"

namespace survnet {

enum class ModelKind
{
  cox_l1,
  cox_nnet,
  nnsurv,
  nnsurv_deep
};

inline std::string model_name(ModelKind k)
{
  switch (k) {
    case ModelKind::cox_l1: return "CoxL1";
    case ModelKind::cox_nnet: return "Cox-nnet";
    case ModelKind::nnsurv: return "NNsurv";
    case ModelKind::nnsurv_deep: return "NNsurv-deep";
  }
  return "?";
}

inline ModelKind parse_model(const std::string& s)
{
  for (ModelKind k : {ModelKind::cox_l1, ModelKind::cox_nnet, ModelKind::nnsurv, ModelKind::nnsurv_deep})
    if (s == model_name(k))
      return k;
  throw std::invalid_argument("unknown model '" + s + "' (expected CoxL1, Cox-nnet, NNsurv or NNsurv-deep)");
}

inline const std::vector<ModelKind>& all_models()
{
  static const std::vector<ModelKind> models{ModelKind::cox_l1, ModelKind::cox_nnet, ModelKind::nnsurv,
                                             ModelKind::nnsurv_deep};
  return models;
}

struct ModelOptions
{
  LassoOptions lasso{};
  int lasso_folds = 5;
  std::optional<double> lasso_lambda{};  // skips CV when set
  double gl_kappa = 1.0;
  nnet::TrainConfig coxnnet = default_coxnnet_config();
  nnet::TrainConfig nnsurv = default_nnsurv_config();
  std::size_t intervals = 20;

  static nnet::TrainConfig default_coxnnet_config()
  {
    nnet::TrainConfig c;
    c.epochs = 500;
    c.validation_fraction = 0.0;  // ridge is chosen by CV; no early stopping
    c.ridge_grid = nnet::default_coxnnet_ridge_grid();
    return c;
  }

  static nnet::TrainConfig default_nnsurv_config()
  {
    nnet::TrainConfig c;
    c.learning_rate = 1e-3;
    c.epochs = 300;
    c.batch_size = 256;
    c.ridge_grid = nnet::default_nnsurv_ridge_grid();
    return c;
  }
};

struct CoxLassoModel
{
  CoxFit fit;
  BaselineEstimate baseline;
};

struct CoxNnetModel
{
  nnet::CoxNnetFit fit;
  BaselineEstimate baseline;
};

struct NnsurvModel
{
  nnet::NnsurvFit fit;
};

//! A fitted survival predictor: covariate rows in, survival curves out.
class FittedModel
{
public:
  using State = std::variant<CoxLassoModel, CoxNnetModel, NnsurvModel>;

  FittedModel(ModelKind kind, State state)
    : kind_(kind)
    , state_(std::move(state))
  {
  }

  ModelKind kind() const { return kind_; }
  std::string name() const { return model_name(kind_); }
  const State& state() const { return state_; }

  Index p() const
  {
    return std::visit(
      [](const auto& m) -> Index {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NnsurvModel>)
          return m.fit.transform.dim() - 1;
        else
          return m.fit.transform.dim();
      },
      state_);
  }

  //! Relative risk exp(eta(x)) for the proportional-hazards models.
  std::optional<double> risk_score(const Eigen::Ref<const Vector>& x) const
  {
    if (auto* m = std::get_if<CoxLassoModel>(&state_))
      return survnet::risk_score(m->fit, x);
    if (auto* m = std::get_if<CoxNnetModel>(&state_))
      return m->fit.score(x);
    return std::nullopt;
  }

  SurvivalCurve survival(const Eigen::Ref<const Vector>& x) const
  {
    if (x.size() != p())
      throw std::invalid_argument("FittedModel: covariate length " + std::to_string(x.size()) +
                                  " does not match the model (" + std::to_string(p()) + ")");
    if (auto* m = std::get_if<CoxLassoModel>(&state_))
      return survival_from_scores(m->baseline, survnet::risk_score(m->fit, x));
    if (auto* m = std::get_if<CoxNnetModel>(&state_))
      return nnet::coxnnet_survival(m->fit, m->baseline, x);
    return nnet::nnsurv_survival(std::get<NnsurvModel>(state_).fit, x);
  }

  std::vector<SurvivalCurve> survival_curves(const Matrix& x) const
  {
    std::vector<SurvivalCurve> out;
    out.reserve(static_cast<std::size_t>(x.rows()));
    for (Index i = 0; i < x.rows(); ++i)
      out.push_back(survival(x.row(i).transpose()));
    return out;
  }

private:
  ModelKind kind_;
  State state_;
};

inline FittedModel fit_model(ModelKind kind, const SurvivalDataset& train, const ModelOptions& opts,
                             std::uint64_t seed)
{
  switch (kind) {
    case ModelKind::cox_l1: {
      CoxLassoModel m;
      if (opts.lasso_lambda)
        m.fit = fit_lasso(train, *opts.lasso_lambda, opts.lasso);
      else
        m.fit = fit_lasso_cv(train, opts.lasso_folds, derive_seed(seed, "lasso-cv"), opts.lasso);
      Vector scores(train.n());
      for (Index i = 0; i < train.n(); ++i)
        scores[i] = risk_score(m.fit, train.x().row(i).transpose());
      m.baseline = estimate_baseline(train, scores, opts.gl_kappa);
      return FittedModel(kind, std::move(m));
    }
    case ModelKind::cox_nnet: {
      nnet::TrainConfig cfg = opts.coxnnet;
      cfg.seed = derive_seed(seed, "coxnnet");
      CoxNnetModel m;
      m.fit = nnet::coxnnet_fit(train, cfg);
      m.baseline = estimate_baseline(train, m.fit.train_scores, opts.gl_kappa);
      return FittedModel(kind, std::move(m));
    }
    case ModelKind::nnsurv:
    case ModelKind::nnsurv_deep: {
      nnet::TrainConfig cfg = opts.nnsurv;
      cfg.seed = derive_seed(seed, model_name(kind));
      NnsurvModel m;
      m.fit = nnet::nnsurv_fit(train, cfg, kind == ModelKind::nnsurv ? 1 : 2, opts.intervals);
      return FittedModel(kind, std::move(m));
    }
  }
  throw std::logic_error("unreachable");
}

} // namespace survnet
