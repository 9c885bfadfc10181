#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "../core.hpp"

namespace survnet::nnet {

enum class Activation
{
  tanh,
  relu,
  sigmoid,
  identity
};

inline std::string to_string(Activation a)
{
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::identity: return "identity";
  }
  return "?";
}

inline Activation parse_activation(const std::string& s)
{
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

struct LayerShape
{
  Index in = 0;
  Index out = 0;
  Activation act = Activation::identity;

  bool operator==(const LayerShape&) const = default;
};

inline void activate(Activation act, Matrix& z)
{
  switch (act) {
    case Activation::tanh: z = z.array().tanh(); break;
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::sigmoid: z = (1.0 + (-z.array()).exp()).inverse(); break;
    case Activation::identity: break;
  }
}

//! d act / d z expressed through the pre-activation z and output a.
inline Matrix activation_slope(Activation act, const Matrix& z, const Matrix& a)
{
  switch (act) {
    case Activation::tanh: return (1.0 - a.array().square()).matrix();
    case Activation::relu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::sigmoid: return (a.array() * (1.0 - a.array())).matrix();
    case Activation::identity: return Matrix::Ones(z.rows(), z.cols());
  }
  throw std::logic_error("unreachable");
}

//! Activations of one forward pass; z[l] and a[l] belong to layer l.
struct ForwardCache
{
  std::vector<Matrix> z;
  std::vector<Matrix> a;

  const Matrix& output() const { return a.back(); }
};

//! Fully connected network. All weights and biases live in one flat vector
//! (layer by layer: W as out x in column-major, then b) so optimizers,
//! penalties and serialization operate on a single array.
class Mlp
{
public:
  Mlp() = default;

  explicit Mlp(std::vector<LayerShape> layers)
    : layers_(std::move(layers))
  {
    if (layers_.empty())
      throw std::invalid_argument("Mlp: need at least one layer");
    Index off = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (layers_[l].in < 1 || layers_[l].out < 1)
        throw std::invalid_argument("Mlp: layer dimensions must be positive");
      if (l > 0 && layers_[l].in != layers_[l - 1].out)
        throw std::invalid_argument("Mlp: consecutive layer dimensions do not chain");
      offsets_.push_back(off);
      off += layers_[l].in * layers_[l].out + layers_[l].out;
    }
    theta_ = Vector::Zero(off);
  }

  //! input -> hidden... -> output, hidden layers sharing one activation.
  static Mlp make(Index input, const std::vector<Index>& hidden, Index output, Activation hidden_act,
                  Activation output_act)
  {
    std::vector<LayerShape> shapes;
    Index prev = input;
    for (Index h : hidden) {
      shapes.push_back({prev, h, hidden_act});
      prev = h;
    }
    shapes.push_back({prev, output, output_act});
    return Mlp(std::move(shapes));
  }

  const std::vector<LayerShape>& layers() const { return layers_; }
  std::size_t depth() const { return layers_.size(); }
  Index input_dim() const { return layers_.front().in; }
  Index output_dim() const { return layers_.back().out; }
  Index num_params() const { return theta_.size(); }

  const Vector& params() const { return theta_; }
  Vector& params() { return theta_; }

  void set_params(const Vector& theta)
  {
    if (theta.size() != theta_.size())
      throw std::invalid_argument("Mlp: parameter vector length mismatch");
    theta_ = theta;
  }

  Eigen::Map<const Matrix> weight(std::size_t l) const
  {
    return {theta_.data() + offsets_[l], layers_[l].out, layers_[l].in};
  }
  Eigen::Map<Matrix> weight(std::size_t l)
  {
    return {theta_.data() + offsets_[l], layers_[l].out, layers_[l].in};
  }
  Eigen::Map<const Vector> bias(std::size_t l) const
  {
    return {theta_.data() + offsets_[l] + layers_[l].in * layers_[l].out, layers_[l].out};
  }
  Eigen::Map<Vector> bias(std::size_t l)
  {
    return {theta_.data() + offsets_[l] + layers_[l].in * layers_[l].out, layers_[l].out};
  }

  //! Weights uniform on +-1/sqrt(fan_in), biases zero.
  void initialize(std::uint64_t seed)
  {
    Rng rng(derive_seed(seed, "mlp-init"));
    theta_.setZero();
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      double r = 1.0 / std::sqrt(static_cast<double>(layers_[l].in));
      auto w = weight(l);
      for (Index c = 0; c < w.cols(); ++c)
        for (Index o = 0; o < w.rows(); ++o)
          w(o, c) = rng.uniform(-r, r);
    }
  }

  //! Batch forward pass; rows of `x` are inputs.
  ForwardCache forward(const Matrix& x) const
  {
    if (x.cols() != input_dim())
      throw std::invalid_argument("Mlp::forward: input has " + std::to_string(x.cols()) +
                                  " columns, expected " + std::to_string(input_dim()));
    if (!x.allFinite())
      throw std::domain_error("Mlp::forward: non-finite input");
    ForwardCache cache;
    cache.z.reserve(layers_.size());
    cache.a.reserve(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Matrix& in = l == 0 ? x : cache.a.back();
      Matrix z = in * weight(l).transpose();
      z.rowwise() += bias(l).transpose();
      Matrix a = z;
      activate(layers_[l].act, a);
      cache.z.push_back(std::move(z));
      cache.a.push_back(std::move(a));
    }
    return cache;
  }

  Matrix predict(const Matrix& x) const { return forward(x).output(); }

  //! Gradient of a loss with respect to all parameters, given the loss
  //! gradient with respect to the network output (rows match `x`).
  Vector backward(const Matrix& x, const ForwardCache& cache, const Matrix& d_output) const
  {
    Vector grad = Vector::Zero(theta_.size());
    Matrix delta = d_output;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      delta.array() *= activation_slope(layers_[l].act, cache.z[l], cache.a[l]).array();
      const Matrix& in = l == 0 ? x : cache.a[l - 1];
      Eigen::Map<Matrix> gw(grad.data() + offsets_[l], layers_[l].out, layers_[l].in);
      gw.noalias() = delta.transpose() * in;
      Eigen::Map<Vector> gb(grad.data() + offsets_[l] + layers_[l].in * layers_[l].out, layers_[l].out);
      gb = delta.colwise().sum().transpose();
      if (l > 0)
        delta = delta * weight(l);
    }
    return grad;
  }

private:
  std::vector<LayerShape> layers_;
  std::vector<Index> offsets_;
  Vector theta_;
};

//! Single-row forward pass.
inline Vector mlp_forward(const Mlp& net, const Eigen::Ref<const Vector>& x)
{
  Matrix row = x.transpose();
  return net.forward(row).output().row(0).transpose();
}

struct LossGrad
{
  double loss = 0.0;
  Vector grad;
};

//! Adam with bias correction.
struct Adam
{
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Vector m, v;
  long t = 0;

  void step(Vector& theta, const Vector& grad)
  {
    if (m.size() != theta.size()) {
      m = Vector::Zero(theta.size());
      v = Vector::Zero(theta.size());
      t = 0;
    }
    ++t;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
    double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

//! Hyper-parameters shared by the network fitters.
struct TrainConfig
{
  double learning_rate = 1e-3;
  double ridge = 0.0;                // used when ridge_grid is empty
  std::vector<double> ridge_grid{};  // CV grid for the ridge weight
  int cv_folds = 3;
  int epochs = 500;
  Index batch_size = 256;            // discrete-time networks only
  int patience = 20;
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;
  std::vector<Index> hidden{};       // empty: default size per layer
};

//! min(64, ceil(sqrt(p)) + 8)
inline Index default_hidden_size(Index p)
{
  return std::min<Index>(64, static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(p)))) + 8);
}

struct TrainTrace
{
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = -1;
  bool stopped_early = false;
};

//! Adam training loop with early stopping on a validation loss. `epoch_step`
//! performs one epoch of updates and returns the epoch's training loss.
template<typename EpochStep, typename ValidationLoss>
TrainTrace train_with_early_stopping(Mlp& net, const TrainConfig& cfg, EpochStep&& epoch_step,
                                     ValidationLoss&& validation_loss)
{
  Adam opt;
  opt.lr = cfg.learning_rate;
  TrainTrace trace;
  Vector best = net.params();
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss = epoch_step(net, opt);
    if (!std::isfinite(loss) || !net.params().allFinite())
      throw std::runtime_error("network training diverged: non-finite loss at epoch " + std::to_string(epoch));
    trace.train_loss.push_back(loss);
    double val = validation_loss(net);
    trace.validation_loss.push_back(val);
    if (val < best_val) {
      best_val = val;
      best = net.params();
      trace.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      trace.stopped_early = true;
      break;
    }
  }
  net.set_params(best);
  return trace;
}

} // namespace survnet::nnet
