#include <gtest/gtest.h>

#include <survnet/metrics.hpp>
#include <survnet/nnet/coxnnet.hpp>
#include <survnet/nnet/nnsurv.hpp>
#include <survnet/simgen.hpp>

#include "support/oracles.hpp"

using namespace survnet;
using namespace survnet::nnet;

namespace {

SimulatedDataset simulate(ModelFamily fam, Index n, Index p, std::uint64_t seed)
{
  SimulationSpec s;
  s.family = fam;
  if (fam == ModelFamily::ah)
    s.baseline = BaselineDist::lognormal(kLogNormalMu, kLogNormalSigmaAH);
  s.beta_scale = default_beta_scale(fam);
  s.n = n;
  s.p = p;
  s.k = p;
  s.seed = seed;
  return generate(s);
}

Vector random_params(Index count, std::uint64_t seed, double scale = 0.5)
{
  Rng rng(seed);
  Vector v(count);
  for (Index k = 0; k < count; ++k)
    v[k] = scale * rng.normal();
  return v;
}

TrainConfig quick(int epochs, double ridge, std::uint64_t seed = 1)
{
  TrainConfig c;
  c.epochs = epochs;
  c.ridge = ridge;
  c.validation_fraction = 0.0;
  c.seed = seed;
  return c;
}

struct SilenceWarnings : ::testing::Test
{
  void SetUp() override { warning_sink() = [](const std::string&) {}; }
  void TearDown() override { warning_sink() = nullptr; }
};

} // namespace

TEST(Mlp, ZeroNetworkOutputsBiasActivation)
{
  auto net = Mlp::make(3, {4}, 1, Activation::tanh, Activation::sigmoid);
  Vector x(3);
  x << 1.0, -2.0, 0.5;
  EXPECT_DOUBLE_EQ(mlp_forward(net, x)[0], 0.5);
}

TEST(Mlp, ForwardMatchesMatrixFormula)
{
  // y = W2 tanh(W1 x + b1) + b2
  auto net = Mlp::make(3, {2}, 1, Activation::tanh, Activation::identity);
  net.set_params(random_params(net.num_params(), 5));
  Matrix w1 = net.weight(0), w2 = net.weight(1);
  Vector b1 = net.bias(0), b2 = net.bias(1);
  Vector x(3);
  x << 0.2, -0.4, 1.1;
  Vector hid = (w1 * x + b1).array().tanh();
  EXPECT_NEAR(mlp_forward(net, x)[0], (w2 * hid + b2)[0], 1e-15);
}

TEST(Mlp, ShapeAndInputValidation)
{
  EXPECT_THROW(Mlp({{3, 2, Activation::relu}, {3, 1, Activation::identity}}), std::invalid_argument);
  auto net = Mlp::make(2, {3}, 1, Activation::relu, Activation::identity);
  EXPECT_EQ(net.num_params(), 2 * 3 + 3 + 3 * 1 + 1);
  EXPECT_THROW(net.predict(Matrix::Zero(4, 3)), std::invalid_argument);
  Matrix bad = Matrix::Zero(1, 2);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(net.predict(bad), std::domain_error);
  EXPECT_THROW(net.set_params(Vector::Zero(3)), std::invalid_argument);
}

TEST(Mlp, InitializationIsSeededAndBounded)
{
  auto a = Mlp::make(9, {5}, 1, Activation::tanh, Activation::identity), b = a;
  a.initialize(3);
  b.initialize(3);
  EXPECT_EQ(a.params(), b.params());
  EXPECT_LE(a.weight(0).cwiseAbs().maxCoeff(), 1.0 / 3.0);
  EXPECT_EQ(a.bias(0).norm(), 0.0);
}

TEST(CoxNnetLoss, ZeroWeightsGiveSumOfLogRiskSetSizes)
{
  auto sim = simulate(ModelFamily::cox, 40, 3, 2);
  auto net = make_coxnnet(3, quick(1, 0.0));
  auto lg = coxnnet_loss_and_grad(net, sim.data, 0.0);
  double expect = 0.0;
  for (Index i = 0; i < sim.data.n(); ++i) {
    if (!sim.data.event(i))
      continue;
    double size = 0.0;
    for (Index l = 0; l < sim.data.n(); ++l)
      size += sim.data.time(l) >= sim.data.time(i);
    expect += std::log(size);
  }
  EXPECT_NEAR(lg.loss, expect, 1e-10);
}

TEST(CoxNnetLoss, GradientMatchesFiniteDifferences)
{
  auto sim = simulate(ModelFamily::cox, 10, 3, 3);
  TrainConfig c = quick(1, 0.0);
  c.hidden = {2};
  auto net = make_coxnnet(3, c);
  for (std::uint64_t rep = 0; rep < 5; ++rep) {
    net.set_params(random_params(net.num_params(), 10 + rep));
    double ridge = 0.01 * double(rep);
    auto lg = coxnnet_loss_and_grad(net, sim.data, ridge);
    Vector fd = oracle::numeric_gradient(
        [&](const Vector& th) {
          Mlp m = net;
          m.set_params(th);
          return coxnnet_loss_and_grad(m, sim.data, ridge).loss;
        },
        net.params());
    EXPECT_LT(oracle::relative_error(lg.grad, fd), 1e-6);
  }
}

TEST_F(SilenceWarnings, CoxNnetLossWithoutEventsIsPenaltyOnly)
{
  Matrix x = Matrix::Ones(3, 2);
  Vector t(3);
  t << 1, 2, 3;
  SurvivalDataset d(x, t, {0, 0, 0});
  auto net = make_coxnnet(2, quick(1, 0.0));
  net.set_params(Vector::Ones(net.num_params()));
  EXPECT_NEAR(coxnnet_loss_and_grad(net, d, 0.5).loss, 0.5 * double(net.num_params()), 1e-12);
}

TEST(CoxNnetFit, LargeRidgeShrinksParameters)
{
  auto sim = simulate(ModelFamily::cox, 200, 5, 4);
  auto small = coxnnet_fit(sim.data, quick(1500, 0.0));
  auto large = coxnnet_fit(sim.data, quick(1500, 1e4));
  EXPECT_LT(large.net.params().norm(), 0.1 * small.net.params().norm());
}

TEST(CoxNnetFit, RecoversLinearPredictorOrdering)
{
  auto sim = simulate(ModelFamily::cox, 1000, 10, 5);
  auto fit = coxnnet_fit(sim.data, quick(300, 0.1));
  Vector lp = sim.data.x() * sim.true_beta;
  Vector s = fit.scores(sim.data.x());
  std::vector<double> a(lp.data(), lp.data() + lp.size()), b(s.data(), s.data() + s.size());
  EXPECT_GT(oracle::spearman(a, b), 0.7);
}

TEST(CoxNnetFit, DeterministicForSeed)
{
  auto sim = simulate(ModelFamily::cox, 150, 4, 6);
  auto a = coxnnet_fit(sim.data, quick(50, 0.1, 7));
  auto b = coxnnet_fit(sim.data, quick(50, 0.1, 7));
  EXPECT_EQ(a.net.params(), b.net.params());
  auto c = coxnnet_fit(sim.data, quick(50, 0.1, 8));
  EXPECT_NE(a.net.params(), c.net.params());
}

TEST(CoxNnetFit, RidgeGridIsCrossValidated)
{
  auto sim = simulate(ModelFamily::cox, 150, 4, 7);
  TrainConfig c = quick(40, 0.0);
  c.ridge_grid = {0.1, 1000.0};
  auto fit = coxnnet_fit(sim.data, c);
  ASSERT_EQ(fit.cv_score.size(), 2u);
  EXPECT_EQ(fit.ridge, c.ridge_grid[fit.cv_score[0] > fit.cv_score[1] ? 0 : 1]);
}

TEST(CoxNnetFit, SingleHiddenUnitScoresAreMonotoneInProjection)
{
  // with one tanh unit and identity output, theta is monotone in w1^T z
  auto sim = simulate(ModelFamily::cox, 200, 3, 8);
  TrainConfig c = quick(100, 0.1);
  c.hidden = {1};
  auto fit = coxnnet_fit(sim.data, c);
  Matrix z = fit.transform.apply(sim.data.x());
  Vector proj = z * fit.net.weight(0).row(0).transpose();
  Vector s = fit.scores(sim.data.x());
  double w2 = fit.net.weight(1)(0, 0);
  for (Index i = 0; i < z.rows(); ++i)
    for (Index j = 0; j < z.rows(); ++j)
      if (proj[i] < proj[j] - 1e-12) {
        if (w2 > 0)
          ASSERT_LE(s[i], s[j]);
        else
          ASSERT_GE(s[i], s[j]);
      }
}

TEST(CoxNnetFit, RejectsDataWithoutEvents)
{
  Matrix x = Matrix::Ones(3, 2);
  Vector t(3);
  t << 1, 2, 3;
  EXPECT_THROW(coxnnet_fit(SurvivalDataset(x, t, {0, 0, 0}), quick(5, 0.1)), std::invalid_argument);
}

TEST(TimeGrid, TwoIntervalsCutAtMedian)
{
  Matrix x = Matrix::Zero(5, 1);
  Vector t(5);
  t << 5, 1, 4, 2, 3;
  auto g = build_time_grid(SurvivalDataset(x, t, {1, 1, 1, 1, 1}), 2);
  ASSERT_EQ(g.cuts.size(), 3u);
  EXPECT_EQ(g.cuts[0], 0.0);
  EXPECT_EQ(g.cuts[1], 3.0);
  EXPECT_EQ(g.cuts[2], 5.0);
  EXPECT_EQ(g.midpoints[0], 1.5);
  EXPECT_EQ(g.interval_of(3.0), 1u);
  EXPECT_EQ(g.interval_of(3.5), 2u);
  EXPECT_EQ(g.interval_of(99.0), 2u);
}

TEST(TimeGrid, IntervalsPartitionObservedTimes)
{
  auto sim = simulate(ModelFamily::cox, 300, 2, 9);
  auto g = build_time_grid(sim.data, 20);
  EXPECT_EQ(g.intervals(), 20u);
  std::vector<int> count(21, 0);
  for (Index i = 0; i < sim.data.n(); ++i) {
    std::size_t l = g.interval_of(sim.data.time(i));
    ASSERT_GE(l, 1u);
    ASSERT_LE(l, 20u);
    EXPECT_GT(sim.data.time(i), g.cuts[l - 1]);
    EXPECT_LE(sim.data.time(i), g.cuts[l]);
    count[l]++;
  }
  for (std::size_t l = 1; l <= 20; ++l)
    EXPECT_NEAR(count[l], 15, 2);
}

TEST(TimeGrid, TooFewDistinctTimes)
{
  Matrix x = Matrix::Zero(4, 1);
  Vector t(4);
  t << 1, 1, 2, 2;
  EXPECT_THROW(build_time_grid(SurvivalDataset(x, t, {1, 1, 1, 1}), 3), std::invalid_argument);
  EXPECT_THROW(build_time_grid(SurvivalDataset(x, t, {1, 1, 1, 1}), 1), std::invalid_argument);
}

TEST(Duplicate, RowsAndTargets)
{
  // cuts 0 | 2 | 4 | 6; subject A at 3 (event) spans 2 rows, B at 6 (censored) 3 rows
  auto g = DiscreteTimeGrid::from_cuts({0.0, 2.0, 4.0, 6.0});
  Matrix x(2, 1);
  x << 7.0, 8.0;
  Vector t(2);
  t << 3.0, 6.0;
  auto b = duplicate(SurvivalDataset(x, t, {1, 0}), g);
  ASSERT_EQ(b.rows(), 5);
  std::vector<double> target(b.target.data(), b.target.data() + 5);
  EXPECT_EQ(target, (std::vector<double>{0, 1, 0, 0, 0}));
  EXPECT_EQ(b.inputs(1, 0), 7.0);
  EXPECT_EQ(b.inputs(1, 1), 3.0);
  EXPECT_EQ(b.inputs(4, 0), 8.0);
  EXPECT_EQ(b.inputs(4, 1), 5.0);
  EXPECT_EQ(b.interval, (std::vector<std::size_t>{1, 2, 1, 2, 3}));
}

TEST(NnsurvLoss, ZeroNetworkSingleRowIsLogTwo)
{
  auto net = make_nnsurv(3, 1, quick(1, 0.0));
  Matrix in = Matrix::Ones(1, 3);
  Vector y = Vector::Ones(1);
  EXPECT_NEAR(nnsurv_loss_and_grad(net, in, y, 0.0).loss, std::log(2.0), 1e-15);
}

TEST(NnsurvLoss, NearZeroWhenHazardMatchesTarget)
{
  TrainConfig c = quick(1, 0.0);
  c.hidden = {2};
  auto net = make_nnsurv(2, 1, c);
  Matrix in = Matrix::Zero(2, 2);
  in(1, 0) = 1.0;
  net.bias(1)[0] = 20.0;
  EXPECT_LT(nnsurv_loss_and_grad(net, in.topRows(1), Vector::Ones(1), 0.0).loss, 1e-8);
  net.bias(1)[0] = -20.0;
  EXPECT_LT(nnsurv_loss_and_grad(net, in.topRows(1), Vector::Zero(1), 0.0).loss, 1e-8);
}

TEST(NnsurvLoss, GradientMatchesFiniteDifferences)
{
  auto sim = simulate(ModelFamily::ah, 12, 3, 10);
  auto g = build_time_grid(sim.data, 3);
  auto batch = duplicate(sim.data, g);
  Matrix in = fit_standardizer(batch.inputs).apply(batch.inputs);
  for (int depth : {1, 2}) {
    TrainConfig c = quick(1, 0.0);
    c.hidden.assign(std::size_t(depth), 3);
    auto net = make_nnsurv(4, depth, c);
    net.set_params(random_params(net.num_params(), 20 + std::uint64_t(depth), 0.7));
    auto lg = nnsurv_loss_and_grad(net, in, batch.target, 0.05);
    Vector fd = oracle::numeric_gradient(
        [&](const Vector& th) {
          Mlp m = net;
          m.set_params(th);
          return nnsurv_loss_and_grad(m, in, batch.target, 0.05).loss;
        },
        net.params());
    EXPECT_LT(oracle::relative_error(lg.grad, fd), 1e-6) << "depth " << depth;
  }
}

TEST(NnsurvLoss, RequiresSigmoidOutput)
{
  auto net = Mlp::make(2, {2}, 1, Activation::relu, Activation::identity);
  EXPECT_THROW(nnsurv_loss_and_grad(net, Matrix::Zero(1, 2), Vector::Zero(1), 0.0), std::invalid_argument);
  EXPECT_THROW(make_nnsurv(3, 3, quick(1, 0.0)), std::invalid_argument);
}

TEST(NnsurvSurvival, ProductOfOneMinusHazards)
{
  auto g = DiscreteTimeGrid::from_cuts({0.0, 1.0, 2.0});
  Vector h(2);
  h << 0.5, 0.5;
  auto s = nnsurv_survival_from_hazards(g, h);
  EXPECT_EQ(s.at(1.0), 0.5);
  EXPECT_EQ(s.at(2.0), 0.25);
  auto one = nnsurv_survival_from_hazards(g, Vector::Zero(2));
  EXPECT_EQ(one.at(2.0), 1.0);
  EXPECT_THROW(nnsurv_survival_from_hazards(g, Vector::Zero(3)), std::invalid_argument);
}

TEST(NnsurvFit, DeterministicForSeed)
{
  auto sim = simulate(ModelFamily::ah, 200, 4, 11);
  auto a = nnsurv_fit(sim.data, quick(20, 0.1, 3), 1, 10);
  auto b = nnsurv_fit(sim.data, quick(20, 0.1, 3), 1, 10);
  EXPECT_EQ(a.net.params(), b.net.params());
}

TEST(NnsurvFit, TrainingLossDecreases)
{
  auto sim = simulate(ModelFamily::ah, 300, 4, 12);
  auto fit = nnsurv_fit(sim.data, quick(60, 0.0), 2, 10);
  ASSERT_GE(fit.trace.train_loss.size(), 2u);
  EXPECT_LT(fit.trace.train_loss.back(), 0.9 * fit.trace.train_loss.front());
}

TEST(NnsurvFit, ConcordantOnAdditiveHazardsData)
{
  auto train = simulate(ModelFamily::ah, 1000, 10, 13);
  auto test = simulate(ModelFamily::ah, 400, 10, 14);
  auto fit = nnsurv_fit(train.data, quick(100, 0.1), 1, 20);
  std::vector<SurvivalCurve> curves;
  for (Index i = 0; i < test.data.n(); ++i)
    curves.push_back(nnsurv_survival(fit, test.data.x().row(i).transpose()));
  double c = c_index_td(curves, test.data.time(), test.data.event());
  EXPECT_GT(c, 0.65);
  EXPECT_THROW(fit.hazards(Vector::Zero(3)), std::invalid_argument);
}
