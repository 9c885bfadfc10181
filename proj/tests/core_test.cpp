#include <gtest/gtest.h>

#include <set>

#include <survnet/core.hpp>

#include "support/oracles.hpp"

using namespace survnet;

namespace {

SurvivalDataset toy(std::vector<double> times, std::vector<int> events, Index p = 1)
{
  const Index n = static_cast<Index>(times.size());
  Matrix x = Matrix::Zero(n, p);
  for (Index i = 0; i < n; ++i)
    x(i, 0) = static_cast<double>(i);
  return SurvivalDataset(x, Eigen::Map<Vector>(times.data(), n), events);
}

} // namespace

TEST(SurvivalDataset, RejectsNonPositiveTimes)
{
  EXPECT_THROW(toy({1.0, 0.0}, {1, 1}), std::invalid_argument);
  EXPECT_THROW(toy({1.0, -2.0}, {1, 1}), std::invalid_argument);
}

TEST(SurvivalDataset, RejectsEventOutsideZeroOne)
{
  EXPECT_THROW(toy({1.0, 2.0}, {1, 2}), std::invalid_argument);
}

TEST(SurvivalDataset, RejectsLengthMismatch)
{
  Matrix x = Matrix::Zero(3, 2);
  Vector t = Vector::Ones(2);
  EXPECT_THROW(SurvivalDataset(x, t, {1, 1}), std::invalid_argument);
}

TEST(SurvivalDataset, SubsetKeepsRowOrder)
{
  auto d = toy({5, 6, 7, 8}, {1, 0, 1, 0});
  std::vector<Index> rows{3, 1};
  auto s = d.subset(rows);
  ASSERT_EQ(s.n(), 2);
  EXPECT_EQ(s.time(0), 8.0);
  EXPECT_EQ(s.time(1), 6.0);
  EXPECT_EQ(s.x()(0, 0), 3.0);
  EXPECT_EQ(s.event(0), 0);
}

TEST(RiskSets, SmallestTimeIsAtRiskWithEveryone)
{
  auto d = toy({3, 1, 2}, {1, 1, 0});
  auto rs = build_risk_sets(d);
  auto m = rs.members(1);
  std::set<Index> got(m.begin(), m.end());
  EXPECT_EQ(got, (std::set<Index>{0, 1, 2}));
}

TEST(RiskSets, SizesOfAscendingTimes)
{
  auto rs = build_risk_sets(toy({1, 2, 3}, {1, 1, 1}));
  EXPECT_EQ(rs.risk_set_size(0), 3u);
  EXPECT_EQ(rs.risk_set_size(1), 2u);
  EXPECT_EQ(rs.risk_set_size(2), 1u);
}

TEST(RiskSets, SingleSubjectContainsItself)
{
  auto rs = build_risk_sets(toy({4}, {1}));
  ASSERT_EQ(rs.risk_set_size(0), 1u);
  EXPECT_EQ(rs.members(0)[0], 0);
}

TEST(RiskSets, TiedTimesShareRiskSet)
{
  auto rs = build_risk_sets(toy({2, 1, 2, 3}, {1, 1, 0, 1}));
  EXPECT_EQ(rs.risk_set_size(0), 3u);
  EXPECT_EQ(rs.risk_set_size(2), 3u);
}

TEST(RiskSets, MatchDefinitionOnRandomTimes)
{
  Rng rng(1);
  Vector t(40);
  for (Index i = 0; i < t.size(); ++i)
    t[i] = 1.0 + static_cast<double>(rng.below(15));
  RiskSetIndex rs(t);
  for (Index i = 0; i < t.size(); ++i) {
    std::set<Index> expect;
    for (Index l = 0; l < t.size(); ++l)
      if (t[l] >= t[i])
        expect.insert(l);
    auto m = rs.members(i);
    EXPECT_EQ(std::set<Index>(m.begin(), m.end()), expect);
  }
}

TEST(CoxRiskStructure, LoglikMatchesEnumeration)
{
  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = 2 + static_cast<Index>(rng.below(10));
    Matrix x(n, 2);
    Vector t(n), beta(2);
    std::vector<int> d(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      x(i, 0) = rng.normal();
      x(i, 1) = rng.normal();
      t[i] = 1.0 + static_cast<double>(rng.below(6));
      d[static_cast<std::size_t>(i)] = rng.uniform() < 0.6;
    }
    beta << rng.normal(), rng.normal();
    SurvivalDataset data(x, t, d);
    CoxRiskStructure rs(data);
    double got = rs.loglik(rs.sorted_rows(x) * beta);
    EXPECT_NEAR(got, oracle::cox_loglik(x, t, d, beta), 1e-10);
  }
}

TEST(Standardize, ConstantColumnMapsToZero)
{
  Matrix x(3, 1);
  x << 1, 1, 1;
  auto [z, s] = standardize_covariates(x);
  EXPECT_EQ(z.col(0), Vector::Zero(3));
  EXPECT_EQ(s.scale[0], 0.0);
}

TEST(Standardize, TwoPointColumnUsesSampleSd)
{
  // mean 1; sample sd sqrt(((0-1)^2 + (2-1)^2) / (2-1)) = sqrt(2)
  Matrix x(2, 1);
  x << 0, 2;
  auto [z, s] = standardize_covariates(x);
  EXPECT_DOUBLE_EQ(s.mean[0], 1.0);
  EXPECT_DOUBLE_EQ(s.scale[0], std::sqrt(2.0));
  EXPECT_NEAR(z(0, 0), -1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(z(1, 0), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(Standardize, IsIdempotent)
{
  Rng rng(3);
  Matrix x(50, 4);
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j)
      x(i, j) = 3.0 + 2.0 * rng.normal();
  auto [z, s] = standardize_covariates(x);
  auto [z2, s2] = standardize_covariates(z);
  EXPECT_LT((z2 - z).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Standardize, ApplyRowMatchesMatrixApply)
{
  Matrix x(5, 2);
  x << 1, 2, 3, 4, 5, 6, 7, 8, 9, 1;
  auto [z, s] = standardize_covariates(x);
  for (Index i = 0; i < 5; ++i)
    EXPECT_LT((s.apply_row(x.row(i).transpose()) - z.row(i).transpose()).norm(), 1e-15);
}

TEST(Split, StratifiedEightTwo)
{
  auto d = toy({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, {1, 0, 1, 0, 1, 0, 1, 0, 1, 0});
  auto [train, test] = train_test_split(d, 0.8, 42);
  ASSERT_EQ(train.n(), 8);
  ASSERT_EQ(test.n(), 2);
  EXPECT_EQ(test.n_events(), 1);
  EXPECT_NEAR(train.censoring_fraction(), 0.5, 1.0 / 8.0);
}

TEST(Split, DeterministicForSeed)
{
  auto d = toy({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, {1, 1, 1, 0, 1, 0, 1, 0, 1, 1});
  auto a = split_indices(d.event(), 2.0 / 3.0, 9);
  auto b = split_indices(d.event(), 2.0 / 3.0, 9);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
}

TEST(Split, PartitionsSubjects)
{
  std::vector<int> ev(101);
  for (std::size_t i = 0; i < ev.size(); ++i)
    ev[i] = i % 3 == 0;
  auto s = split_indices(ev, 2.0 / 3.0, 5);
  std::set<Index> all(s.train.begin(), s.train.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), ev.size());
  EXPECT_EQ(s.train.size() + s.test.size(), ev.size());
}

TEST(Split, EmptyTestPartIsAnError)
{
  auto d = toy({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, {1, 0, 1, 0, 1, 0, 1, 0, 1, 0});
  EXPECT_THROW(train_test_split(d, 0.999, 1), std::invalid_argument);
}

TEST(Folds, BalancedAcrossStrata)
{
  std::vector<int> ev(60);
  for (std::size_t i = 0; i < ev.size(); ++i)
    ev[i] = i < 40;
  auto f = stratified_folds(ev, 3, 7);
  std::vector<int> events(3, 0), total(3, 0);
  for (std::size_t i = 0; i < ev.size(); ++i) {
    total[std::size_t(f[i])]++;
    events[std::size_t(f[i])] += ev[i];
  }
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(total[std::size_t(k)], 20);
    EXPECT_NEAR(events[std::size_t(k)], 40.0 / 3.0, 1.0);
  }
}

TEST(SurvivalCurve, StepAndLinearEvaluation)
{
  SurvivalCurve step({1.0, 2.0, 3.0}, {0.9, 0.5, 0.2}, Interpolation::step);
  SurvivalCurve lin({1.0, 2.0, 3.0}, {0.9, 0.5, 0.2}, Interpolation::linear);
  EXPECT_EQ(step.at(0.5), 1.0);
  EXPECT_EQ(step.at(1.5), 0.9);
  EXPECT_EQ(step.at(2.0), 0.5);
  EXPECT_EQ(step.at(9.0), 0.2);
  EXPECT_DOUBLE_EQ(lin.at(1.5), 0.7);
  EXPECT_EQ(lin.at(9.0), 0.2);
}

TEST(SurvivalCurve, RejectsInvalidCurves)
{
  EXPECT_THROW(SurvivalCurve({1.0, 2.0}, {0.5, 0.6}), std::invalid_argument);
  EXPECT_THROW(SurvivalCurve({1.0, 1.0}, {0.5, 0.4}), std::invalid_argument);
  EXPECT_THROW(SurvivalCurve({1.0}, {1.2}), std::invalid_argument);
  EXPECT_THROW(SurvivalCurve({}, {}), std::invalid_argument);
}

TEST(Random, DerivedSeedsAreStableAndDistinct)
{
  EXPECT_EQ(derive_seed(1, "a"), derive_seed(1, "a"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "a", 1));
  Rng r1(5), r2(5);
  for (int k = 0; k < 10; ++k)
    EXPECT_EQ(r1.uniform(), r2.uniform());
}
