#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "rlrt/montecarlo.hpp"

namespace {

using namespace rlrt;

TEST(Philox, KnownAnswerVectors) {
  // Published Random123 test vectors for Philox4x32-10.
  using P = rng::Philox4x32;
  EXPECT_EQ(P::generate({0, 0, 0, 0}, {0, 0}), (P::Block{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(P::generate({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (P::Block{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(P::generate({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (P::Block{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Stream, ReproducibleAndDistinct) {
  rng::Stream a({42, 3, 7}), b({42, 3, 7}), c({42, 3, 8}), d({42, 4, 7});
  bool differs_c = false, differs_d = false;
  for (int i = 0; i < 64; ++i) {
    const auto x = a.next_u32();
    EXPECT_EQ(x, b.next_u32());
    differs_c = differs_c || x != c.next_u32();
    differs_d = differs_d || x != d.next_u32();
  }
  EXPECT_TRUE(differs_c);
  EXPECT_TRUE(differs_d);
}

TEST(Stream, UniformAndNormalMoments) {
  rng::Stream s({1, 0, 0});
  const int count = 200000;
  double umin = 1.0, umax = 0.0, sum = 0.0, sq = 0.0, quad = 0.0;
  for (int i = 0; i < count; ++i) {
    const double u = s.uniform();
    umin = std::min(umin, u);
    umax = std::max(umax, u);
  }
  EXPECT_GT(umin, 0.0);
  EXPECT_LT(umax, 1.0);
  for (int i = 0; i < count; ++i) {
    const double z = s.normal();
    sum += z;
    sq += z * z;
    quad += z * z * z * z;
  }
  EXPECT_NEAR(sum / count, 0.0, 0.01);
  EXPECT_NEAR(sq / count, 1.0, 0.015);
  EXPECT_NEAR(quad / count, 3.0, 0.08);
}

TEST(Parallel, EveryIndexOnceAndExceptionsPropagate) {
  std::vector<int> hits(1000, 0);
  parallel::for_each_index(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel::for_each_index(100, 4,
                                        [](std::size_t i) {
                                          if (i == 57) throw NumericError("boom");
                                        }),
               NumericError);
}

TEST(A1TwosRule, CountsAndParsing) {
  EXPECT_EQ(A1TwosRule::parse("max").count(10), 2u);
  EXPECT_EQ(A1TwosRule::parse("min").count(10), 1u);
  EXPECT_EQ(A1TwosRule::parse("max").count(4), 1u);
  EXPECT_EQ(A1TwosRule::parse("min").count(4), 0u);
  EXPECT_EQ(A1TwosRule::parse("fixed:3").count(10), 3u);
  EXPECT_EQ(A1TwosRule::parse("fixed:30").count(10), 10u);
  EXPECT_EQ(A1TwosRule::parse("fixed:3").name(), "fixed:3");
  EXPECT_THROW(A1TwosRule::parse("fixed:"), DomainError);
  EXPECT_THROW(A1TwosRule::parse("median"), DomainError);
}

TEST(Scenario, ParseAndName) {
  EXPECT_EQ(Scenario::parse("a3").name(), "a3");
  EXPECT_EQ(Scenario::parse("cs:2.5").name(), "cs:2.5");
  EXPECT_THROW(Scenario::parse("cs:x"), DomainError);
  EXPECT_THROW(Scenario::parse("a5"), DomainError);
}

TEST(MaterializeSigma, Scenarios) {
  EXPECT_EQ(mc::materialize_sigma(Scenario::null(), 4), Matrix::Identity(4, 4));
  const Matrix a2 = mc::materialize_sigma(Scenario::a2(), 10);
  EXPECT_DOUBLE_EQ(a2(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(a2.trace(), 12.0);
  EXPECT_EQ((a2 - Matrix(a2.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 0.0);
  const Matrix a1 = mc::materialize_sigma(Scenario::a1(), 10);
  EXPECT_DOUBLE_EQ(a1.trace(), 12.0);
  const auto cs = cov::sym_eigenvalues(mc::materialize_sigma(Scenario::cs_beta(2.0), 4));
  EXPECT_NEAR(cs[0], 3.0, 1e-14);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_NEAR(cs[i], 1.0, 1e-14);
  EXPECT_DOUBLE_EQ(mc::materialize_sigma(Scenario::a3(), 5)(0, 1), 0.2);
  EXPECT_DOUBLE_EQ(mc::materialize_sigma(Scenario::a4(), 5)(0, 0), 1.1);
  EXPECT_THROW(mc::materialize_sigma(Scenario::cs_beta(-2.0), 4), DomainError);
  Matrix bad = Matrix::Identity(3, 3);
  bad(0, 0) = -1.0;
  EXPECT_THROW(mc::materialize_sigma(Scenario::custom_sigma(bad), 3), DomainError);
}

TEST(SampleMvn, ZeroCovarianceGivesZeros) {
  rng::Stream s({0, 0, 0});
  EXPECT_EQ(mc::sample_mvn(5, Matrix::Zero(3, 3), s).values().cwiseAbs().maxCoeff(), 0.0);
}

TEST(SampleMvn, LawOfLargeNumbers) {
  rng::Stream s({5, 0, 0});
  const auto identity = cov::sample_covariance(mc::sample_mvn(100000, Matrix::Identity(2, 2), s)).matrix;
  EXPECT_LT((identity - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.02);
  const Matrix sigma = mc::materialize_sigma(Scenario::cs_beta(1.5), 3);
  const auto estimate = cov::sample_covariance(mc::sample_mvn(100000, sigma, s)).matrix;
  EXPECT_LT((estimate - sigma).cwiseAbs().maxCoeff(), 0.03);
}

TEST(SampleMvn, DeterministicPerStream) {
  const Matrix sigma = mc::materialize_sigma(Scenario::a3(), 4);
  rng::Stream a({9, 1, 2}), b({9, 1, 2});
  EXPECT_EQ(mc::sample_mvn(6, sigma, a).values(), mc::sample_mvn(6, sigma, b).values());
}

TEST(DimensionFor, Rounds) {
  EXPECT_EQ(mc::dimension_for(0.5, 40), 20u);
  EXPECT_EQ(mc::dimension_for(0.2, 20), 4u);
  EXPECT_EQ(mc::dimension_for(0.01, 20), 1u);
  EXPECT_THROW(mc::dimension_for(0.0, 20), DomainError);
}

mc::SimulationGrid small_grid() {
  mc::SimulationGrid g;
  g.scenarios = {Scenario::null(), Scenario::a3()};
  g.sample_sizes = {20};
  g.gammas = {0.2, 0.5};
  g.methods = {MethodSpec::clrt(), MethodSpec::rlrt(0.5), MethodSpec::lw(), MethodSpec::chen()};
  g.reps = 300;
  g.chen_reps = 100;
  g.master_seed = 77;
  return g;
}

bool same_results(const std::vector<mc::CellResult>& a, const std::vector<mc::CellResult>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].rejection_rate != b[i].rejection_rate || a[i].monte_carlo_se != b[i].monte_carlo_se ||
        a[i].method != b[i].method || a[i].error != b[i].error || a[i].reps != b[i].reps)
      return false;
  }
  return true;
}

TEST(RunGrid, IndependentOfWorkerCount) {
  auto g = small_grid();
  g.workers = 1;
  const auto serial = mc::run_grid(g);
  for (std::size_t w : {4u, 16u}) {
    g.workers = w;
    EXPECT_TRUE(same_results(serial, mc::run_grid(g))) << w;
  }
  ASSERT_EQ(serial.size(), 16u);
  EXPECT_EQ(serial[3].reps, 100u);
}

TEST(RunGrid, SingleReplicationRatesAreDegenerate) {
  auto g = small_grid();
  g.reps = 1;
  g.chen_reps = 1;
  for (const auto& cell : mc::run_grid(g)) {
    EXPECT_TRUE(cell.rejection_rate == 0.0 || cell.rejection_rate == 1.0);
    EXPECT_EQ(cell.monte_carlo_se, 0.0);
  }
}

TEST(RunGrid, ValidationAndPerCellErrors) {
  auto g = small_grid();
  g.reps = 0;
  EXPECT_THROW(mc::run_grid(g), DomainError);
  g = small_grid();
  g.gammas = {0.95};
  g.reps = 10;
  const auto cells = mc::run_grid(g);
  EXPECT_FALSE(cells[0].error.empty());  // cLRT outside the calibration regime
  EXPECT_TRUE(cells[2].error.empty());   // LW still runs
}

TEST(RejectionRate, SizeNearLevelAtSmallScale) {
  const auto est = mc::rejection_rate(MethodSpec::rlrt(0.5), Scenario::null(), 80, 40, 4000, 3, 0, 0.05);
  EXPECT_NEAR(est.rate, 0.05, 0.02);
}

TEST(EmpiricalCriticalValue, DeterministicAndCalibrated) {
  const DimensionSetup setup(40, 20);
  const double q = mc::empirical_critical_value(MethodSpec::lw(), setup, 0.05, 40000, 1, 0);
  EXPECT_EQ(q, mc::empirical_critical_value(MethodSpec::lw(), setup, 0.05, 40000, 1, 3));
  const auto est = mc::rejection_rate(MethodSpec::lw(), Scenario::null(), 40, 20, 40000, 2, 0, 0.05, q);
  EXPECT_NEAR(est.rate, 0.05, 0.005);
  EXPECT_THROW(mc::empirical_critical_value(MethodSpec::lw(), setup, 0.05, 999, 1), DomainError);
}

TEST(EmpiricalPowerCurve, ZeroBetaRecoversLevel) {
  const auto curve = mc::empirical_power_curve({0.0, 3.0}, DimensionSetup(81, 40), MethodSpec::rlrt(0.5), 2000, 4);
  EXPECT_NEAR(curve[0].rate, 0.05, 0.025);
  EXPECT_GT(curve[1].rate, curve[0].rate);
}

TEST(Histogram, NormalizedAndMoments) {
  const auto h = mc::empirical_density(MethodSpec::rlrt(0.5), Scenario::null(), 40, 20, 1000, 6, 25);
  double mass = 0.0;
  for (double d : h.density) mass += d * h.width;
  EXPECT_NEAR(mass, 1.0, 1e-12);
  EXPECT_EQ(h.reps, 1000u);
  EXPECT_GT(h.variance, 0.0);
  EXPECT_THROW(mc::histogram({}, 10), DomainError);
}

}  // namespace
