#include "regdata/datagen.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "test_support.hpp"

using namespace regdata;
using regtest::desk_exosystem;
using regtest::desk_internal_model;
using regtest::desk_plant;

namespace {

Plant scalar_plant(double a) {
  Plant pl;
  pl.A = Mat::Constant(1, 1, a);
  pl.B = Mat::Ones(1, 1);
  pl.C = Mat::Ones(1, 1);
  pl.D = Mat::Zero(1, 1);
  pl.E = Mat::Zero(1, 1);
  pl.F = Mat::Zero(1, 1);
  return pl;
}

Exosystem trivial_exo() { return {Mat::Zero(1, 1), Vec::Zero(1)}; }

ExplorationInput single_sine(double amp, double w, double phase) {
  ExplorationInput in;
  in.amplitudes = Mat::Constant(1, 1, amp);
  in.frequencies = Mat::Constant(1, 1, w);
  in.phases = Mat::Constant(1, 1, phase);
  return in;
}

// Residual of the integral identity
//   delta * vecs(P) == I_ss * vecs(Y'P + PY) + 2 Gamma_su * vec(J'P)
//                      + 2 Gamma_sv * vec(Ev'P)
// where Ev is the exogenous input matrix of whichever compensator ran.
double data_identity_residual(const DataMatrices& dm, const Mat& y, const Mat& j,
                              const Mat& ev, const Mat& p) {
  Vec lhs = dm.delta * vecs(p);
  Vec rhs = dm.I_ss * vecs(Mat(y.transpose() * p + p * y)) +
            2.0 * dm.gamma_su * vec(Mat(j.transpose() * p)) +
            2.0 * dm.gamma_sv * vec(Mat(ev.transpose() * p));
  return (lhs - rhs).norm();
}

double signal_scale(const Trajectory& traj, const Mat& p) {
  double m = 0.0;
  for (Index i = 0; i < traj.samples(); ++i) {
    Vec xi(traj.x.cols() + traj.z.cols());
    xi << traj.x.row(i).transpose(), traj.z.row(i).transpose();
    m = std::max(m, xi.norm() + traj.u.row(i).norm() + traj.v.row(i).norm());
  }
  return (1.0 + m) * (1.0 + m) * (1.0 + p.norm());
}

}  // namespace

TEST(Simulate, ConstantTrajectory) {
  Plant pl = scalar_plant(0.0);
  pl.B = Mat::Zero(1, 1);
  SimOptions opt;
  opt.T = 1.0;
  opt.h = 1e-2;
  Vec x0 = Vec::Constant(1, 3.0);
  auto traj = simulate(pl, trivial_exo(), nullptr, CompensatorMode::none,
                       FeedbackGain{Mat::Zero(1, 1)}, opt, x0, Vec(), Vec::Zero(1));
  EXPECT_EQ(traj.samples(), 101);
  EXPECT_NEAR(traj.x.col(0).minCoeff(), 3.0, 1e-14);
  EXPECT_NEAR(traj.x.col(0).maxCoeff(), 3.0, 1e-14);
}

TEST(Simulate, RotationExosystemClosedForm) {
  Plant pl = scalar_plant(0.0);
  pl.E = Mat::Zero(1, 2);
  pl.F = Mat::Zero(1, 2);
  Exosystem exo = desk_exosystem();
  SimOptions opt;
  opt.T = 10.0;
  opt.h = 1e-3;
  auto traj = simulate(pl, exo, nullptr, CompensatorMode::none,
                       FeedbackGain{Mat::Zero(1, 1)}, opt, Vec::Zero(1), Vec(),
                       exo.v0);
  double max_err = 0.0;
  for (Index i = 0; i < traj.samples(); ++i) {
    const double t = traj.t[static_cast<size_t>(i)];
    max_err = std::max(max_err, std::abs(traj.v(i, 0) - std::cos(t)));
    max_err = std::max(max_err, std::abs(traj.v(i, 1) + std::sin(t)));
  }
  EXPECT_LE(max_err, 1e-8);
}

TEST(Simulate, ScalarLinearOdeClosedForm) {
  SimOptions opt;
  opt.T = 10.0;
  opt.h = 1e-3;
  auto traj = simulate(scalar_plant(-1.0), trivial_exo(), nullptr,
                       CompensatorMode::none, single_sine(1.0, 1.0, 0.0), opt,
                       Vec::Zero(1), Vec(), Vec::Zero(1));
  double max_err = 0.0;
  for (Index i = 0; i < traj.samples(); ++i) {
    const double t = traj.t[static_cast<size_t>(i)];
    const double exact = 0.5 * (std::sin(t) - std::cos(t) + std::exp(-t));
    max_err = std::max(max_err, std::abs(traj.x(i, 0) - exact));
  }
  EXPECT_LE(max_err, 1e-8);
}

TEST(Simulate, BlowUpOnUnstablePlant) {
  SimOptions opt;
  opt.T = 25.0;
  opt.h = 1e-3;
  EXPECT_THROW(simulate(scalar_plant(1.0), trivial_exo(), nullptr,
                        CompensatorMode::none, single_sine(0.0, 1.0, 0.0), opt,
                        Vec::Ones(1), Vec(), Vec::Zero(1)),
               BlowUpError);
}

TEST(DataMatrices, ConstantStateInterval) {
  Trajectory traj;
  traj.h = 1e-2;
  traj.mode = CompensatorMode::none;
  const Index steps = 100;
  traj.t.resize(steps + 1);
  traj.x.resize(steps + 1, 1);
  traj.z.resize(steps + 1, 0);
  traj.v.resize(steps + 1, 0);
  traj.u.resize(steps + 1, 1);
  traj.y.resize(steps + 1, 1);
  traj.e.resize(steps + 1, 1);
  for (Index i = 0; i <= steps; ++i) {
    traj.t[static_cast<size_t>(i)] = traj.h * static_cast<double>(i);
    traj.x(i, 0) = 2.0;
    traj.u(i, 0) = 0.0;
  }
  auto dm = build_data_matrices(traj, steps);
  ASSERT_EQ(dm.samples(), 1);
  EXPECT_NEAR(dm.delta(0, 0), 0.0, 1e-14);
  EXPECT_NEAR(dm.I_ss(0, 0), 4.0, 1e-12);  // vecv(2) integrated over [0, 1]
}

TEST(DataMatrices, LinearRampIntegral) {
  Trajectory traj;
  traj.h = 1e-2;
  traj.mode = CompensatorMode::none;
  const Index steps = 100;
  traj.t.resize(steps + 1);
  traj.x.resize(steps + 1, 1);
  traj.z.resize(steps + 1, 0);
  traj.v.resize(steps + 1, 0);
  traj.u.resize(steps + 1, 1);
  traj.y.resize(steps + 1, 1);
  traj.e.resize(steps + 1, 1);
  for (Index i = 0; i <= steps; ++i) {
    const double t = traj.h * static_cast<double>(i);
    traj.t[static_cast<size_t>(i)] = t;
    traj.x(i, 0) = t;
    traj.u(i, 0) = 1.0;
  }
  auto dm = build_data_matrices(traj, steps);
  EXPECT_NEAR(dm.gamma_su(0, 0), 0.5, traj.h * traj.h);
  EXPECT_NEAR(dm.I_ss(0, 0), 1.0 / 3.0, traj.h * traj.h);
  EXPECT_NEAR(dm.delta(0, 0), 1.0, 1e-14);
}

TEST(DataMatrices, InsufficientSamplesThrows) {
  Trajectory traj;
  traj.h = 1e-2;
  traj.t.resize(10);
  traj.x.resize(10, 1);
  traj.z.resize(10, 0);
  traj.v.resize(10, 0);
  traj.u.resize(10, 1);
  EXPECT_THROW(build_data_matrices(traj, 100), DimensionError);
}

namespace {

// Desk-fixture collection run shared by the identity and rank tests.
Trajectory collect_desk(CompensatorMode mode, double T, double h,
                        std::uint64_t seed) {
  Plant pl = desk_plant();
  Exosystem exo = desk_exosystem();
  auto im = desk_internal_model();
  auto input = make_exploration_input(pl.m(), pl.q(), pl.n(), im.n_z(), seed,
                                      0.5, 0.3, 8.0);
  SimOptions opt;
  opt.T = T;
  opt.h = h;
  return simulate(pl, exo, &im, mode, input, opt, Vec::Zero(2), Vec::Zero(2),
                  exo.v0);
}

}  // namespace

TEST(DataMatrices, IntegralIdentityLearningCompensator) {
  auto im = desk_internal_model();
  auto aug = build_augmented(desk_plant(), im);
  auto traj = collect_desk(CompensatorMode::learning, 20.0, 1e-3, 11);
  auto dm = build_data_matrices(traj, 100);

  std::mt19937 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    Mat p = regtest::random_symmetric(rng, 4);
    const double res = data_identity_residual(dm, aug.Y, aug.J, aug.E0, p);
    const double tol = 10.0 * dm.h * dm.h * static_cast<double>(dm.samples()) *
                       signal_scale(traj, p);
    EXPECT_LE(res, tol);
  }
}

TEST(DataMatrices, IntegralIdentityControlCompensator) {
  auto im = desk_internal_model();
  auto aug = build_augmented(desk_plant(), im);
  auto traj = collect_desk(CompensatorMode::control, 20.0, 1e-3, 12);
  auto dm = build_data_matrices(traj, 100);

  std::mt19937 rng(32);
  for (int trial = 0; trial < 5; ++trial) {
    Mat p = regtest::random_symmetric(rng, 4);
    const double res = data_identity_residual(dm, aug.Y, aug.J, aug.EG, p);
    const double tol = 10.0 * dm.h * dm.h * static_cast<double>(dm.samples()) *
                       signal_scale(traj, p);
    EXPECT_LE(res, tol);
  }
}

// Halving h must shrink the identity residual at second order.
TEST(DataMatrices, QuadratureConsistencyOrder) {
  auto im = desk_internal_model();
  auto aug = build_augmented(desk_plant(), im);
  std::mt19937 rng(33);
  Mat p = regtest::random_symmetric(rng, 4);

  auto traj1 = collect_desk(CompensatorMode::learning, 20.0, 1e-3, 13);
  auto dm1 = build_data_matrices(traj1, 100);
  auto traj2 = collect_desk(CompensatorMode::learning, 20.0, 5e-4, 13);
  auto dm2 = build_data_matrices(traj2, 200);

  const double r1 = data_identity_residual(dm1, aug.Y, aug.J, aug.E0, p);
  const double r2 = data_identity_residual(dm2, aug.Y, aug.J, aug.E0, p);
  const double ratio = r1 / r2;
  EXPECT_GE(ratio, 3.0);
  EXPECT_LE(ratio, 5.0);
}

TEST(DataMatrices, IntervalAdditivity) {
  auto traj = collect_desk(CompensatorMode::control, 10.0, 1e-3, 14);
  auto fine = build_data_matrices(traj, 100);
  auto coarse = build_data_matrices(traj, 200);
  for (Index j = 0; j < coarse.samples(); ++j) {
    Vec sum = fine.gamma_su.row(2 * j) + fine.gamma_su.row(2 * j + 1);
    EXPECT_LE((coarse.gamma_su.row(j).transpose() - sum).norm(),
              1e-12 * std::max(1.0, sum.norm()));
    Vec dsum = fine.delta.row(2 * j) + fine.delta.row(2 * j + 1);
    EXPECT_LE((coarse.delta.row(j).transpose() - dsum).norm(),
              1e-12 * std::max(1.0, dsum.norm()));
  }
}

TEST(DataMatrices, DeltaTelescopes) {
  auto traj = collect_desk(CompensatorMode::control, 10.0, 1e-3, 15);
  auto dm = build_data_matrices(traj, 100);
  Vec total = Vec::Zero(dm.delta.cols());
  for (Index j = 0; j < dm.samples(); ++j) total += dm.delta.row(j).transpose();

  const Index last = dm.samples() * dm.stride;
  Vec xi0(4), xiT(4);
  xi0 << traj.x.row(0).transpose(), traj.z.row(0).transpose();
  xiT << traj.x.row(last).transpose(), traj.z.row(last).transpose();
  Vec expect = vecv(xiT) - vecv(xi0);
  EXPECT_LE((total - expect).norm(), 1e-12 * std::max(1.0, expect.norm()));
}

TEST(RankCondition, MonotoneInSampleCount) {
  auto traj = collect_desk(CompensatorMode::learning, 12.0, 1e-3, 16);
  auto dm = build_data_matrices(traj, 100);
  Index prev_rank = 0;
  for (Index s : {Index{5}, Index{10}, Index{20}, Index{40}, dm.samples()}) {
    DataMatrices head = dm;
    head.delta = dm.delta.topRows(s);
    head.I_ss = dm.I_ss.topRows(s);
    head.gamma_ss = dm.gamma_ss.topRows(s);
    head.gamma_su = dm.gamma_su.topRows(s);
    head.gamma_sv = dm.gamma_sv.topRows(s);
    head.gamma_xv = dm.gamma_xv.topRows(s);
    auto rep = check_rank_condition(head, RankCase::improved_or);
    EXPECT_GE(rep.rank, prev_rank);
    prev_rank = rep.rank;
  }
}

TEST(RankCondition, TooShortTrajectoryFails) {
  auto traj = collect_desk(CompensatorMode::learning, 1.0, 1e-3, 17);
  auto dm = build_data_matrices(traj, 100);
  ASSERT_LT(dm.samples(), check_rank_condition(dm, RankCase::first_or).required);
  EXPECT_FALSE(check_rank_condition(dm, RankCase::first_or).ok);
}

TEST(RankCondition, RequiredCountsMatchTableDims) {
  DataMatrices dm;
  dm.dim = 60;
  dm.n = 10;
  dm.m = 8;
  dm.q = 20;
  dm.delta.resize(0, sym_size(60));
  dm.I_ss.resize(0, sym_size(60));
  dm.gamma_ss.resize(0, 3600);
  dm.gamma_su.resize(0, 480);
  dm.gamma_sv.resize(0, 1200);
  dm.gamma_xv.resize(0, 200);
  EXPECT_EQ(check_rank_condition(dm, RankCase::first_or).required, 3510);
  EXPECT_EQ(check_rank_condition(dm, RankCase::improved_or).required, 2510);
}

TEST(RankCondition, SatisfiedOnDeskFixtureCollection) {
  auto traj = collect_desk(CompensatorMode::learning, 30.0, 1e-3, 1);
  auto dm = build_data_matrices(traj, 100);
  EXPECT_TRUE(check_rank_condition(dm, RankCase::improved_or).ok);
  auto traj_c = collect_desk(CompensatorMode::control, 30.0, 1e-3, 1);
  auto dm_c = build_data_matrices(traj_c, 100);
  EXPECT_TRUE(check_rank_condition(dm_c, RankCase::first_or).ok);
  EXPECT_TRUE(check_rank_condition(dm_c, RankCase::pi_lqr).ok);
  EXPECT_TRUE(check_rank_condition(dm_c, RankCase::vi_lqr).ok);
}

TEST(Exploration, DeterministicInSeed) {
  auto a = make_exploration_input(2, 2, 2, 2, 42, 1.0, 0.3, 8.0);
  auto b = make_exploration_input(2, 2, 2, 2, 42, 1.0, 0.3, 8.0);
  EXPECT_EQ(a.frequencies, b.frequencies);
  EXPECT_EQ(a.phases, b.phases);
  auto c = make_exploration_input(2, 2, 2, 2, 43, 1.0, 0.3, 8.0);
  EXPECT_NE(a.frequencies, c.frequencies);
}

TEST(Exploration, ChannelsDrawDisjointFrequencies) {
  auto in = make_exploration_input(2, 2, 2, 2, 7, 1.0, 0.3, 8.0);
  EXPECT_NE(Mat(in.frequencies.row(0)), Mat(in.frequencies.row(1)));
  for (Index i = 0; i < in.frequencies.rows(); ++i)
    for (Index a = 0; a < in.frequencies.cols(); ++a)
      for (Index b = a + 1; b < in.frequencies.cols(); ++b)
        EXPECT_NE(in.frequencies(i, a), in.frequencies(i, b));
}

TEST(Exploration, BadBandThrows) {
  EXPECT_THROW(make_exploration_input(1, 1, 1, 1, 1, 1.0, 2.0, 1.0),
               DimensionError);
}
