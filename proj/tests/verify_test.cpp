#include <cmath>

#include <gtest/gtest.h>

#include "bomi/errors.hpp"
#include "bomi/verify.hpp"
#include "support.hpp"

namespace bomi {
namespace {

MatrixXd Sampled(double dt, int n, const std::function<VectorXd(double)>& f) {
  MatrixXd out(n, f(0).size());
  for (int i = 0; i < n; ++i) out.row(i) = f(i * dt).transpose();
  return out;
}

TEST(PeGramian, RotatingVectorOracle) {
  const double dt = 2 * M_PI / 4000;
  const MatrixXd sig = Sampled(dt, 3 * 4000 + 1, [](double t) {
    return (VectorXd(2) << std::cos(t), std::sin(t)).finished();
  });
  const GramianReport r = PeGramian(sig, dt, 2 * M_PI);
  EXPECT_NEAR(r.alpha1, M_PI, 1e-4);
  EXPECT_NEAR(r.alpha2, M_PI, 1e-4);
  EXPECT_TRUE(r.pe_satisfied);
  EXPECT_LE(r.alpha1, r.alpha2);
  EXPECT_GT(r.windows_checked, 4000);
}

TEST(PeGramian, DegenerateSignalsFail) {
  const MatrixXd zero = MatrixXd::Zero(500, 2);
  const GramianReport z = PeGramian(zero, 0.01, 1.0);
  EXPECT_EQ(z.alpha1, 0.0);
  EXPECT_FALSE(z.pe_satisfied);

  MatrixXd constant = MatrixXd::Zero(500, 2);
  constant.col(0).setOnes();
  const GramianReport c = PeGramian(constant, 0.01, 1.0);
  EXPECT_LT(c.alpha1, 1e-12);
  EXPECT_NEAR(c.alpha2, 1.0, 1e-9);
  EXPECT_FALSE(c.pe_satisfied);

  EXPECT_THROW(PeGramian(constant, 0.01, 3.0), WindowTooLong);
}

TEST(PeGramian, ConfiguredNoiseIsExciting) {
  const ModelSetup setup = MakeSetup();
  SignalRecorder rec;
  const ExperimentResult run = RunExperiment(test::SmallExperiment(1, 60), setup, rec.Observer());
  ASSERT_FALSE(run.diverged);
  const GramianReport r = PeGramian(SignalRecorder::Stack(rec.noise), 0.01, 1.0);
  EXPECT_TRUE(r.pe_satisfied);
  EXPECT_GT(r.alpha1, 0);
}

TEST(Perturbation, ScalesFromParams) {
  const ModelParams p;
  const PerturbationScales e = PerturbationScales::From(p);
  EXPECT_DOUBLE_EQ(e.eps_u, p.k_p / p.eta);
  EXPECT_DOUBLE_EQ(e.eps_delta, p.k_p / p.a);
  EXPECT_DOUBLE_EQ(e.eps_w, p.k_p / p.gamma);
}

TEST(Perturbation, RewriteIsAnIdentity) {
  const ModelSetup setup = MakeSetup();
  RandomStream rng(6);
  for (int i = 0; i < 100; ++i) {
    const State s = test::RandomState(2, 19, 4, rng);
    EXPECT_LE(PerturbationIdentityError(s, rng.Normal(2), setup.mapping, setup.params), 1e-12);
  }
}

TEST(Perturbation, FunctionsMatchDefinitions) {
  RandomStream rng(7);
  const MatrixXd c = test::RandomMatrix(2, 5, rng);
  const VectorXd u = rng.Normal(5), e = rng.Normal(2), dq = rng.Normal(5);
  const MatrixXd lhs = c.transpose() * c + 0.3 * MatrixXd::Identity(5, 5);
  EXPECT_LT((F1<double>(c, u, e, 0.3) + lhs * u - c.transpose() * e).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_EQ(F2<double>(c, u), VectorXd(-c * u));
  EXPECT_EQ(F3<double>(dq, u, 2.0), VectorXd(-dq + u / 2.0));
  const MatrixXd phi = test::OrthonormalRows(3, 5, rng);
  const MatrixXd wt = test::RandomMatrix(2, 3, rng);
  EXPECT_EQ(G<double>(wt, phi, VectorXd::Zero(5)), MatrixXd::Zero(2, 3));
}

class ReducedTest : public ::testing::Test {
 protected:
  ModelSetup setup_ = MakeSetup();
};

TEST_F(ReducedTest, Alpha1MatchesIndependentEigenvalue) {
  for (Eigen::Index r = 0; r < 2; ++r) {
    const MatrixXd c = setup_.mapping.c.row(r);
    const ReducedSystem sys = ReducedSystem::FromParams(c, setup_.params);
    const MatrixXd m = c.transpose() * c + setup_.params.mu * MatrixXd::Identity(19, 19);
    const double want = Eigen::SelfAdjointEigenSolver<MatrixXd>(m).eigenvalues().minCoeff();
    EXPECT_NEAR(sys.Alpha1(), want, 1e-10);
    EXPECT_DOUBLE_EQ(sys.eps_u, setup_.params.k_p / setup_.params.eta);
  }
}

TEST_F(ReducedTest, OriginIsStationary) {
  const ReducedSystem sys = ReducedSystem::FromParams(setup_.mapping.c.row(0), setup_.params);
  const ReducedTrajectory tr = SimulateReduced(sys, VectorXd::Zero(19), VectorXd::Zero(1), 2.0);
  for (const ReducedSample& s : tr) {
    EXPECT_EQ(s.u, VectorXd::Zero(19));
    EXPECT_EQ(s.ebar, VectorXd::Zero(1));
  }
  const LyapunovReport lr = LyapunovCheck(tr, sys);
  EXPECT_TRUE(lr.passed);
  for (std::size_t k = 0; k < lr.v.size(); ++k) EXPECT_EQ(lr.v[k], 0.0);
  for (double d : lr.v_dot) EXPECT_EQ(d, 0.0);
}

TEST_F(ReducedTest, RandomInitsConvergeWithDecreasingV) {
  RandomStream rng(9);
  std::uniform_real_distribution<double> unit(0, 1);
  for (int i = 0; i < 10; ++i) {
    const MatrixXd c = setup_.mapping.c.row(i % 2);
    const ReducedSystem sys = ReducedSystem::FromParams(c, setup_.params);
    VectorXd z = rng.Normal(20);
    z *= std::pow(unit(rng.engine()), 1.0 / 20) / z.norm();
    const ReducedTrajectory tr = SimulateReduced(sys, z.head(19), z.tail(1), 20.0);
    const ReducedSample& end = tr.back();
    EXPECT_LT(std::sqrt(end.u.squaredNorm() + end.ebar.squaredNorm()), 1e-4);
    const LyapunovReport lr = LyapunovCheck(tr, sys);
    EXPECT_TRUE(lr.passed) << lr.max_violation;
    EXPECT_LE(lr.max_increase, 1e-9);

    // Closed form along the flow: dV/dt = -u^T (C^T C + mu I) u.
    const MatrixXd m = c.transpose() * c + sys.mu * MatrixXd::Identity(19, 19);
    double worst_bound = -1, worst_fd = 0;
    for (std::size_t k = 1; k + 1 < tr.size(); ++k) {
      const double exact = -tr[k].u.dot(m * tr[k].u);
      worst_bound = std::max(worst_bound, exact + sys.Alpha1() * tr[k].u.squaredNorm());
      worst_fd = std::max(worst_fd, std::abs(lr.v_dot[k - 1] - exact));  // v_dot starts at sample 1
    }
    EXPECT_LE(worst_bound, 1e-9);
    EXPECT_LT(worst_fd, 1e-4);  // h^2/6 * max|V'''| at h = 1e-3
  }
}

TEST_F(ReducedTest, TimeReversalIsCaught) {
  const ReducedSystem sys = ReducedSystem::FromParams(setup_.mapping.c.row(0), setup_.params);
  const ReducedTrajectory tr =
      SimulateReduced(sys, VectorXd::Constant(19, 0.1), VectorXd::Ones(1), 5.0, 1e-3, 10);
  EXPECT_TRUE(LyapunovCheck(tr, sys).passed);
  const LyapunovReport rev = LyapunovCheck(TimeReversed(tr), sys);
  EXPECT_FALSE(rev.passed);
  EXPECT_GT(rev.max_violation, rev.tolerance);
}

class BoundaryTest : public ::testing::Test {
 protected:
  void SetUp() override {
    sys_.phi = setup_.mapping.basis.phi;
    sys_.u_frozen = 0.01 * sys_.phi.row(0).transpose();
    sys_.a = setup_.params.a;
    sys_.gamma = setup_.params.gamma;
  }
  ModelSetup setup_ = MakeSetup();
  BoundarySystem sys_;
};

TEST_F(BoundaryTest, EquilibriumIsStationary) {
  const VectorXd dq = sys_.u_frozen / sys_.a;
  const BoundaryTrajectory tr = SimulateBoundaryLayer(sys_, MatrixXd::Zero(2, 4), dq, 50);
  for (const BoundarySample& s : tr) {
    EXPECT_LT(s.w_tilde.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((s.delta_q - dq).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST_F(BoundaryTest, NoExcitationNoLearning) {
  sys_.u_frozen.setZero();
  const MatrixXd w0 = MatrixXd::Constant(2, 4, 0.3);
  const BoundaryTrajectory tr = SimulateBoundaryLayer(sys_, w0, VectorXd::Zero(19), 50);
  for (const BoundarySample& s : tr) EXPECT_EQ(s.w_tilde, w0);
}

TEST_F(BoundaryTest, ExcitedErrorDecaysExponentially) {
  sys_.excitation = MultiSineExcitation(sys_.phi, 0.02, 0.1);
  const MatrixXd w0 = MatrixXd::Constant(2, 4, 0.3);
  const BoundaryTrajectory tr =
      SimulateBoundaryLayer(sys_, w0, sys_.u_frozen / sys_.a, 400, 1e-2, 10);
  const DecayFit fit = FitLogDecay(tr);
  EXPECT_LT(fit.slope, 0);
  EXPECT_GT(fit.r_squared, 0.95);
  EXPECT_LT(tr.back().w_tilde.norm(), 0.1 * w0.norm());
}

TEST_F(BoundaryTest, LyapunovFunctionDecreases) {
  const MatrixXd w0 = MatrixXd::Constant(2, 4, 0.3);
  const BoundaryTrajectory tr = SimulateBoundaryLayer(sys_, w0, VectorXd::Zero(19), 200, 1e-2, 10);
  const LyapunovReport lr = LyapunovCheck(tr, sys_);
  EXPECT_TRUE(lr.passed) << lr.max_violation;
  EXPECT_FALSE(LyapunovCheck(TimeReversed(tr), sys_).passed);
}

TEST(FitLogDecay, ExactExponential) {
  BoundaryTrajectory tr;
  for (int k = 0; k <= 100; ++k) {
    BoundarySample s;
    s.t = k * 0.5;
    s.w_tilde = MatrixXd::Constant(1, 1, 2.0 * std::exp(-0.03 * s.t));
    tr.push_back(s);
  }
  const DecayFit fit = FitLogDecay(tr);
  EXPECT_NEAR(fit.slope, -0.03, 1e-12);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
}

TEST(NormalizedTrendSlope, Lines) {
  EXPECT_NEAR(NormalizedTrendSlope({2, 2, 2, 2}), 0.0, 1e-15);
  EXPECT_NEAR(NormalizedTrendSlope({1, 2, 3}), 1.0, 1e-12);
  EXPECT_NEAR(NormalizedTrendSlope({4, 3, 2}), -0.25, 1e-12);
}

class TheoremTest : public ::testing::Test {
 protected:
  ModelSetup setup_ = MakeSetup();
};

TEST_F(TheoremTest, ZeroNoiseConverges) {
  const RunNorm r = SteadyStateNorm(setup_.mapping, setup_.params, 0.0, 11, ScanOptions{});
  EXPECT_FALSE(r.diverged);
  EXPECT_LT(r.tail_norm, 1e-4);
}

TEST_F(TheoremTest, NormGrowsWithNoise) {
  ScanOptions opt;
  opt.seeds = 3;
  const ScanReport rep = NeighborhoodScan(setup_.mapping, setup_.params, {2e-3, 4e-3, 8e-3}, opt);
  ASSERT_EQ(rep.rows.size(), 3u);
  ASSERT_EQ(rep.ratios.size(), 2u);
  for (double r : rep.ratios) {
    EXPECT_GE(r, 1.0);
    EXPECT_LE(r, 4.0);
  }
  EXPECT_TRUE(rep.ratios_ok);
  EXPECT_THROW(NeighborhoodScan(setup_.mapping, setup_.params, {2e-3, 1e-3}, opt), InvalidConfig);
}

}  // namespace
}  // namespace bomi
