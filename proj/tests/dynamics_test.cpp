#include <cmath>

#include <gtest/gtest.h>

#include "bomi/dynamics.hpp"
#include "bomi/errors.hpp"
#include "bomi/protocol.hpp"
#include "support.hpp"

namespace bomi {
namespace {

using test::RandomMatrix;

// Objective of the forward law: 1/2 |delta_x - W_hat Phi delta_q|^2.
double ForwardObjective(const MatrixXd& w_hat, const MatrixXd& phi,
                        const VectorXd& dq, const VectorXd& dx) {
  return 0.5 * (dx - w_hat * phi * dq).squaredNorm();
}

// Objective of the inverse law: 1/2 |C_hat u - k_p e|^2 + mu/2 |u|^2.
double InverseObjective(const MatrixXd& c_hat, const VectorXd& u, const VectorXd& e,
                        double mu, double k_p) {
  return 0.5 * (c_hat * u - k_p * e).squaredNorm() + 0.5 * mu * u.squaredNorm();
}

double RelativeError(const MatrixXd& got, const MatrixXd& want) {
  return (got - want).cwiseAbs().maxCoeff() / std::max(1.0, want.cwiseAbs().maxCoeff());
}

TEST(CursorRhs, IdentityZeroAndHomogeneity) {
  const MatrixXd eye = MatrixXd::Identity(2, 2);
  const VectorXd u = (VectorXd(2) << 3, -2).finished();
  EXPECT_EQ(CursorRhs(eye, u), u);
  EXPECT_EQ(CursorRhs(eye, VectorXd::Zero(2)), VectorXd::Zero(2));

  RandomStream rng(4);
  const MatrixXd c = RandomMatrix(2, 19, rng);
  const VectorXd v = rng.Normal(19);
  EXPECT_LT((CursorRhs(c, VectorXd(3.7 * v)) - 3.7 * CursorRhs(c, v)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(CursorRhs(c, VectorXd::Zero(3)), DimensionMismatch);
}

TEST(FilterRhs, MatchesDefinition) {
  RandomStream rng(2);
  const State s = test::RandomState(2, 5, 3, rng);
  const double a = 7.5;
  const FilterRates<double> f = FilterRhs(s, a);
  EXPECT_EQ(f.delta_x, VectorXd(-a * s.chi + s.x));
  EXPECT_EQ(f.chi_dot, f.delta_x);
  EXPECT_EQ(f.delta_q_dot, VectorXd(-a * s.delta_q + s.u));
  EXPECT_EQ(s.DeltaX(a), f.delta_x);
}

// RK4 on the filter equations alone, against closed forms.
TEST(FilterRhs, RelaxesToClosedForm) {
  const double a = 50, h = 1e-4;
  State s = State::Zero(2, 3, 1);
  s.u = (VectorXd(3) << 1, -2, 0.5).finished();
  s.x = (VectorXd(2) << 1.5, -0.5).finished();  // step held from t = 0
  auto deriv = [&](const State& st) { return FilterRhs(st, a); };
  double t = 0;
  double worst = 0;
  for (int k = 0; k < 2000; ++k) {
    auto stage = [&](const State& base, const FilterRates<double>& r, double dt) {
      State out = base;
      out.chi += dt * r.chi_dot;
      out.delta_q += dt * r.delta_q_dot;
      return out;
    };
    const auto k1 = deriv(s);
    const auto k2 = deriv(stage(s, k1, h / 2));
    const auto k3 = deriv(stage(s, k2, h / 2));
    const auto k4 = deriv(stage(s, k3, h));
    s.chi += h / 6 * (k1.chi_dot + 2 * k2.chi_dot + 2 * k3.chi_dot + k4.chi_dot);
    s.delta_q += h / 6 * (k1.delta_q_dot + 2 * k2.delta_q_dot + 2 * k3.delta_q_dot + k4.delta_q_dot);
    t += h;
    // delta_x(t) = x_bar e^{-at};  delta_q(t) = (u/a)(1 - e^{-at}).
    worst = std::max(worst, (s.DeltaX(a) - s.x * std::exp(-a * t)).cwiseAbs().maxCoeff());
    worst = std::max(worst, (s.delta_q - s.u / a * (1 - std::exp(-a * t))).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-10);
  EXPECT_LT((s.delta_q - s.u / a).cwiseAbs().maxCoeff(), 1e-4 * s.u.cwiseAbs().maxCoeff());
  EXPECT_LT(s.DeltaX(a).norm(), 1e-4);
}

TEST(FilterRhs, ChiDecaysWithZeroInput) {
  const double a = 3, h = 1e-3;
  State s = State::Zero(2, 1, 1);
  s.chi = (VectorXd(2) << 2, -1).finished();
  const VectorXd chi0 = s.chi;
  for (int k = 0; k < 1000; ++k) {
    const auto k1 = FilterRhs(s, a).chi_dot;
    State mid = s;
    mid.chi += h / 2 * k1;
    const auto k2 = FilterRhs(mid, a).chi_dot;
    mid.chi = s.chi + h / 2 * k2;
    const auto k3 = FilterRhs(mid, a).chi_dot;
    mid.chi = s.chi + h * k3;
    const auto k4 = FilterRhs(mid, a).chi_dot;
    s.chi += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  EXPECT_LT((s.chi - chi0 * std::exp(-a * 1.0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ForwardRhs, PerfectEstimateDoesNotMove) {
  RandomStream rng(8);
  const MatrixXd phi = test::OrthonormalRows(4, 19, rng);
  const MatrixXd w = RandomMatrix(2, 4, rng);
  const VectorXd dq = rng.Normal(19);
  const VectorXd dx = w * phi * dq;  // delta_x = C delta_q
  EXPECT_LT(ForwardRhs(w, phi, dq, dx, 0.262).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(ForwardRhs(w, phi, VectorXd::Zero(19), VectorXd::Zero(2), 0.262),
            MatrixXd::Zero(2, 4));
}

TEST(ForwardRhs, UnitVectorOuterProduct) {
  const MatrixXd phi = MatrixXd::Identity(3, 3);
  const MatrixXd w_hat = MatrixXd::Zero(2, 3);
  const VectorXd dq = VectorXd::Unit(3, 0);
  const VectorXd dx = (VectorXd(2) << 1, -1).finished();  // eps = dx when W_hat = 0
  MatrixXd want = MatrixXd::Zero(2, 3);
  want(0, 0) = 2;
  want(1, 0) = -2;
  EXPECT_EQ(ForwardRhs(w_hat, phi, dq, dx, 2.0), want);
}

TEST(ForwardRhs, MatchesFiniteDifferenceGradient) {
  RandomStream rng(11);
  const double gamma = 0.7, step = 1e-6;
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const MatrixXd phi = test::OrthonormalRows(4, 19, rng);
    const MatrixXd w_hat = RandomMatrix(2, 4, rng);
    const VectorXd dq = rng.Normal(19), dx = rng.Normal(2);
    MatrixXd fd(2, 4);
    for (Eigen::Index i = 0; i < 2; ++i) {
      for (Eigen::Index j = 0; j < 4; ++j) {
        MatrixXd plus = w_hat, minus = w_hat;
        plus(i, j) += step;
        minus(i, j) -= step;
        fd(i, j) = (ForwardObjective(plus, phi, dq, dx) - ForwardObjective(minus, phi, dq, dx)) /
                   (2 * step);
      }
    }
    worst = std::max(worst, RelativeError(ForwardRhs(w_hat, phi, dq, dx, gamma), -gamma * fd));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(InverseRhs, ScalarExample) {
  const MatrixXd one = MatrixXd::Ones(1, 1);
  const VectorXd u = VectorXd::Zero(1), e = VectorXd::Ones(1);
  EXPECT_DOUBLE_EQ(InverseRhs(one, one, u, e, 1.0, 0.3, 1.0)(0), 1.0);
}

TEST(InverseRhs, FixedPointIsIndependentLinearSolve) {
  const MatrixXd eye = MatrixXd::Identity(2, 2);
  const VectorXd e = VectorXd::Unit(2, 0);
  const VectorXd u_star = InverseFixedPoint(eye, 0.3, 1.0, e);
  EXPECT_NEAR(u_star(0), 1 / 1.3, 1e-15);
  EXPECT_NEAR(u_star(1), 0.0, 1e-15);
  EXPECT_LT(InverseRhs(eye, eye, u_star, e, 1.0, 0.3, 1.0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(InverseRhs, MatchesFiniteDifferenceGradient) {
  RandomStream rng(12);
  const double eta = 0.9, mu = 0.3, k_p = 0.4, step = 1e-6;
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const MatrixXd phi = test::OrthonormalRows(4, 19, rng);
    const MatrixXd w_hat = RandomMatrix(2, 4, rng);
    const MatrixXd c_hat = w_hat * phi;
    const VectorXd u = rng.Normal(19), e = rng.Normal(2);
    VectorXd fd(19);
    for (Eigen::Index i = 0; i < 19; ++i) {
      VectorXd plus = u, minus = u;
      plus(i) += step;
      minus(i) -= step;
      fd(i) = (InverseObjective(c_hat, plus, e, mu, k_p) - InverseObjective(c_hat, minus, e, mu, k_p)) /
              (2 * step);
    }
    worst = std::max(worst, RelativeError(InverseRhs(w_hat, phi, u, e, eta, mu, k_p), -eta * fd));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(InverseRhs, FixedPointIsHomogeneousInError) {
  RandomStream rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd c_hat = RandomMatrix(2, 19, rng);
    const VectorXd e = rng.Normal(2);
    const double alpha = 0.5 + trial;
    const VectorXd a = InverseFixedPoint(c_hat, 0.3, 5e-3, VectorXd(alpha * e));
    const VectorXd b = alpha * InverseFixedPoint(c_hat, 0.3, 5e-3, e);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-13 * std::max(1.0, b.cwiseAbs().maxCoeff()));
  }
}

TEST(FeedbackOracle, OrthonormalRowsAndDefiningProperty) {
  MatrixXd c = MatrixXd::Zero(2, 19);
  c(0, 0) = c(1, 1) = 1;
  VectorXd want = VectorXd::Zero(19);
  want(0) = want(1) = 1;
  EXPECT_LT((FeedbackOracle(c, 1.0, VectorXd::Ones(2)) - want).cwiseAbs().maxCoeff(), 1e-15);

  RandomStream rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd r = RandomMatrix(2, 19, rng);
    const VectorXd e = rng.Normal(2);
    EXPECT_LT((r * FeedbackOracle(r, 0.7, e) - 0.7 * e).cwiseAbs().maxCoeff(), 1e-10);
  }
  EXPECT_THROW(FeedbackOracle(MatrixXd::Zero(2, 19), 1.0, VectorXd::Ones(2)), RankDeficient);
}

TEST(FeedbackOracle, RegularizedFixedPointApproachesIt) {
  RandomStream rng(15);
  const MatrixXd c = RandomMatrix(2, 19, rng);
  const VectorXd e = rng.Normal(2);
  const VectorXd oracle = FeedbackOracle(c, 1.0, e);
  double previous = std::numeric_limits<double>::infinity();
  for (double mu : {0.1, 0.01, 0.001}) {
    const double gap = (InverseFixedPoint(c, mu, 1.0, e) - oracle).norm();
    EXPECT_LT(gap, previous);
    previous = gap;
  }
  EXPECT_LT(previous, 1e-2 * oracle.norm());
}

class StepTest : public ::testing::Test {
 protected:
  void SetUp() override {
    setup_ = MakeSetup();
    in_.mapping = &setup_.mapping;
    in_.params = &setup_.params;
    in_.x_des = (VectorXd(2) << 4.5, 4.5).finished();
  }
  State Start() const {
    State s = State::Zero(2, 19, 4);
    s.x = (VectorXd(2) << 2.5, 2.5).finished();
    s.chi = s.x / setup_.params.PerSecond(setup_.params.a);
    return s;
  }
  ModelSetup setup_;
  StepInputs in_;
};

TEST_F(StepTest, EquilibriumIsStationary) {
  State s = Start();
  s.x = in_.x_des;
  s.chi = s.x / setup_.params.PerSecond(setup_.params.a);
  s.w_hat = setup_.mapping.w;
  RandomStream rng(1);
  State t = s;
  for (int k = 0; k < 200; ++k) t = Step(t, in_, 0.01, rng);
  EXPECT_LT((t.u - s.u).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((t.x - s.x).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((t.chi - s.chi).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((t.delta_q - s.delta_q).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((t.w_hat - s.w_hat).cwiseAbs().maxCoeff(), 1e-12);
}

TEST_F(StepTest, FirstOrderConvergence) {
  // Zero noise, 1 s of simulated time, against an RK4 reference.
  State init = Start();
  init.w_hat = 0.5 * setup_.mapping.w;
  auto run = [&](double dt) {
    RandomStream rng(1);
    State s = init;
    const int n = static_cast<int>(std::lround(1.0 / dt));
    for (int k = 0; k < n; ++k) s = Step(s, in_, dt, rng);
    return s;
  };
  State ref = init;
  for (int k = 0; k < 20000; ++k) ref = StepRk4(ref, in_, 5e-5);
  auto error = [&](const State& s) {
    return std::max({(s.u - ref.u).norm(), (s.x - ref.x).norm(), (s.w_hat - ref.w_hat).norm(),
                     (s.delta_q - ref.delta_q).norm()});
  };
  const double e1 = error(run(0.01)), e2 = error(run(0.005)), e3 = error(run(0.0025));
  EXPECT_LT(e2, e1);
  EXPECT_LT(e3, e2);
  EXPECT_NEAR(e1 / e2, 2.0, 0.4);
  EXPECT_NEAR(e2 / e3, 2.0, 0.4);
}

TEST_F(StepTest, DeterministicAndNoiseOnlyInU) {
  in_.noise_variance = 0.01;
  RandomStream a(9), b(9);
  State s1 = Start(), s2 = Start();
  for (int k = 0; k < 100; ++k) {
    s1 = Step(s1, in_, 0.01, a);
    s2 = Step(s2, in_, 0.01, b);
  }
  EXPECT_EQ(s1.u, s2.u);
  EXPECT_EQ(s1.w_hat, s2.w_hat);

  StepInputs quiet = in_;
  quiet.noise_variance = 0;
  RandomStream r1(3), r2(3);
  VectorXd xi;
  const State noisy = Step(s1, in_, 0.01, r1, &xi);
  const State clean = Step(s1, quiet, 0.01, r2);
  EXPECT_EQ(noisy.x, clean.x);
  EXPECT_EQ(noisy.q, clean.q);
  EXPECT_EQ(noisy.chi, clean.chi);
  EXPECT_EQ(noisy.delta_q, clean.delta_q);
  EXPECT_EQ(noisy.w_hat, clean.w_hat);
  EXPECT_LT((noisy.u - clean.u - 0.01 * xi).cwiseAbs().maxCoeff(), 1e-15);
}

TEST_F(StepTest, QIntegratesU) {
  State s = Start();
  s.u = VectorXd::LinSpaced(19, -1, 1);
  RandomStream rng(1);
  const State t = Step(s, in_, 0.01, rng);
  EXPECT_EQ(t.q, VectorXd(s.q + 0.01 * s.u));
}

TEST_F(StepTest, DivergenceGuard) {
  in_.divergence_bound = 3.0;
  State s = Start();
  RandomStream rng(1);
  EXPECT_NO_THROW(Step(s, in_, 0.01, rng));
  s.x(0) = 3.5;
  EXPECT_THROW(Step(s, in_, 0.01, rng), Diverged);
  s.x(0) = std::nan("");
  in_.divergence_bound = 1e6;
  EXPECT_THROW(Step(s, in_, 0.01, rng), Diverged);
}

TEST(ModelParams, ValidationAndWarnings) {
  ModelParams p;
  EXPECT_NO_THROW(p.Validate());
  EXPECT_TRUE(p.TimescaleWarnings().empty());
  p.mu = 0;
  EXPECT_THROW(p.Validate(), InvalidConfig);
  p.mu = 0.3;
  p.gamma = -1;
  EXPECT_THROW(p.Validate(), InvalidConfig);
  p.gamma = 0.01;  // eta > gamma
  const auto warnings = p.TimescaleWarnings();
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("eta < gamma"), std::string::npos);
}

TEST(NoiseSchedule, VarianceFormula) {
  const NoiseSchedule n = NoiseSchedule::Geometric(0.012, 0.6, 8);
  ASSERT_EQ(n.s_session.size(), 8u);
  EXPECT_DOUBLE_EQ(n.s_session[2], 0.012 * 0.6 * 0.6);
  for (double t : {0.0, 1.0, 37.5}) {
    EXPECT_DOUBLE_EQ(n.Variance(1, t), n.s_session[1] * (0.01 + std::exp(-0.1 * t)));
    EXPECT_GT(n.Variance(7, t), 0);
  }
  NoiseSchedule bad = n;
  bad.s_session[3] = 1.0;
  EXPECT_THROW(bad.Validate(), InvalidConfig);
}

TEST(RhsPurity, SameInputsSameOutputs) {
  const ModelSetup setup = MakeSetup();
  StepInputs in;
  in.mapping = &setup.mapping;
  in.params = &setup.params;
  in.x_des = VectorXd::Ones(2);
  RandomStream rng(21);
  const State s = test::RandomState(2, 19, 4, rng);
  const State a = ModelRhs(s, in), b = ModelRhs(s, in);
  EXPECT_EQ(a.u, b.u);
  EXPECT_EQ(a.w_hat, b.w_hat);
  EXPECT_EQ(a.chi, b.chi);
}

}  // namespace
}  // namespace bomi
