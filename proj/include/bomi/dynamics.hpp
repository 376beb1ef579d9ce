#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bomi/errors.hpp"
#include "bomi/synergy.hpp"
#include "bomi/types.hpp"

namespace bomi {

/// Exploration-noise variance schedule:
///   sigma^2(session, t) = s_session[session] * (floor + exp(-decay_rate * t))
/// with t the elapsed simulated time within the session, in seconds.
/// sigma^2 is the diffusion intensity of the white noise added to du/dt.
struct NoiseSchedule {
  std::vector<double> s_session;
  double decay_rate = 0.1;
  double floor = 0.01;
  std::uint64_t seed = 0;

  /// s_session[k] = first * ratio^k.
  static NoiseSchedule Geometric(double first, double ratio, int sessions);

  double Variance(int session, double t_session) const;
  void Validate() const;
};

/// Learning-model constants. gamma, eta, k_p and a are rates per model time
/// unit; `time_unit` is that unit in seconds, so the simulator runs with
/// rate / time_unit in 1/s.
struct ModelParams {
  double gamma = 0.262;
  double eta = 0.04522;
  double mu = 0.3;
  double k_p = 5e-3;
  double a = 0.05;
  double time_unit = 1e-3;
  NoiseSchedule noise = NoiseSchedule::Geometric(0.012, 0.6, 8);

  double PerSecond(double rate) const { return rate / time_unit; }

  /// gamma and eta may be zero (frozen learners); mu, k_p, a, time_unit must
  /// be strictly positive.
  void Validate() const;

  /// Non-fatal notes when k_p << eta << gamma or a >> k_p is violated.
  std::vector<std::string> TimescaleWarnings() const;
};

template <typename Scalar>
struct LearnerState {
  VectorX<Scalar> u;
  VectorX<Scalar> q;
  VectorX<Scalar> x;
  VectorX<Scalar> chi;
  VectorX<Scalar> delta_q;
  MatrixX<Scalar> w_hat;

  static LearnerState Zero(Eigen::Index n, Eigen::Index m, Eigen::Index h) {
    LearnerState s;
    s.u = VectorX<Scalar>::Zero(m);
    s.q = VectorX<Scalar>::Zero(m);
    s.x = VectorX<Scalar>::Zero(n);
    s.chi = VectorX<Scalar>::Zero(n);
    s.delta_q = VectorX<Scalar>::Zero(m);
    s.w_hat = MatrixX<Scalar>::Zero(n, h);
    return s;
  }

  /// delta_x = -a * chi + x; derived, never stored.
  VectorX<Scalar> DeltaX(Scalar a) const { return -a * chi + x; }

  Scalar MaxAbs() const {
    using std::max;
    Scalar v = u.cwiseAbs().maxCoeff();
    v = max(v, q.cwiseAbs().maxCoeff());
    v = max(v, x.cwiseAbs().maxCoeff());
    v = max(v, chi.cwiseAbs().maxCoeff());
    v = max(v, delta_q.cwiseAbs().maxCoeff());
    v = max(v, w_hat.cwiseAbs().maxCoeff());
    return v;
  }

  bool AllFinite() const {
    return u.allFinite() && q.allFinite() && x.allFinite() &&
           chi.allFinite() && delta_q.allFinite() && w_hat.allFinite();
  }
};

using State = LearnerState<double>;

namespace internal {
inline void RequireSize(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw DimensionMismatch(std::string(what) + ": expected " +
                            std::to_string(want) + ", got " +
                            std::to_string(got));
  }
}
}  // namespace internal

/// Cursor velocity x_dot = C u.
template <typename DerivedC, typename DerivedU>
VectorX<typename DerivedU::Scalar> CursorRhs(
    const Eigen::MatrixBase<DerivedC>& c, const Eigen::MatrixBase<DerivedU>& u) {
  internal::RequireSize(u.size(), c.cols(), "CursorRhs u");
  return c.template cast<typename DerivedU::Scalar>() * u;
}

template <typename Scalar>
struct FilterRates {
  VectorX<Scalar> chi_dot;
  VectorX<Scalar> delta_q_dot;
  VectorX<Scalar> delta_x;
};

/// Filtered increments:
///   chi_dot = -a chi + x,  delta_x = -a chi + x,  delta_q_dot = -a delta_q + u.
template <typename Scalar>
FilterRates<Scalar> FilterRhs(const LearnerState<Scalar>& s, Scalar a) {
  FilterRates<Scalar> r;
  r.delta_x = -a * s.chi + s.x;
  r.chi_dot = r.delta_x;
  r.delta_q_dot = -a * s.delta_q + s.u;
  return r;
}

/// Prediction error eps = delta_x - W_hat Phi delta_q.
template <typename DerivedW, typename DerivedP, typename DerivedQ,
          typename DerivedX>
VectorX<typename DerivedW::Scalar> PredictionError(
    const Eigen::MatrixBase<DerivedW>& w_hat,
    const Eigen::MatrixBase<DerivedP>& phi,
    const Eigen::MatrixBase<DerivedQ>& delta_q,
    const Eigen::MatrixBase<DerivedX>& delta_x) {
  using Scalar = typename DerivedW::Scalar;
  internal::RequireSize(w_hat.cols(), phi.rows(), "W_hat columns vs Phi rows");
  internal::RequireSize(delta_q.size(), phi.cols(), "delta_q");
  internal::RequireSize(delta_x.size(), w_hat.rows(), "delta_x");
  return delta_x.template cast<Scalar>() -
         w_hat * (phi.template cast<Scalar>() * delta_q.template cast<Scalar>());
}

/// Forward learning law  dW_hat/dt = gamma * eps * (Phi delta_q)^T.
template <typename DerivedW, typename DerivedP, typename DerivedQ,
          typename DerivedX>
MatrixX<typename DerivedW::Scalar> ForwardRhs(
    const Eigen::MatrixBase<DerivedW>& w_hat,
    const Eigen::MatrixBase<DerivedP>& phi,
    const Eigen::MatrixBase<DerivedQ>& delta_q,
    const Eigen::MatrixBase<DerivedX>& delta_x,
    typename DerivedW::Scalar gamma) {
  using Scalar = typename DerivedW::Scalar;
  const VectorX<Scalar> eps = PredictionError(w_hat, phi, delta_q, delta_x);
  const VectorX<Scalar> z =
      phi.template cast<Scalar>() * delta_q.template cast<Scalar>();
  return gamma * eps * z.transpose();
}

template <typename Scalar>
MatrixX<Scalar> ForwardRhs(const LearnerState<Scalar>& s,
                           const SynergyBasis& basis, Scalar gamma, Scalar a) {
  return ForwardRhs(s.w_hat, basis.phi, s.delta_q, s.DeltaX(a), gamma);
}

/// Regularized gradient-flow inverse model:
///   du/dt = -eta ((C_hat^T C_hat + mu I) u - k_p C_hat^T e_x),  C_hat = W_hat Phi.
template <typename DerivedW, typename DerivedP, typename DerivedU,
          typename DerivedE>
VectorX<typename DerivedU::Scalar> InverseRhs(
    const Eigen::MatrixBase<DerivedW>& w_hat,
    const Eigen::MatrixBase<DerivedP>& phi,
    const Eigen::MatrixBase<DerivedU>& u,
    const Eigen::MatrixBase<DerivedE>& e_x, typename DerivedU::Scalar eta,
    typename DerivedU::Scalar mu, typename DerivedU::Scalar k_p) {
  using Scalar = typename DerivedU::Scalar;
  internal::RequireSize(w_hat.cols(), phi.rows(), "W_hat columns vs Phi rows");
  internal::RequireSize(u.size(), phi.cols(), "u");
  internal::RequireSize(e_x.size(), w_hat.rows(), "e_x");
  const MatrixX<Scalar> c_hat =
      w_hat.template cast<Scalar>() * phi.template cast<Scalar>();
  const VectorX<Scalar> residual = c_hat * u - k_p * e_x.template cast<Scalar>();
  return -eta * (c_hat.transpose() * residual + mu * u);
}

template <typename Scalar>
VectorX<Scalar> InverseRhs(const LearnerState<Scalar>& s,
                           const SynergyBasis& basis, const ModelParams& p,
                           const VectorX<Scalar>& e_x) {
  return InverseRhs(s.w_hat, basis.phi, s.u, e_x, Scalar(p.eta), Scalar(p.mu),
                    Scalar(p.k_p));
}

/// Unique zero of InverseRhs for fixed C_hat: (C_hat^T C_hat + mu I)^-1 k_p C_hat^T e_x.
VectorXd InverseFixedPoint(const MatrixXd& c_hat, double mu, double k_p,
                           const VectorXd& e_x);

/// Minimum-norm joint velocity reaching cursor velocity k_p e_x: k_p C^+ e_x.
/// Comparison oracle only; the learner never calls it.
VectorXd FeedbackOracle(const MatrixXd& c, double k_p, const VectorXd& e_x);

struct StepInputs {
  const MappingMatrix* mapping = nullptr;
  const ModelParams* params = nullptr;
  VectorXd x_des;
  /// Noise diffusion intensity for this step (see NoiseSchedule).
  double noise_variance = 0.0;
  double divergence_bound = 1e6;
};

/// Deterministic right-hand side of the full model with every rate in 1/s.
State ModelRhs(const State& s, const StepInputs& in);

/// One Euler-Maruyama step of size dt seconds. The noise increment
/// sqrt(sigma^2 dt) N(0, I) enters the u equation only; `noise_out`, when
/// given, receives the sampled white-noise value xi = increment / dt.
/// Throws Diverged when any state magnitude exceeds the configured bound.
State Step(const State& s, const StepInputs& in, double dt, RandomStream& rng,
           VectorXd* noise_out = nullptr);

/// Classical RK4 step of the noise-free model.
State StepRk4(const State& s, const StepInputs& in, double dt);

}  // namespace bomi
