#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bomi/dynamics.hpp"
#include "bomi/protocol.hpp"

namespace bomi {

// ---------------------------------------------------------------------------
// Persistent excitation

struct GramianReport {
  double window_length = 0;  // seconds
  double alpha1 = 0;         // min over windows of lambda_min
  double alpha2 = 0;         // max over windows of lambda_max
  double threshold = 0;
  Eigen::Index windows_checked = 0;
  bool pe_satisfied = false;
};

/// Windowed Gramian  int_t0^{t0+T} w w^T dt  (trapezoid rule) at every
/// window start on the sample grid. `signal` holds one sample per row at
/// spacing dt. Throws WindowTooLong when the signal is shorter than 2T.
GramianReport PeGramian(const MatrixXd& signal, double dt, double window,
                        double threshold = 1e-8);

/// Collects xi and delta_q samples through a StepObserver.
struct SignalRecorder {
  std::vector<VectorXd> noise;
  std::vector<VectorXd> delta_q;
  int session = 0;

  StepObserver Observer();
  static MatrixXd Stack(const std::vector<VectorXd>& rows);
};

// ---------------------------------------------------------------------------
// Singular-perturbation form. ebar = k_p e_x, W_tilde = W_hat - W.

struct PerturbationScales {
  double eps_u = 0;  // k_p / eta
  double eps_delta = 0;  // k_p / a
  double eps_w = 0;  // k_p / gamma

  static PerturbationScales From(const ModelParams& p);
};

template <typename Scalar>
VectorX<Scalar> F1(const MatrixX<Scalar>& c_hat, const VectorX<Scalar>& u,
                   const VectorX<Scalar>& ebar, Scalar mu) {
  return -(c_hat.transpose() * (c_hat * u - ebar) + mu * u);
}

template <typename Scalar>
VectorX<Scalar> F2(const MatrixX<Scalar>& c, const VectorX<Scalar>& u) {
  return -c * u;
}

template <typename Scalar>
VectorX<Scalar> F3(const VectorX<Scalar>& delta_q, const VectorX<Scalar>& u,
                   Scalar a) {
  return -delta_q + u / a;
}

template <typename Scalar>
MatrixX<Scalar> G(const MatrixX<Scalar>& w_tilde, const MatrixX<Scalar>& phi,
                  const VectorX<Scalar>& delta_q) {
  const VectorX<Scalar> z = phi * delta_q;
  return -w_tilde * z * z.transpose();
}

/// Largest entrywise deviation between the full-model right-hand side and
/// its rewrite through f1..f3, g at one state:
///   du/dt = eta f1,  d(ebar)/dt = k_p f2,  d(delta_q)/dt = a f3,
///   dW_hat/dt = gamma g   (with chi = (x - C delta_q)/a so delta_x = C delta_q).
/// All rates are per model time unit. The returned value is relative to the
/// largest magnitude of the compared terms.
double PerturbationIdentityError(const State& s, const VectorXd& x_des,
                                 const MappingMatrix& mapping,
                                 const ModelParams& params);

// ---------------------------------------------------------------------------
// Reduced system (Lemma 1):  eps_u du/dt = f1(u, ebar, C),  debar/dt = f2(u)
// in the slow time t_s = k_p t with W_hat frozen at W.

struct ReducedSample {
  double t = 0;
  VectorXd u;
  VectorXd ebar;
};
using ReducedTrajectory = std::vector<ReducedSample>;

struct ReducedSystem {
  MatrixXd c;  // r x m (one row of C, or all of it)
  double mu = 0.3;
  double eps_u = 0.1;

  static ReducedSystem FromParams(const MatrixXd& c, const ModelParams& p);

  /// lambda_min(C^T C + mu I).
  double Alpha1() const;
  /// V = (eps_u/2)|u|^2 + (1/2)|ebar|^2 (so that dV/dt = -u^T (C^T C + mu I) u).
  double Lyapunov(const VectorXd& u, const VectorXd& ebar) const;
};

/// Classical RK4 at step h up to `horizon`, recording every `stride` steps.
ReducedTrajectory SimulateReduced(const ReducedSystem& sys, const VectorXd& u0,
                                  const VectorXd& ebar0, double horizon,
                                  double h = 1e-3, int stride = 1);

// ---------------------------------------------------------------------------
// Boundary layer (Lemma 2): in tau = gamma t (per model unit),
//   dW_tilde/dtau = g(W_tilde, delta_q),
//   ddelta_q/dtau = (a/gamma) (f3(delta_q, u) + excitation(tau)/a)
// with u frozen.

struct BoundarySample {
  double t = 0;
  MatrixXd w_tilde;
  VectorXd delta_q;
};
using BoundaryTrajectory = std::vector<BoundarySample>;

struct BoundarySystem {
  MatrixXd phi;
  VectorXd u_frozen;
  double a = 0.05;
  double gamma = 0.262;
  /// Injected joint-velocity excitation; empty means none.
  std::function<VectorXd(double)> excitation;

  /// V_b = ||W_tilde||_F^2 + (gamma/a)|delta_q - u/a|^2.
  double Lyapunov(const MatrixXd& w_tilde, const VectorXd& delta_q) const;
  /// Right-hand side of dV_b/dtau without excitation:
  ///   -2 ||W_tilde Phi delta_q||^2 - 2 |delta_q - u/a|^2.
  double LyapunovRate(const MatrixXd& w_tilde, const VectorXd& delta_q) const;
};

/// Sum of sines along each synergy direction:
///   amplitude * sum_j sin(omega_j tau + j) phi_j^T,  omega_j = base * (j+1).
std::function<VectorXd(double)> MultiSineExcitation(const MatrixXd& phi,
                                                    double amplitude,
                                                    double base_frequency);

BoundaryTrajectory SimulateBoundaryLayer(const BoundarySystem& sys,
                                         const MatrixXd& w_tilde0,
                                         const VectorXd& delta_q0,
                                         double horizon, double h = 1e-2,
                                         int stride = 1);

struct DecayFit {
  double slope = 0;  // d log||W_tilde|| / dtau
  double r_squared = 0;
};

/// Least-squares line through log||W_tilde|| against tau, discarding the first
/// `skip_fraction` of the trajectory.
DecayFit FitLogDecay(const BoundaryTrajectory& traj, double skip_fraction = 0.1);

// ---------------------------------------------------------------------------
// Lyapunov checks

struct LyapunovReport {
  std::vector<double> t;
  std::vector<double> v;
  std::vector<double> v_dot;  // central differences
  std::vector<double> bound;  // Simpson average of the pointwise bound
  double max_violation = 0;
  double max_increase = 0;  // largest V_{k+1} - V_k
  double tolerance = 0;
  bool passed = false;
};

/// Evaluates V along the samples, differentiates by central differences and
/// compares against the bound averaged over the same stencil
/// ((b_{k-1} + 4 b_k + b_{k+1}) / 6). `tolerance` is absolute and scaled by
/// max(1, max V); monotonicity allows `monotone_slack`.
LyapunovReport LyapunovCheck(const ReducedTrajectory& traj,
                             const ReducedSystem& sys,
                             double tolerance = 1e-6,
                             double monotone_slack = 1e-9);
LyapunovReport LyapunovCheck(const BoundaryTrajectory& traj,
                             const BoundarySystem& sys,
                             double tolerance = 1e-6,
                             double monotone_slack = 1e-9);

/// Reverses time (t -> t_end - t) for negative controls.
template <typename Sample>
std::vector<Sample> TimeReversed(std::vector<Sample> traj) {
  const double end = traj.empty() ? 0 : traj.back().t;
  std::reverse(traj.begin(), traj.end());
  for (auto& s : traj) s.t = end - s.t;
  return traj;
}

// ---------------------------------------------------------------------------
// Theorem 1 neighbourhood scan: the full model with a fixed target, noise of
// constant intensity sigma^2 on u, all rates per model time unit.

struct ScanOptions {
  double dt = 0.1;  // model time units
  double horizon = 4000;
  double max_horizon = 16000;
  double tail_fraction = 0.2;
  /// Relative change of the tail average that counts as steady.
  double steady_tolerance = 0.01;
  int seeds = 10;
  std::uint64_t seed = 11;
  /// Initial W_tilde scale for noisy runs (zero-noise runs start at W).
  double w_tilde0 = 0.5;
  /// Initial cursor error magnitude.
  double e0 = 1.0;
  unsigned threads = 0;
};

struct ScanRow {
  double amplitude = 0;  // sigma
  double gamma = 0;
  double eps_w = 0;
  double steady_norm = 0;  // seed mean of the tail-averaged norm
  double steady_norm_sd = 0;
  double horizon_used = 0;
  bool steady = false;
  bool diverged = false;
};

struct ScanReport {
  std::vector<ScanRow> rows;
  std::vector<double> ratios;  // successive steady_norm ratios
  bool ratios_ok = false;
};

/// Tail-averaged ||(u, ebar, W_tilde)|| for one run.
struct RunNorm {
  double tail_norm = 0;
  double previous_tail_norm = 0;  // tail window shifted back by half a tail
  bool diverged = false;
};

RunNorm SteadyStateNorm(const MappingMatrix& mapping, const ModelParams& params,
                        double sigma, std::uint64_t seed, const ScanOptions& opt);

ScanReport NeighborhoodScan(const MappingMatrix& mapping,
                            const ModelParams& params,
                            const std::vector<double>& amplitudes,
                            const ScanOptions& opt);

/// Steady-state norm at fixed sigma for each gamma (eps_w = k_p / gamma).
ScanReport EpsWSweep(const MappingMatrix& mapping, const ModelParams& params,
                     double sigma, const std::vector<double>& gammas,
                     const ScanOptions& opt);

/// Least-squares slope of values / values[0] against their index.
double NormalizedTrendSlope(const std::vector<double>& values);

}  // namespace bomi
