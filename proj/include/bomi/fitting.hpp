#pragma once

#include <limits>
#include <string>
#include <vector>

#include "bomi/metrics.hpp"
#include "bomi/protocol.hpp"

namespace bomi {

/// RE(k) = alpha * exp(-eta * k) + c fitted by least squares.
struct ExponentialFit {
  double alpha = 0;
  double eta = 0;
  double c = 0;
  double r_squared = 0;
  double ss_res = 0;
  /// Starting eta of the winning start.
  double eta_start = 0;
  std::vector<std::string> warnings;
};

/// Value of alpha * exp(-eta * k) + c.
template <typename Derived>
VectorX<typename Derived::Scalar> ExponentialModel(
    const Eigen::MatrixBase<Derived>& k, double alpha, double eta, double c) {
  return (alpha * (-eta * k.array()).exp() + c).matrix();
}

/// 1 - SS_res / SS_tot. A constant series has SS_tot = 0; R^2 is then 1 for
/// an exact fit and 0 otherwise.
double RSquared(const VectorXd& y, const VectorXd& fitted);

inline constexpr double kEtaStarts[] = {0.01, 0.05, 0.2};

/// Multi-start Levenberg-Marquardt with alpha0 = max - min, c0 = min and
/// eta0 from kEtaStarts; the start with the smallest residual wins. Needs at
/// least 10 non-negative values. Warns "NonDecreasingSeries" when the fit has
/// no decay (alpha * eta <= 0 or a constant series). Throws FitDiverged when
/// every start fails.
ExponentialFit FitEta(const VectorXd& k, const VectorXd& values);
ExponentialFit FitEta(const MetricSeries& series);

struct GammaSearch {
  double lo = 0.0;
  double hi = 10.0;
  double coarse_step = 0.1;
  double fine_step = 0.002;
  /// Half-width of the fine grid around the coarse minimum.
  double fine_halfwidth = 0.1;
  /// 0 uses std::thread::hardware_concurrency().
  unsigned threads = 0;

  void Validate() const;
};

struct GammaPoint {
  double gamma = 0;
  double objective = std::numeric_limits<double>::infinity();
};

struct GammaFit {
  double gamma_hat = 0;
  double objective = std::numeric_limits<double>::infinity();
  /// Every evaluated point, sorted by gamma, duplicates removed.
  std::vector<GammaPoint> curve;
  double coarse_minimum = 0;
};

/// Sum over trials of the Frobenius norm of the joint-trajectory difference
/// restricted to samples recorded at the same step (common prefix). Trials
/// missing from `model` count as +inf.
double TrajectoryMismatch(const std::vector<TrialRecord>& reference,
                          const std::vector<TrialRecord>& model);

/// Simulates the experiment at each gamma (other parameters and all seeds as
/// in `setup`/`cfg`) and scores it with TrajectoryMismatch. Diverged
/// candidates get +inf. Ties resolve to the smallest gamma.
GammaFit FitGamma(const std::vector<TrialRecord>& reference,
                  const ExperimentConfig& cfg, const ModelSetup& setup,
                  const GammaSearch& search = {});

/// Objective at explicit gamma values, evaluated in parallel.
std::vector<GammaPoint> EvaluateGammas(const std::vector<double>& gammas,
                                       const std::vector<TrialRecord>& reference,
                                       const ExperimentConfig& cfg,
                                       const ModelSetup& setup, unsigned threads);

/// A simulated "reference" subject: RunExperiment with noise seed `seed`.
/// Throws Diverged if the run does not complete.
std::vector<TrialRecord> SyntheticSubject(const ModelSetup& setup,
                                          const ExperimentConfig& cfg,
                                          std::uint64_t seed);

}  // namespace bomi
