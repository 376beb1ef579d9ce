#include "bomi/fitting.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

#include <unsupported/Eigen/LevenbergMarquardt>

namespace bomi {
namespace {

struct ExponentialResidual : Eigen::DenseFunctor<double> {
  const VectorXd& k;
  const VectorXd& y;

  ExponentialResidual(const VectorXd& k_in, const VectorXd& y_in)
      : DenseFunctor<double>(3, static_cast<int>(k_in.size())), k(k_in), y(y_in) {}

  // x = (alpha, eta, c)
  int operator()(const InputType& x, ValueType& f) const {
    f = ExponentialModel(k, x(0), x(1), x(2)) - y;
    return 0;
  }

  int df(const InputType& x, JacobianType& j) const {
    const Eigen::ArrayXd e = (-x(1) * k.array()).exp();
    j.resize(k.size(), 3);
    j.col(0) = e.matrix();
    j.col(1) = (-x(0) * k.array() * e).matrix();
    j.col(2).setOnes();
    return 0;
  }
};

}  // namespace

double RSquared(const VectorXd& y, const VectorXd& fitted) {
  const double ss_res = (y - fitted).squaredNorm();
  const double ss_tot = (y.array() - y.mean()).matrix().squaredNorm();
  if (ss_tot == 0) return ss_res == 0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

ExponentialFit FitEta(const VectorXd& k, const VectorXd& values) {
  if (k.size() != values.size()) throw DimensionMismatch("k and RE differ in length");
  if (values.size() < 10) {
    throw DegenerateData("exponential fit needs at least 10 values, got " +
                         std::to_string(values.size()));
  }
  if (!values.allFinite() || values.minCoeff() < 0) {
    throw DegenerateData("RE values must be finite and non-negative");
  }

  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  ExponentialFit best;
  best.ss_res = std::numeric_limits<double>::infinity();
  bool any = false;
  for (double eta0 : kEtaStarts) {
    ExponentialResidual functor(k, values);
    Eigen::LevenbergMarquardt<ExponentialResidual> lm(functor);
    lm.setXtol(1e-14);
    lm.setFtol(1e-14);
    lm.setGtol(0);
    lm.setMaxfev(2000);
    VectorXd x(3);
    x << hi - lo, eta0, lo;
    lm.minimize(x);
    if (!x.allFinite()) continue;
    const VectorXd fitted = ExponentialModel(k, x(0), x(1), x(2));
    if (!fitted.allFinite()) continue;
    const double ss = (values - fitted).squaredNorm();
    if (ss < best.ss_res) {
      any = true;
      best.alpha = x(0);
      best.eta = x(1);
      best.c = x(2);
      best.ss_res = ss;
      best.eta_start = eta0;
      best.r_squared = RSquared(values, fitted);
    }
  }
  if (!any) throw FitDiverged("exponential fit failed from every start");
  if (hi == lo || !(best.alpha * best.eta > 1e-12 * std::max(1.0, hi))) {
    best.warnings.emplace_back("NonDecreasingSeries");
  }
  return best;
}

ExponentialFit FitEta(const MetricSeries& series) {
  VectorXd k(series.size());
  for (Eigen::Index i = 0; i < k.size(); ++i) {
    k(i) = series.index[static_cast<std::size_t>(i)];
  }
  return FitEta(k, series.values);
}

void GammaSearch::Validate() const {
  if (!(lo >= 0) || !(hi >= lo)) throw InvalidConfig("gamma range must satisfy 0 <= lo <= hi");
  if (!(coarse_step > 0) || !(fine_step > 0) || !(fine_halfwidth >= 0)) {
    throw InvalidConfig("gamma grid steps must be positive");
  }
}

double TrajectoryMismatch(const std::vector<TrialRecord>& reference,
                          const std::vector<TrialRecord>& model) {
  if (model.size() < reference.size()) return std::numeric_limits<double>::infinity();
  double total = 0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const auto& a = reference[i].samples;
    const auto& b = model[i].samples;
    double sq = 0;
    for (std::size_t j = 0; j < std::min(a.size(), b.size()); ++j) {
      if (a[j].step != b[j].step) break;
      sq += (a[j].q - b[j].q).squaredNorm();
    }
    total += std::sqrt(sq);
  }
  return total;
}

std::vector<GammaPoint> EvaluateGammas(const std::vector<double>& gammas,
                                       const std::vector<TrialRecord>& reference,
                                       const ExperimentConfig& cfg,
                                       const ModelSetup& setup, unsigned threads) {
  std::vector<GammaPoint> out(gammas.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < gammas.size(); i = next++) {
      ModelSetup candidate = setup;
      candidate.params.gamma = gammas[i];
      out[i].gamma = gammas[i];
      const ExperimentResult run = RunExperiment(cfg, candidate);
      out[i].objective = run.diverged ? std::numeric_limits<double>::infinity()
                                      : TrajectoryMismatch(reference, run.records);
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(gammas.size()));
  if (threads <= 1) {
    worker();
    return out;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return out;
}

GammaFit FitGamma(const std::vector<TrialRecord>& reference,
                  const ExperimentConfig& cfg, const ModelSetup& setup,
                  const GammaSearch& search) {
  search.Validate();
  cfg.Validate();
  setup.params.Validate();

  // Grid points are lo + i * step, keyed on the fine grid so coarse and fine
  // evaluations of the same gamma are shared.
  std::map<long long, GammaPoint> evaluated;
  auto key = [&](double g) { return std::llround((g - search.lo) / search.fine_step); };
  auto run = [&](const std::vector<double>& gammas) {
    std::vector<double> todo;
    for (double g : gammas) {
      if (!evaluated.count(key(g))) todo.push_back(g);
    }
    for (const GammaPoint& p : EvaluateGammas(todo, reference, cfg, setup, search.threads)) {
      evaluated[key(p.gamma)] = p;
    }
  };
  auto argmin = [&](const std::vector<double>& gammas) {
    double best_g = gammas.front();
    double best = std::numeric_limits<double>::infinity();
    for (double g : gammas) {
      const double v = evaluated.at(key(g)).objective;
      if (v < best) {
        best = v;
        best_g = g;
      }
    }
    return best_g;
  };

  std::vector<double> coarse;
  const auto n_coarse = std::llround(std::floor((search.hi - search.lo) / search.coarse_step + 1e-9));
  for (long long i = 0; i <= n_coarse; ++i) coarse.push_back(search.lo + i * search.coarse_step);
  run(coarse);

  GammaFit fit;
  fit.coarse_minimum = argmin(coarse);
  std::vector<double> fine;
  const auto half = std::llround(search.fine_halfwidth / search.fine_step);
  const long long centre = key(fit.coarse_minimum);
  for (long long j = -half; j <= half; ++j) {
    const double g = search.lo + (centre + j) * search.fine_step;
    if (g >= search.lo - 1e-12 && g <= search.hi + 1e-12) fine.push_back(g);
  }
  run(fine);

  for (const auto& [k, p] : evaluated) fit.curve.push_back(p);
  // std::map iterates in ascending gamma, so strict < keeps the smallest.
  for (const GammaPoint& p : fit.curve) {
    if (p.objective < fit.objective) {
      fit.objective = p.objective;
      fit.gamma_hat = p.gamma;
    }
  }
  if (!std::isfinite(fit.objective)) fit.gamma_hat = fit.curve.front().gamma;
  return fit;
}

std::vector<TrialRecord> SyntheticSubject(const ModelSetup& setup,
                                          const ExperimentConfig& cfg,
                                          std::uint64_t seed) {
  ModelSetup subject = setup;
  subject.params.noise.seed = seed;
  ExperimentResult run = RunExperiment(cfg, subject);
  if (run.diverged) throw Diverged(run.error);
  return std::move(run.records);
}

}  // namespace bomi
