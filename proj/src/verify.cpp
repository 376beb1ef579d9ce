#include "bomi/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace bomi {

// --- persistent excitation --------------------------------------------------

GramianReport PeGramian(const MatrixXd& signal, double dt, double window,
                        double threshold) {
  if (!(dt > 0) || !(window > 0)) throw InvalidConfig("dt and window must be positive");
  const auto w = static_cast<Eigen::Index>(std::llround(window / dt));
  const Eigen::Index n = signal.rows();
  if (w < 1 || n - 1 < 2 * w) {
    throw WindowTooLong("signal spans " + std::to_string((n - 1) * dt) +
                        " s, needs at least 2T = " + std::to_string(2 * window));
  }
  const Eigen::Index d = signal.cols();
  // Trapezoid segment j covers [t_j, t_{j+1}].
  auto segment = [&](Eigen::Index j) -> MatrixXd {
    return 0.5 * dt *
           (signal.row(j).transpose() * signal.row(j) +
            signal.row(j + 1).transpose() * signal.row(j + 1));
  };
  auto fresh = [&](Eigen::Index start) {
    VectorXd weights = VectorXd::Constant(w + 1, dt);
    weights(0) = weights(w) = 0.5 * dt;
    const auto block = signal.middleRows(start, w + 1);
    return MatrixXd(block.transpose() * weights.asDiagonal() * block);
  };

  GramianReport report;
  report.window_length = w * dt;
  report.threshold = threshold;
  report.alpha1 = std::numeric_limits<double>::infinity();
  report.alpha2 = 0;
  MatrixXd gram(d, d);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig;
  for (Eigen::Index start = 0; start + w < n; ++start) {
    if (start % w == 0) {
      gram = fresh(start);
    } else {
      gram += segment(start + w - 1) - segment(start - 1);
    }
    eig.compute(gram, Eigen::EigenvaluesOnly);
    report.alpha1 = std::min(report.alpha1, eig.eigenvalues()(0));
    report.alpha2 = std::max(report.alpha2, eig.eigenvalues()(d - 1));
    ++report.windows_checked;
  }
  report.alpha1 = std::max(report.alpha1, 0.0);
  report.pe_satisfied = report.alpha1 > threshold;
  return report;
}

StepObserver SignalRecorder::Observer() {
  return [this](const StepEvent& e) {
    if (e.session != session) return;
    noise.push_back(*e.noise);
    delta_q.push_back(e.state->delta_q);
  };
}

MatrixXd SignalRecorder::Stack(const std::vector<VectorXd>& rows) {
  if (rows.empty()) return MatrixXd();
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return out;
}

// --- singular-perturbation form ---------------------------------------------

PerturbationScales PerturbationScales::From(const ModelParams& p) {
  return {p.k_p / p.eta, p.k_p / p.a, p.k_p / p.gamma};
}

double PerturbationIdentityError(const State& s, const VectorXd& x_des,
                                 const MappingMatrix& mapping,
                                 const ModelParams& params) {
  ModelParams p = params;
  p.time_unit = 1.0;
  const MatrixXd& c = mapping.c;
  const MatrixXd& phi = mapping.basis.phi;

  State state = s;
  state.chi = (state.x - c * state.delta_q) / p.a;
  StepInputs in;
  in.mapping = &mapping;
  in.params = &p;
  in.x_des = x_des;
  const State d = ModelRhs(state, in);

  const VectorXd ebar = p.k_p * (x_des - state.x);
  const MatrixXd c_hat = state.w_hat * phi;
  const MatrixXd w_tilde = state.w_hat - mapping.w;

  const VectorXd u_form = p.eta * F1<double>(c_hat, state.u, ebar, p.mu);
  const VectorXd ebar_model = -p.k_p * d.x;
  const VectorXd ebar_form = p.k_p * F2<double>(c, state.u);
  const VectorXd dq_form = p.a * F3<double>(state.delta_q, state.u, p.a);
  const MatrixXd w_form = p.gamma * G<double>(w_tilde, phi, state.delta_q);

  const double diff = std::max({(d.u - u_form).cwiseAbs().maxCoeff(),
                                (ebar_model - ebar_form).cwiseAbs().maxCoeff(),
                                (d.delta_q - dq_form).cwiseAbs().maxCoeff(),
                                (d.w_hat - w_form).cwiseAbs().maxCoeff()});
  const double scale = std::max({1.0, d.u.cwiseAbs().maxCoeff(),
                                 ebar_model.cwiseAbs().maxCoeff(),
                                 d.delta_q.cwiseAbs().maxCoeff(),
                                 d.w_hat.cwiseAbs().maxCoeff()});
  return diff / scale;
}

// --- reduced system -----------------------------------------------------------

ReducedSystem ReducedSystem::FromParams(const MatrixXd& c, const ModelParams& p) {
  return {c, p.mu, p.k_p / p.eta};
}

double ReducedSystem::Alpha1() const {
  const MatrixXd a = c.transpose() * c + mu * MatrixXd::Identity(c.cols(), c.cols());
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(a, Eigen::EigenvaluesOnly)
      .eigenvalues()(0);
}

double ReducedSystem::Lyapunov(const VectorXd& u, const VectorXd& ebar) const {
  return 0.5 * eps_u * u.squaredNorm() + 0.5 * ebar.squaredNorm();
}

ReducedTrajectory SimulateReduced(const ReducedSystem& sys, const VectorXd& u0,
                                  const VectorXd& ebar0, double horizon,
                                  double h, int stride) {
  internal::RequireSize(u0.size(), sys.c.cols(), "reduced u0");
  internal::RequireSize(ebar0.size(), sys.c.rows(), "reduced ebar0");
  const Eigen::Index m = u0.size();
  auto rhs = [&](const VectorXd& z) {
    const VectorXd u = z.head(m);
    const VectorXd e = z.tail(z.size() - m);
    VectorXd dz(z.size());
    dz.head(m) = F1<double>(sys.c, u, e, sys.mu) / sys.eps_u;
    dz.tail(z.size() - m) = F2<double>(sys.c, u);
    return dz;
  };
  VectorXd z(u0.size() + ebar0.size());
  z << u0, ebar0;
  const auto steps = static_cast<long long>(std::llround(horizon / h));
  ReducedTrajectory traj;
  traj.reserve(static_cast<std::size_t>(steps / stride + 2));
  traj.push_back({0.0, u0, ebar0});
  for (long long k = 1; k <= steps; ++k) {
    const VectorXd k1 = rhs(z);
    const VectorXd k2 = rhs(z + 0.5 * h * k1);
    const VectorXd k3 = rhs(z + 0.5 * h * k2);
    const VectorXd k4 = rhs(z + h * k3);
    z += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    if (!z.allFinite() || z.cwiseAbs().maxCoeff() > 1e6) {
      throw Diverged("reduced system left the 1e6 box at t=" + std::to_string(k * h));
    }
    if (k % stride == 0 || k == steps) {
      traj.push_back({k * h, z.head(m), z.tail(z.size() - m)});
    }
  }
  return traj;
}

// --- boundary layer ---------------------------------------------------------

double BoundarySystem::Lyapunov(const MatrixXd& w_tilde,
                                const VectorXd& delta_q) const {
  return w_tilde.squaredNorm() + (gamma / a) * (delta_q - u_frozen / a).squaredNorm();
}

double BoundarySystem::LyapunovRate(const MatrixXd& w_tilde,
                                    const VectorXd& delta_q) const {
  return -2 * (w_tilde * (phi * delta_q)).squaredNorm() -
         2 * (delta_q - u_frozen / a).squaredNorm();
}

std::function<VectorXd(double)> MultiSineExcitation(const MatrixXd& phi,
                                                    double amplitude,
                                                    double base_frequency) {
  return [phi, amplitude, base_frequency](double tau) {
    VectorXd v = VectorXd::Zero(phi.cols());
    for (Eigen::Index j = 0; j < phi.rows(); ++j) {
      v += std::sin(base_frequency * (j + 1) * tau + j) * phi.row(j).transpose();
    }
    return VectorXd(amplitude * v);
  };
}

BoundaryTrajectory SimulateBoundaryLayer(const BoundarySystem& sys,
                                         const MatrixXd& w_tilde0,
                                         const VectorXd& delta_q0,
                                         double horizon, double h, int stride) {
  internal::RequireSize(w_tilde0.cols(), sys.phi.rows(), "W_tilde columns");
  internal::RequireSize(delta_q0.size(), sys.phi.cols(), "delta_q0");
  internal::RequireSize(sys.u_frozen.size(), sys.phi.cols(), "u_frozen");
  const double ratio = sys.a / sys.gamma;
  struct Rates {
    MatrixXd w;
    VectorXd q;
  };
  auto rhs = [&](double tau, const MatrixXd& w, const VectorXd& q) {
    VectorXd drive = F3<double>(q, sys.u_frozen, sys.a);
    if (sys.excitation) drive += sys.excitation(tau) / sys.a;
    return Rates{G<double>(w, sys.phi, q), ratio * drive};
  };

  MatrixXd w = w_tilde0;
  VectorXd q = delta_q0;
  const auto steps = static_cast<long long>(std::llround(horizon / h));
  BoundaryTrajectory traj;
  traj.reserve(static_cast<std::size_t>(steps / stride + 2));
  traj.push_back({0.0, w, q});
  for (long long k = 0; k < steps; ++k) {
    const double tau = k * h;
    const Rates k1 = rhs(tau, w, q);
    const Rates k2 = rhs(tau + h / 2, w + h / 2 * k1.w, q + h / 2 * k1.q);
    const Rates k3 = rhs(tau + h / 2, w + h / 2 * k2.w, q + h / 2 * k2.q);
    const Rates k4 = rhs(tau + h, w + h * k3.w, q + h * k3.q);
    w += (h / 6) * (k1.w + 2 * k2.w + 2 * k3.w + k4.w);
    q += (h / 6) * (k1.q + 2 * k2.q + 2 * k3.q + k4.q);
    if (!w.allFinite() || !q.allFinite() ||
        std::max(w.cwiseAbs().maxCoeff(), q.cwiseAbs().maxCoeff()) > 1e6) {
      throw Diverged("boundary layer left the 1e6 box at tau=" + std::to_string(tau));
    }
    if ((k + 1) % stride == 0 || k + 1 == steps) traj.push_back({(k + 1) * h, w, q});
  }
  return traj;
}

DecayFit FitLogDecay(const BoundaryTrajectory& traj, double skip_fraction) {
  const auto first = static_cast<std::size_t>(std::ceil(skip_fraction * traj.size()));
  std::vector<double> t;
  std::vector<double> y;
  for (std::size_t i = first; i < traj.size(); ++i) {
    const double norm = traj[i].w_tilde.norm();
    if (norm > 0 && std::isfinite(norm)) {
      t.push_back(traj[i].t);
      y.push_back(std::log(norm));
    }
  }
  DecayFit fit;
  if (t.size() < 2) return fit;
  const Eigen::Map<const VectorXd> tv(t.data(), static_cast<Eigen::Index>(t.size()));
  const Eigen::Map<const VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
  const VectorXd tc = tv.array() - tv.mean();
  const VectorXd yc = yv.array() - yv.mean();
  fit.slope = tc.dot(yc) / tc.squaredNorm();
  const double ss_tot = yc.squaredNorm();
  const double ss_res = (yc - fit.slope * tc).squaredNorm();
  fit.r_squared = ss_tot > 0 ? 1 - ss_res / ss_tot : 0.0;
  return fit;
}

// --- Lyapunov checks ----------------------------------------------------------

namespace {

LyapunovReport CheckSeries(std::vector<double> t, std::vector<double> v,
                           const std::vector<double>& rate_bound,
                           double tolerance, double monotone_slack) {
  LyapunovReport r;
  const double v_max = v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
  r.tolerance = tolerance * std::max(1.0, v_max);
  for (std::size_t k = 1; k < v.size(); ++k) {
    r.max_increase = std::max(r.max_increase, v[k] - v[k - 1]);
  }
  for (std::size_t k = 1; k + 1 < v.size(); ++k) {
    const double v_dot = (v[k + 1] - v[k - 1]) / (t[k + 1] - t[k - 1]);
    const double bound = (rate_bound[k - 1] + 4 * rate_bound[k] + rate_bound[k + 1]) / 6;
    r.v_dot.push_back(v_dot);
    r.bound.push_back(bound);
    r.max_violation = std::max(r.max_violation, v_dot - bound);
  }
  r.t = std::move(t);
  r.v = std::move(v);
  r.passed = r.max_violation <= r.tolerance && r.max_increase <= monotone_slack;
  return r;
}

}  // namespace

LyapunovReport LyapunovCheck(const ReducedTrajectory& traj,
                             const ReducedSystem& sys, double tolerance,
                             double monotone_slack) {
  const double alpha1 = sys.Alpha1();
  std::vector<double> t, v, b;
  for (const ReducedSample& s : traj) {
    t.push_back(s.t);
    v.push_back(sys.Lyapunov(s.u, s.ebar));
    b.push_back(-alpha1 * s.u.squaredNorm());
  }
  return CheckSeries(std::move(t), std::move(v), b, tolerance, monotone_slack);
}

LyapunovReport LyapunovCheck(const BoundaryTrajectory& traj,
                             const BoundarySystem& sys, double tolerance,
                             double monotone_slack) {
  std::vector<double> t, v, b;
  for (const BoundarySample& s : traj) {
    t.push_back(s.t);
    v.push_back(sys.Lyapunov(s.w_tilde, s.delta_q));
    b.push_back(sys.LyapunovRate(s.w_tilde, s.delta_q));
  }
  return CheckSeries(std::move(t), std::move(v), b, tolerance, monotone_slack);
}

// --- Theorem 1 scan -----------------------------------------------------------

RunNorm SteadyStateNorm(const MappingMatrix& mapping, const ModelParams& params,
                        double sigma, std::uint64_t seed, const ScanOptions& opt) {
  ModelParams p = params;
  p.time_unit = 1.0;
  const Eigen::Index n = mapping.outputs();
  const Eigen::Index m = mapping.basis.joints();
  const Eigen::Index h = mapping.basis.synergies();

  RandomStream init = RandomStream::Derived(seed, 0x1u);
  RandomStream rng = RandomStream::Derived(seed, 0x2u);
  State s = State::Zero(n, m, h);
  const VectorXd x_des = VectorXd::Zero(n);
  s.x = opt.e0 * init.Normal(n).normalized();
  s.chi = s.x / p.a;
  s.w_hat = mapping.w;
  if (sigma > 0) {
    MatrixXd dir(n, h);
    for (Eigen::Index j = 0; j < h; ++j) dir.col(j) = init.Normal(n);
    s.w_hat += opt.w_tilde0 * dir / dir.norm();
  }

  StepInputs in;
  in.mapping = &mapping;
  in.params = &p;
  in.x_des = x_des;
  in.noise_variance = sigma * sigma;

  const auto steps = static_cast<long long>(std::llround(opt.horizon / opt.dt));
  const auto tail = static_cast<long long>(std::llround(opt.tail_fraction * steps));
  const long long tail_start = steps - tail;
  const long long prev_start = steps - tail - tail / 2;
  const long long prev_end = steps - tail / 2;

  RunNorm out;
  double sum = 0, prev_sum = 0;
  try {
    for (long long k = 1; k <= steps; ++k) {
      s = Step(s, in, opt.dt, rng);
      if (k > prev_start || k > tail_start) {
        const double norm = std::sqrt(s.u.squaredNorm() +
                                      (p.k_p * (x_des - s.x)).squaredNorm() +
                                      (s.w_hat - mapping.w).squaredNorm());
        if (k > tail_start) sum += norm;
        if (k > prev_start && k <= prev_end) prev_sum += norm;
      }
    }
  } catch (const Diverged&) {
    out.diverged = true;
    out.tail_norm = out.previous_tail_norm = std::numeric_limits<double>::infinity();
    return out;
  }
  out.tail_norm = sum / static_cast<double>(tail);
  out.previous_tail_norm = prev_sum / static_cast<double>(prev_end - prev_start);
  return out;
}

namespace {

template <typename Fn>
void ParallelFor(std::size_t count, unsigned threads, Fn fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(count));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) fn(i);
  };
  if (threads <= 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

// Seed-averaged steady-state norm, doubling the horizon until the tail
// average changes by less than steady_tolerance or max_horizon is reached.
ScanRow MeasureRow(const MappingMatrix& mapping, const ModelParams& params,
                   double sigma, const ScanOptions& opt) {
  ScanRow row;
  row.amplitude = sigma;
  row.gamma = params.gamma;
  row.eps_w = params.k_p / params.gamma;
  ScanOptions run = opt;
  for (;;) {
    std::vector<RunNorm> norms(static_cast<std::size_t>(run.seeds));
    ParallelFor(norms.size(), run.threads, [&](std::size_t i) {
      norms[i] = SteadyStateNorm(mapping, params, sigma, run.seed + i, run);
    });
    double mean = 0, prev = 0;
    row.diverged = false;
    for (const RunNorm& r : norms) {
      row.diverged |= r.diverged;
      mean += r.tail_norm;
      prev += r.previous_tail_norm;
    }
    mean /= norms.size();
    prev /= norms.size();
    double var = 0;
    for (const RunNorm& r : norms) var += (r.tail_norm - mean) * (r.tail_norm - mean);
    row.steady_norm = mean;
    row.steady_norm_sd = norms.size() > 1 ? std::sqrt(var / (norms.size() - 1)) : 0.0;
    row.horizon_used = run.horizon;
    row.steady = !row.diverged &&
                 (mean == 0 || std::abs(mean - prev) <= opt.steady_tolerance * mean);
    if (row.steady || row.diverged || run.horizon * 2 > opt.max_horizon) break;
    run.horizon *= 2;
  }
  return row;
}

}  // namespace

ScanReport NeighborhoodScan(const MappingMatrix& mapping,
                            const ModelParams& params,
                            const std::vector<double>& amplitudes,
                            const ScanOptions& opt) {
  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    if (!(amplitudes[i] >= 0) || (i > 0 && !(amplitudes[i] > amplitudes[i - 1]))) {
      throw InvalidConfig("noise amplitudes must be non-negative and increasing");
    }
  }
  ScanReport report;
  for (double sigma : amplitudes) report.rows.push_back(MeasureRow(mapping, params, sigma, opt));
  report.ratios_ok = true;
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    const double ratio = report.rows[i].steady_norm / report.rows[i - 1].steady_norm;
    report.ratios.push_back(ratio);
    report.ratios_ok &= ratio >= 1.0 && ratio <= 4.0;
  }
  return report;
}

ScanReport EpsWSweep(const MappingMatrix& mapping, const ModelParams& params,
                     double sigma, const std::vector<double>& gammas,
                     const ScanOptions& opt) {
  ScanReport report;
  for (double gamma : gammas) {
    ModelParams p = params;
    p.gamma = gamma;
    report.rows.push_back(MeasureRow(mapping, p, sigma, opt));
  }
  std::vector<double> norms;
  for (const ScanRow& r : report.rows) norms.push_back(r.steady_norm);
  report.ratios_ok = NormalizedTrendSlope(norms) <= 0.01;
  return report;
}

double NormalizedTrendSlope(const std::vector<double>& values) {
  if (values.size() < 2 || values.front() == 0) return 0.0;
  const auto n = static_cast<double>(values.size());
  const double x_mean = (n - 1) / 2;
  double y_mean = 0;
  for (double v : values) y_mean += v / values.front();
  y_mean /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double dx = static_cast<double>(i) - x_mean;
    sxy += dx * (values[i] / values.front() - y_mean);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace bomi
