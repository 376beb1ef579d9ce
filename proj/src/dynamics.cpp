#include "bomi/dynamics.hpp"

#include <cmath>

namespace bomi {

NoiseSchedule NoiseSchedule::Geometric(double first, double ratio,
                                       int sessions) {
  NoiseSchedule s;
  s.s_session.resize(static_cast<std::size_t>(std::max(sessions, 0)));
  for (int k = 0; k < sessions; ++k) s.s_session[k] = first * std::pow(ratio, k);
  return s;
}

double NoiseSchedule::Variance(int session, double t_session) const {
  if (s_session.empty()) return 0.0;
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(session),
                                       s_session.size() - 1);
  return s_session[k] * (floor + std::exp(-decay_rate * t_session));
}

void NoiseSchedule::Validate() const {
  for (std::size_t k = 0; k < s_session.size(); ++k) {
    if (!(s_session[k] >= 0) || !std::isfinite(s_session[k])) {
      throw InvalidConfig("noise amplitude must be finite and >= 0");
    }
    if (k > 0 && s_session[k] > s_session[k - 1]) {
      throw InvalidConfig("noise amplitudes must be non-increasing over sessions");
    }
  }
  if (!(decay_rate >= 0)) throw InvalidConfig("noise decay rate must be >= 0");
  if (!(floor >= 0)) throw InvalidConfig("noise floor must be >= 0");
}

void ModelParams::Validate() const {
  auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0; };
  if (!finite_nonneg(gamma)) throw InvalidConfig("gamma must be >= 0");
  if (!finite_nonneg(eta)) throw InvalidConfig("eta must be >= 0");
  if (!(mu > 0) || !std::isfinite(mu)) throw InvalidConfig("mu must be > 0");
  if (!(k_p > 0) || !std::isfinite(k_p)) throw InvalidConfig("k_p must be > 0");
  if (!(a > 0) || !std::isfinite(a)) throw InvalidConfig("a must be > 0");
  if (!(time_unit > 0)) throw InvalidConfig("time_unit must be > 0");
  noise.Validate();
}

std::vector<std::string> ModelParams::TimescaleWarnings() const {
  std::vector<std::string> out;
  if (!(k_p < eta)) out.emplace_back("timescale ordering violated: expected k_p < eta");
  if (!(eta < gamma)) out.emplace_back("timescale ordering violated: expected eta < gamma");
  if (!(a > k_p)) out.emplace_back("timescale ordering violated: expected a > k_p");
  return out;
}

VectorXd InverseFixedPoint(const MatrixXd& c_hat, double mu, double k_p,
                           const VectorXd& e_x) {
  const MatrixXd normal = c_hat.transpose() * c_hat +
                          mu * MatrixXd::Identity(c_hat.cols(), c_hat.cols());
  return normal.ldlt().solve(k_p * c_hat.transpose() * e_x);
}

VectorXd FeedbackOracle(const MatrixXd& c, double k_p, const VectorXd& e_x) {
  internal::RequireSize(e_x.size(), c.rows(), "FeedbackOracle e_x");
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(c);
  if (cod.rank() < c.rows()) {
    throw RankDeficient("pseudo-inverse needs a full-row-rank mapping");
  }
  return k_p * cod.solve(e_x);
}

State ModelRhs(const State& s, const StepInputs& in) {
  const ModelParams& p = *in.params;
  const MappingMatrix& map = *in.mapping;
  const double a = p.PerSecond(p.a);

  State d;
  d.x = CursorRhs(map.c, s.u);
  d.q = s.u;
  const FilterRates<double> f = FilterRhs(s, a);
  d.chi = f.chi_dot;
  d.delta_q = f.delta_q_dot;
  d.w_hat = ForwardRhs(s.w_hat, map.basis.phi, s.delta_q, f.delta_x,
                       p.PerSecond(p.gamma));
  d.u = InverseRhs(s.w_hat, map.basis.phi, s.u, VectorXd(in.x_des - s.x),
                   p.PerSecond(p.eta), p.mu, p.PerSecond(p.k_p));
  return d;
}

namespace {

State Axpy(const State& s, double h, const State& d) {
  State out;
  out.u = s.u + h * d.u;
  out.q = s.q + h * d.q;
  out.x = s.x + h * d.x;
  out.chi = s.chi + h * d.chi;
  out.delta_q = s.delta_q + h * d.delta_q;
  out.w_hat = s.w_hat + h * d.w_hat;
  return out;
}

void GuardDivergence(const State& s, double bound) {
  if (!s.AllFinite() || s.MaxAbs() > bound) {
    throw Diverged("state magnitude exceeded " + std::to_string(bound));
  }
}

}  // namespace

State Step(const State& s, const StepInputs& in, double dt, RandomStream& rng,
           VectorXd* noise_out) {
  State next = Axpy(s, dt, ModelRhs(s, in));
  if (in.noise_variance > 0) {
    const VectorXd z = rng.Normal(s.u.size());
    const double scale = std::sqrt(in.noise_variance * dt);
    next.u += scale * z;
    if (noise_out) *noise_out = (scale / dt) * z;
  } else if (noise_out) {
    *noise_out = VectorXd::Zero(s.u.size());
  }
  GuardDivergence(next, in.divergence_bound);
  return next;
}

State StepRk4(const State& s, const StepInputs& in, double dt) {
  const State k1 = ModelRhs(s, in);
  const State k2 = ModelRhs(Axpy(s, dt / 2, k1), in);
  const State k3 = ModelRhs(Axpy(s, dt / 2, k2), in);
  const State k4 = ModelRhs(Axpy(s, dt, k3), in);
  State next = Axpy(s, dt / 6, k1);
  next = Axpy(next, dt / 3, k2);
  next = Axpy(next, dt / 3, k3);
  next = Axpy(next, dt / 6, k4);
  GuardDivergence(next, in.divergence_bound);
  return next;
}

}  // namespace bomi
