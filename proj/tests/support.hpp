#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "bomi/dynamics.hpp"
#include "bomi/protocol.hpp"

namespace bomi::test {

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("bomi_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// rows x cols matrix with orthonormal rows (rows <= cols), from QR of a
/// Gaussian matrix.
inline MatrixXd OrthonormalRows(Eigen::Index rows, Eigen::Index cols, RandomStream& rng) {
  MatrixXd g(cols, rows);
  for (Eigen::Index j = 0; j < rows; ++j) g.col(j) = rng.Normal(cols);
  Eigen::HouseholderQR<MatrixXd> qr(g);
  const MatrixXd q = qr.householderQ() * MatrixXd::Identity(cols, rows);
  return q.transpose();
}

inline MatrixXd RandomMatrix(Eigen::Index rows, Eigen::Index cols, RandomStream& rng) {
  MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) m.col(j) = rng.Normal(rows);
  return m;
}

inline State RandomState(Eigen::Index n, Eigen::Index m, Eigen::Index h, RandomStream& rng) {
  State s = State::Zero(n, m, h);
  s.u = rng.Normal(m);
  s.q = rng.Normal(m);
  s.x = rng.Normal(n);
  s.chi = rng.Normal(n);
  s.delta_q = rng.Normal(m);
  s.w_hat = RandomMatrix(n, h, rng);
  return s;
}

/// Small, fast experiment for protocol-level tests.
inline ExperimentConfig SmallExperiment(int sessions = 2, int trials = 6) {
  ExperimentConfig cfg;
  cfg.n_sessions = sessions;
  cfg.trials_per_session = trials;
  cfg.k_p_schedule = ExperimentConfig::GeometricSchedule(5e-3, 0.9, sessions);
  return cfg;
}

}  // namespace bomi::test
