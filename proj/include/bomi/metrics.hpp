#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bomi/errors.hpp"
#include "bomi/protocol.hpp"
#include "bomi/types.hpp"

namespace bomi {

enum class MetricKind { kRE, kFME, kModeAngle };

const char* MetricName(MetricKind kind);

/// (k, value) pairs with strictly increasing k.
struct MetricSeries {
  MetricKind kind = MetricKind::kRE;
  std::vector<int> index;
  VectorXd values;
  std::string smoothing = "none";

  Eigen::Index size() const { return values.size(); }
};

/// Final cursor-to-target distance per trial, k = 1..N in record order.
MetricSeries ReachingError(const std::vector<TrialRecord>& records);

/// ||W - W_hat||_F / ||W||_F. Throws ZeroTrueMapping when ||W|| = 0.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar ForwardModelError(
    const Eigen::MatrixBase<DerivedA>& w_hat,
    const Eigen::MatrixBase<DerivedB>& w) {
  if (w_hat.rows() != w.rows() || w_hat.cols() != w.cols()) {
    throw DimensionMismatch("W_hat and W differ in shape");
  }
  const auto denom = w.norm();
  if (denom == 0) throw ZeroTrueMapping("||W|| = 0");
  return (w - w_hat).norm() / denom;
}

/// FME of each record's end-of-trial W_hat against `w`.
MetricSeries ForwardModelErrorSeries(const std::vector<TrialRecord>& records,
                                     const MatrixXd& w);

/// Trailing moving average; the first window-1 outputs average over the
/// values seen so far, so the length is preserved.
template <typename Derived>
VectorX<typename Derived::Scalar> MovingAverage(
    const Eigen::MatrixBase<Derived>& v, Eigen::Index window) {
  using Scalar = typename Derived::Scalar;
  if (window < 1) throw InvalidConfig("moving-average window must be >= 1");
  VectorX<Scalar> out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const Eigen::Index len = std::min(i + 1, window);
    out(i) = v.segment(i + 1 - len, len).mean();
  }
  return out;
}

/// Groups trials by (start_label, target_idx), averages the j-th member of
/// every group that has one, then applies MovingAverage(window). Throws
/// EmptyGroup when there is nothing to group.
MetricSeries GroupAndSmooth(const MetricSeries& series,
                            const std::vector<TrialRecord>& records,
                            Eigen::Index window = 10);

/// Thin SVD A = U diag(s) V^T with the synergy sign convention applied to the
/// right modes (largest-magnitude entry positive; U follows).
struct SvdModes {
  MatrixXd left;
  VectorXd singular_values;
  MatrixXd right;  // m x min(n, m), columns are joint-space modes
};

SvdModes ComputeSvdModes(const MatrixXd& a);

/// Largest principal angle between the right singular subspaces of C_hat and
/// C (rank-revealing); pi/2 when C_hat has lower rank.
double ModeAngle(const MatrixXd& c_hat, const MatrixXd& c);

/// ModeAngle(W_hat Phi, C) at the end of each session, in session order.
std::vector<double> SessionModeAngles(const std::vector<TrialRecord>& records,
                                      const MappingMatrix& mapping);

/// Session-averaged value of a per-trial series (records supply sessions).
std::vector<double> SessionMeans(const MetricSeries& series,
                                 const std::vector<TrialRecord>& records);

/// CSV with header "k,value" preceded by a '#' provenance comment line.
void ExportSeries(const MetricSeries& series, const std::filesystem::path& path,
                  const std::string& comment = {});

MetricSeries ImportSeries(const std::filesystem::path& path);

}  // namespace bomi
