#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "bomi/types.hpp"

namespace bomi {

/// Hand-posture samples, one row per sample, one column per joint (radians).
struct PostureDataset {
  MatrixXd samples;
  double rate_hz = 100.0;

  Eigen::Index joints() const { return samples.cols(); }
  Eigen::Index size() const { return samples.rows(); }

  /// Throws DegenerateData / InvalidConfig when the invariants do not hold.
  void Validate() const;
};

/// Orthonormal synergy rows (h x m) ordered by decreasing explained variance.
struct SynergyBasis {
  MatrixXd phi;
  VectorXd explained_variance;
  std::string source_hash;

  Eigen::Index synergies() const { return phi.rows(); }
  Eigen::Index joints() const { return phi.cols(); }
};

/// The BoMI map C = W * Phi.
struct MappingMatrix {
  MatrixXd c;
  MatrixXd w;
  SynergyBasis basis;

  Eigen::Index outputs() const { return c.rows(); }
};

enum class MappingScheme {
  /// W = scale * [I_n | 0]; C's rows are the leading principal components.
  kLeadingComponents,
  /// W has i.i.d. normal entries, each row normalized to unit length.
  kRandomized,
};

struct MappingOptions {
  MappingScheme scheme = MappingScheme::kLeadingComponents;
  Eigen::Index outputs = 2;
  double scale = 1.0;
  std::uint64_t seed = 0;
};

struct PostureModel {
  Eigen::Index joints = 19;
  Eigen::Index latent_dim = 4;
  Eigen::Index samples = 5000;
  std::uint64_t seed = 7;
  /// Isotropic noise standard deviation (radians).
  double noise_floor = 1e-3;
  double rate_hz = 100.0;
};

/// PCA through the SVD of the mean-centered sample matrix. Each direction is
/// signed so that its largest-magnitude entry is positive.
SynergyBasis BuildSynergyBasis(const PostureDataset& data, Eigen::Index h);

MappingMatrix BuildMapping(const SynergyBasis& basis,
                           const MappingOptions& options = {});

/// Factor-model posture generator:
///   q = q_mean + L * diag(latent_std) * z + noise_floor * e,  z, e ~ N(0, I)
/// where L (m x latent_dim) has orthonormal columns drawn from the seed and
/// latent_std decays geometrically from 0.3 rad by a factor 0.7.
PostureDataset SynthesizePostureData(const PostureModel& model);

/// Per-component standard deviations used by SynthesizePostureData.
VectorXd LatentStd(Eigen::Index latent_dim);

/// Eigenvalues of the generator's population covariance, descending.
VectorXd PopulationSpectrum(const PostureModel& model);

PostureDataset LoadPostureCsv(const std::filesystem::path& path,
                              double rate_hz);

/// Writes `<stem>.csv` (h rows x m columns) and `<stem>.json` metadata.
void ExportSynergyBasis(const SynergyBasis& basis,
                        const std::filesystem::path& stem);

/// Largest principal angle (radians) between the row spaces of a and b.
double SubspaceAngle(const MatrixXd& a, const MatrixXd& b);

}  // namespace bomi
