#include "bomi/synergy.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "bomi/csv.hpp"
#include "bomi/errors.hpp"

namespace bomi {
namespace {

// Flip each row so that its largest-magnitude entry is positive.
void CanonicalizeRowSigns(MatrixXd& rows) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    Eigen::Index arg = 0;
    rows.row(i).cwiseAbs().maxCoeff(&arg);
    if (rows(i, arg) < 0) rows.row(i) *= -1.0;
  }
}

std::string HashMatrix(const MatrixXd& m) {
  std::uint64_t h = Fnv1a(std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      h = Fnv1a(csv::FormatDouble(m(i, j)), h);
    }
  }
  return HexDigest(h);
}

}  // namespace

void PostureDataset::Validate() const {
  if (samples.cols() < 1) throw InvalidConfig("posture data has no joints");
  if (samples.rows() < samples.cols() + 1) {
    throw DegenerateData("posture data needs at least m+1 = " +
                         std::to_string(samples.cols() + 1) + " samples, got " +
                         std::to_string(samples.rows()));
  }
  if (!samples.allFinite()) throw DegenerateData("non-finite joint angle");
  if (!(rate_hz > 0)) throw InvalidConfig("sampling rate must be positive");
}

SynergyBasis BuildSynergyBasis(const PostureDataset& data, Eigen::Index h) {
  if (h < 1 || h > data.joints()) {
    throw DimensionMismatch("synergy count h=" + std::to_string(h) +
                            " must lie in [1, m=" +
                            std::to_string(data.joints()) + "]");
  }
  data.Validate();

  const MatrixXd centered =
      data.samples.rowwise() - data.samples.colwise().mean();
  Eigen::JacobiSVD<MatrixXd> svd(centered, Eigen::ComputeThinV);
  const VectorXd& sv = svd.singularValues();

  const double tol = static_cast<double>(std::max(centered.rows(),
                                                  centered.cols())) *
                     std::numeric_limits<double>::epsilon() *
                     (sv.size() ? sv(0) : 0.0);
  Eigen::Index nonzero = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) nonzero += sv(i) > tol;
  if (nonzero < h) {
    throw DegenerateData("covariance has " + std::to_string(nonzero) +
                         " nonzero eigenvalues, fewer than h=" +
                         std::to_string(h));
  }

  SynergyBasis basis;
  basis.phi = svd.matrixV().leftCols(h).transpose();
  CanonicalizeRowSigns(basis.phi);
  const VectorXd variance = sv.array().square();
  basis.explained_variance = variance.head(h) / variance.sum();
  basis.source_hash = HashMatrix(data.samples);
  return basis;
}

MappingMatrix BuildMapping(const SynergyBasis& basis,
                           const MappingOptions& options) {
  const Eigen::Index h = basis.synergies();
  const Eigen::Index n = options.outputs;
  if (n < 1 || n > h) {
    throw DimensionMismatch("mapping needs 1 <= n <= h, got n=" +
                            std::to_string(n) + ", h=" + std::to_string(h));
  }
  MappingMatrix map;
  map.basis = basis;
  switch (options.scheme) {
    case MappingScheme::kLeadingComponents:
      map.w = MatrixXd::Zero(n, h);
      map.w.leftCols(n) = options.scale * MatrixXd::Identity(n, n);
      break;
    case MappingScheme::kRandomized: {
      RandomStream rng(options.seed);
      map.w.resize(n, h);
      for (Eigen::Index i = 0; i < n; ++i) {
        map.w.row(i) = rng.Normal(h).transpose();
        map.w.row(i).normalize();
      }
      map.w *= options.scale;
      break;
    }
  }
  map.c = map.w * basis.phi;

  Eigen::ColPivHouseholderQR<MatrixXd> qr(map.c);
  if (qr.rank() < n) {
    throw RankDeficient("mapping matrix has rank " +
                        std::to_string(qr.rank()) + " < n=" +
                        std::to_string(n));
  }
  return map;
}

VectorXd LatentStd(Eigen::Index latent_dim) {
  VectorXd s(latent_dim);
  for (Eigen::Index j = 0; j < latent_dim; ++j) s(j) = 0.3 * std::pow(0.7, j);
  return s;
}

PostureDataset SynthesizePostureData(const PostureModel& model) {
  if (model.joints < 1 || model.latent_dim < 1 ||
      model.latent_dim > model.joints) {
    throw InvalidConfig("latent_dim must lie in [1, m]");
  }
  if (model.samples <= model.joints) {
    throw InvalidConfig("n_samples must exceed m");
  }
  if (!(model.noise_floor >= 0)) throw InvalidConfig("noise floor must be >= 0");

  RandomStream rng(model.seed);
  MatrixXd gauss(model.joints, model.latent_dim);
  for (Eigen::Index j = 0; j < model.latent_dim; ++j) {
    gauss.col(j) = rng.Normal(model.joints);
  }
  const MatrixXd loadings =
      Eigen::HouseholderQR<MatrixXd>(gauss).householderQ() *
      MatrixXd::Identity(model.joints, model.latent_dim);
  const VectorXd latent_std = LatentStd(model.latent_dim);
  const MatrixXd mix = loadings * latent_std.asDiagonal();

  PostureDataset data;
  data.rate_hz = model.rate_hz;
  data.samples.resize(model.samples, model.joints);
  const VectorXd mean = VectorXd::Constant(model.joints, 0.5);
  for (Eigen::Index i = 0; i < model.samples; ++i) {
    const VectorXd z = rng.Normal(model.latent_dim);
    const VectorXd e = rng.Normal(model.joints);
    data.samples.row(i) = (mean + mix * z + model.noise_floor * e).transpose();
  }
  return data;
}

VectorXd PopulationSpectrum(const PostureModel& model) {
  VectorXd spectrum =
      VectorXd::Constant(model.joints, model.noise_floor * model.noise_floor);
  spectrum.head(model.latent_dim).array() +=
      LatentStd(model.latent_dim).array().square();
  return spectrum;
}

PostureDataset LoadPostureCsv(const std::filesystem::path& path,
                              double rate_hz) {
  const csv::Table table = csv::Read(path);
  if (table.rows.empty()) throw DegenerateData(path.string() + ": no samples");
  PostureDataset data;
  data.rate_hz = rate_hz;
  data.samples.resize(static_cast<Eigen::Index>(table.rows.size()),
                      static_cast<Eigen::Index>(table.rows.front().size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    for (std::size_t j = 0; j < table.rows[i].size(); ++j) {
      data.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          table.rows[i][j];
    }
  }
  data.Validate();
  return data;
}

void ExportSynergyBasis(const SynergyBasis& basis,
                        const std::filesystem::path& stem) {
  {
    auto out = csv::OpenForWrite(stem.string() + ".csv");
    for (Eigen::Index i = 0; i < basis.phi.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(basis.phi.cols()));
      for (Eigen::Index j = 0; j < basis.phi.cols(); ++j) row[j] = basis.phi(i, j);
      csv::WriteRow(out, row);
    }
  }
  nlohmann::ordered_json meta;
  meta["h"] = basis.synergies();
  meta["m"] = basis.joints();
  meta["explained_variance"] = std::vector<double>(
      basis.explained_variance.data(),
      basis.explained_variance.data() + basis.explained_variance.size());
  meta["source_hash"] = basis.source_hash;
  auto out = csv::OpenForWrite(stem.string() + ".json");
  out << meta.dump(2) << '\n';
}

double SubspaceAngle(const MatrixXd& a, const MatrixXd& b) {
  if (a.cols() != b.cols()) throw DimensionMismatch("subspace ambient dims");
  auto orthonormal_rows = [](const MatrixXd& m) -> MatrixXd {
    Eigen::JacobiSVD<MatrixXd> svd(m, Eigen::ComputeThinV);
    const VectorXd& sv = svd.singularValues();
    Eigen::Index rank = 0;
    const double tol = 1e-12 * (sv.size() ? sv(0) : 0.0);
    for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv(i) > tol;
    return svd.matrixV().leftCols(rank);
  };
  const MatrixXd qa = orthonormal_rows(a);
  const MatrixXd qb = orthonormal_rows(b);
  if (qa.cols() == 0 || qb.cols() == 0) return M_PI / 2;
  if (qa.cols() != qb.cols()) return M_PI / 2;
  Eigen::JacobiSVD<MatrixXd> cosines(qa.transpose() * qb);
  const double smallest = cosines.singularValues().minCoeff();
  return std::acos(std::clamp(smallest, -1.0, 1.0));
}

}  // namespace bomi
