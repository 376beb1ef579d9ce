#include "bomi/metrics.hpp"

#include <fstream>
#include <map>
#include <utility>

#include "bomi/csv.hpp"
#include "bomi/synergy.hpp"

namespace bomi {

const char* MetricName(MetricKind kind) {
  switch (kind) {
    case MetricKind::kRE: return "RE";
    case MetricKind::kFME: return "FME";
    case MetricKind::kModeAngle: return "mode_angle";
  }
  return "unknown";
}

MetricSeries ReachingError(const std::vector<TrialRecord>& records) {
  MetricSeries s;
  s.kind = MetricKind::kRE;
  s.values.resize(static_cast<Eigen::Index>(records.size()));
  s.index.resize(records.size());
  for (std::size_t k = 0; k < records.size(); ++k) {
    s.index[k] = static_cast<int>(k) + 1;
    s.values(static_cast<Eigen::Index>(k)) = records[k].final_error;
  }
  return s;
}

MetricSeries ForwardModelErrorSeries(const std::vector<TrialRecord>& records,
                                     const MatrixXd& w) {
  MetricSeries s;
  s.kind = MetricKind::kFME;
  s.values.resize(static_cast<Eigen::Index>(records.size()));
  s.index.resize(records.size());
  for (std::size_t k = 0; k < records.size(); ++k) {
    s.index[k] = static_cast<int>(k) + 1;
    s.values(static_cast<Eigen::Index>(k)) =
        ForwardModelError(records[k].w_hat_final, w);
  }
  return s;
}

MetricSeries GroupAndSmooth(const MetricSeries& series,
                            const std::vector<TrialRecord>& records,
                            Eigen::Index window) {
  if (records.empty() || series.size() == 0) {
    throw EmptyGroup("no trials to group");
  }
  if (series.size() != static_cast<Eigen::Index>(records.size())) {
    throw DimensionMismatch("series has " + std::to_string(series.size()) +
                            " values for " + std::to_string(records.size()) +
                            " records");
  }
  std::map<std::pair<int, int>, std::vector<double>> groups;
  for (std::size_t k = 0; k < records.size(); ++k) {
    groups[{records[k].start_label, records[k].target_idx}].push_back(
        series.values(static_cast<Eigen::Index>(k)));
  }
  std::size_t longest = 0;
  for (const auto& [key, members] : groups) longest = std::max(longest, members.size());

  VectorXd averaged(static_cast<Eigen::Index>(longest));
  for (std::size_t j = 0; j < longest; ++j) {
    double sum = 0;
    int count = 0;
    for (const auto& [key, members] : groups) {
      if (j < members.size()) {
        sum += members[j];
        ++count;
      }
    }
    averaged(static_cast<Eigen::Index>(j)) = sum / count;
  }

  MetricSeries out;
  out.kind = series.kind;
  out.values = MovingAverage(averaged, window);
  out.index.resize(longest);
  for (std::size_t j = 0; j < longest; ++j) out.index[j] = static_cast<int>(j) + 1;
  out.smoothing = "group(start,target)+trailing_mean(" + std::to_string(window) + ")";
  return out;
}

SvdModes ComputeSvdModes(const MatrixXd& a) {
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdModes modes;
  modes.left = svd.matrixU();
  modes.singular_values = svd.singularValues();
  modes.right = svd.matrixV();
  for (Eigen::Index j = 0; j < modes.right.cols(); ++j) {
    Eigen::Index arg = 0;
    modes.right.col(j).cwiseAbs().maxCoeff(&arg);
    if (modes.right(arg, j) < 0) {
      modes.right.col(j) *= -1.0;
      modes.left.col(j) *= -1.0;
    }
  }
  return modes;
}

double ModeAngle(const MatrixXd& c_hat, const MatrixXd& c) {
  return SubspaceAngle(c_hat, c);
}

std::vector<double> SessionModeAngles(const std::vector<TrialRecord>& records,
                                      const MappingMatrix& mapping) {
  std::map<int, const TrialRecord*> last;
  for (const TrialRecord& rec : records) last[rec.session_idx] = &rec;
  std::vector<double> out;
  for (const auto& [session, rec] : last) {
    out.push_back(ModeAngle(rec->w_hat_final * mapping.basis.phi, mapping.c));
  }
  return out;
}

std::vector<double> SessionMeans(const MetricSeries& series,
                                 const std::vector<TrialRecord>& records) {
  if (series.size() != static_cast<Eigen::Index>(records.size())) {
    throw DimensionMismatch("series and records differ in length");
  }
  std::map<int, std::pair<double, int>> acc;
  for (std::size_t k = 0; k < records.size(); ++k) {
    auto& [sum, count] = acc[records[k].session_idx];
    sum += series.values(static_cast<Eigen::Index>(k));
    ++count;
  }
  std::vector<double> out;
  for (const auto& [session, sc] : acc) out.push_back(sc.first / sc.second);
  return out;
}

void ExportSeries(const MetricSeries& series, const std::filesystem::path& path,
                  const std::string& comment) {
  auto out = csv::OpenForWrite(path);
  out << "# metric=" << MetricName(series.kind) << " smoothing=" << series.smoothing;
  if (!comment.empty()) out << ' ' << comment;
  out << "\nk,value\n";
  for (Eigen::Index i = 0; i < series.size(); ++i) {
    csv::WriteRow(out, {static_cast<double>(series.index[static_cast<std::size_t>(i)]),
                        series.values(i)});
  }
}

MetricSeries ImportSeries(const std::filesystem::path& path) {
  const csv::Table table = csv::Read(path);
  if (!table.rows.empty() && table.rows.front().size() != 2) {
    throw SchemaVersionMismatch(path.string() + ": expected columns k,value");
  }
  MetricSeries s;
  s.values.resize(static_cast<Eigen::Index>(table.rows.size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    s.index.push_back(static_cast<int>(table.rows[i][0]));
    s.values(static_cast<Eigen::Index>(i)) = table.rows[i][1];
  }
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  if (first.rfind("# metric=FME", 0) == 0) s.kind = MetricKind::kFME;
  if (first.rfind("# metric=mode_angle", 0) == 0) s.kind = MetricKind::kModeAngle;
  return s;
}

}  // namespace bomi
