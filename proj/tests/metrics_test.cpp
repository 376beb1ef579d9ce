#include <cmath>

#include <gtest/gtest.h>

#include "bomi/errors.hpp"
#include "bomi/metrics.hpp"
#include "support.hpp"

namespace bomi {
namespace {

TrialRecord Record(int session, int start, int target, double error) {
  TrialRecord r;
  r.session_idx = session;
  r.start_label = start;
  r.target_idx = target;
  r.final_error = error;
  return r;
}

TEST(ReachingError, EuclideanDistanceAtEnd) {
  TrialRecord r;
  r.target = (VectorXd(2) << 4, 5).finished();
  TrajectorySample s;
  s.x = (VectorXd(2) << 1, 1).finished();
  r.samples.push_back(s);
  r.final_error = (s.x - r.target).norm();
  TrialRecord on = r;
  on.final_error = 0;
  const MetricSeries re = ReachingError({r, on});
  EXPECT_EQ(re.kind, MetricKind::kRE);
  EXPECT_DOUBLE_EQ(re.values(0), 5.0);
  EXPECT_EQ(re.values(1), 0.0);
  EXPECT_EQ(re.index, (std::vector<int>{1, 2}));
}

TEST(ForwardModelError, ReferenceValues) {
  RandomStream rng(1);
  const MatrixXd w = test::RandomMatrix(2, 4, rng);
  EXPECT_EQ(ForwardModelError(w, w), 0.0);
  EXPECT_DOUBLE_EQ(ForwardModelError(MatrixXd::Zero(2, 4), w), 1.0);
  EXPECT_DOUBLE_EQ(ForwardModelError(MatrixXd(2 * w), w), 1.0);
  EXPECT_THROW(ForwardModelError(w, MatrixXd::Zero(2, 4)), ZeroTrueMapping);
}

// The C-form and W-form of FME agree when Phi has orthonormal rows.
TEST(ForwardModelError, MappingFormEqualsWeightForm) {
  RandomStream rng(2);
  const MatrixXd phi = test::OrthonormalRows(4, 19, rng);
  const MatrixXd w = test::RandomMatrix(2, 4, rng);
  for (int i = 0; i < 100; ++i) {
    const MatrixXd w_hat = test::RandomMatrix(2, 4, rng);
    const double direct = (w * phi - w_hat * phi).norm();
    EXPECT_NEAR(direct, (w - w_hat).norm(), 1e-10);
    EXPECT_NEAR(ForwardModelError(MatrixXd(w_hat * phi), MatrixXd(w * phi)),
                ForwardModelError(w_hat, w), 1e-10);
  }
}

TEST(ForwardModelError, InvariantUnderSynergyRotation) {
  RandomStream rng(3);
  for (int i = 0; i < 20; ++i) {
    const MatrixXd rot = test::OrthonormalRows(4, 4, rng);
    const MatrixXd w = test::RandomMatrix(2, 4, rng), w_hat = test::RandomMatrix(2, 4, rng);
    EXPECT_NEAR(ForwardModelError(MatrixXd(w_hat * rot), MatrixXd(w * rot)),
                ForwardModelError(w_hat, w), 1e-12);
  }
}

TEST(MovingAverage, ConstantAndImpulse) {
  const VectorXd constant = VectorXd::Constant(25, 1.7);
  EXPECT_LT((MovingAverage(constant, 10) - constant).cwiseAbs().maxCoeff(), 1e-15);

  VectorXd impulse = VectorXd::Zero(40);
  impulse(15) = 1;
  const VectorXd smoothed = MovingAverage(impulse, 10);
  // Direct convolution with a trailing box of width 10.
  for (Eigen::Index i = 0; i < 40; ++i) {
    double want = 0;
    const Eigen::Index width = std::min<Eigen::Index>(i + 1, 10);
    for (Eigen::Index j = i - width + 1; j <= i; ++j) want += impulse(j) / width;
    EXPECT_NEAR(smoothed(i), want, 1e-15);
  }
  EXPECT_DOUBLE_EQ(smoothed.maxCoeff(), 0.1);
  EXPECT_THROW(MovingAverage(impulse, 0), InvalidConfig);
}

TEST(MovingAverage, HeadUsesShortWindows) {
  const VectorXd v = (VectorXd(4) << 1, 3, 5, 7).finished();
  const VectorXd s = MovingAverage(v, 3);
  EXPECT_DOUBLE_EQ(s(0), 1);
  EXPECT_DOUBLE_EQ(s(1), 2);
  EXPECT_DOUBLE_EQ(s(2), 3);
  EXPECT_DOUBLE_EQ(s(3), 5);
}

class SmoothingBounds : public ::testing::TestWithParam<int> {};

TEST_P(SmoothingBounds, StaysWithinRange) {
  RandomStream rng(GetParam());
  const VectorXd v = rng.Normal(120);
  for (Eigen::Index window : {1, 3, 10, 50}) {
    const VectorXd s = MovingAverage(v, window);
    ASSERT_EQ(s.size(), v.size());
    EXPECT_LE(s.maxCoeff(), v.maxCoeff() + 1e-15);
    EXPECT_GE(s.minCoeff(), v.minCoeff() - 1e-15);
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, SmoothingBounds, ::testing::Range(1, 9));

TEST(GroupAndSmooth, ConstantSeriesUnchanged) {
  std::vector<TrialRecord> recs;
  for (int i = 0; i < 30; ++i) recs.push_back(Record(1 + i / 10, i % 3, (i + 1) % 3, 0.4));
  const MetricSeries out = GroupAndSmooth(ReachingError(recs), recs, 10);
  ASSERT_GT(out.size(), 0);
  EXPECT_LT((out.values.array() - 0.4).abs().maxCoeff(), 1e-15);
  EXPECT_EQ(out.smoothing, "group(start,target)+trailing_mean(10)");
}

TEST(GroupAndSmooth, AveragesAcrossGroups) {
  std::vector<TrialRecord> recs;
  for (int i = 0; i < 12; ++i) {
    recs.push_back(i % 2 ? Record(1, 0, 1, 4.0) : Record(1, 1, 0, 2.0));
  }
  const MetricSeries out = GroupAndSmooth(ReachingError(recs), recs, 1);
  ASSERT_EQ(out.size(), 6);
  for (Eigen::Index j = 0; j < out.size(); ++j) EXPECT_DOUBLE_EQ(out.values(j), 3.0);
  EXPECT_EQ(out.index.front(), 1);
  EXPECT_EQ(out.index.back(), 6);
}

TEST(GroupAndSmooth, LengthIsLongestGroup) {
  std::vector<TrialRecord> recs;
  for (int i = 0; i < 7; ++i) recs.push_back(Record(1, 0, 1, i));
  for (int i = 0; i < 3; ++i) recs.push_back(Record(1, 1, 2, 10));
  const MetricSeries out = GroupAndSmooth(ReachingError(recs), recs, 1);
  ASSERT_EQ(out.size(), 7);
  EXPECT_DOUBLE_EQ(out.values(0), 5.0);   // (0 + 10) / 2
  EXPECT_DOUBLE_EQ(out.values(6), 6.0);   // only the long group remains
}

TEST(GroupAndSmooth, Errors) {
  EXPECT_THROW(GroupAndSmooth(MetricSeries{}, {}, 10), EmptyGroup);
  std::vector<TrialRecord> recs = {Record(1, 0, 1, 1.0)};
  MetricSeries two;
  two.values = VectorXd::Ones(2);
  two.index = {1, 2};
  EXPECT_THROW(GroupAndSmooth(two, recs, 10), DimensionMismatch);
}

TEST(SvdModes, DiagonalInput) {
  MatrixXd a = MatrixXd::Zero(2, 5);
  a(0, 0) = 3;
  a(1, 1) = 1;
  const SvdModes m = ComputeSvdModes(a);
  EXPECT_NEAR(m.singular_values(0), 3, 1e-15);
  EXPECT_NEAR(m.singular_values(1), 1, 1e-15);
  EXPECT_LT((m.right.col(0) - VectorXd::Unit(5, 0)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((m.right.col(1) - VectorXd::Unit(5, 1)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(SvdModes, ReconstructionAndSignConvention) {
  RandomStream rng(4);
  for (int i = 0; i < 20; ++i) {
    const MatrixXd a = test::RandomMatrix(2, 19, rng);
    const SvdModes m = ComputeSvdModes(a);
    const MatrixXd back = m.left * m.singular_values.asDiagonal() * m.right.transpose();
    EXPECT_LT((back - a).cwiseAbs().maxCoeff(), 1e-10);
    for (Eigen::Index j = 0; j < m.right.cols(); ++j) {
      Eigen::Index arg;
      m.right.col(j).cwiseAbs().maxCoeff(&arg);
      EXPECT_GT(m.right(arg, j), 0);
    }
    const SvdModes again = ComputeSvdModes(MatrixXd(a));
    EXPECT_EQ(again.right, m.right);
  }
}

TEST(ModeAngle, ZeroForSameMatrixAndPositiveOtherwise) {
  const ModelSetup setup = MakeSetup();
  const MatrixXd& c = setup.mapping.c;
  EXPECT_LT(ModeAngle(c, c), 1e-7);
  EXPECT_LT(ModeAngle(MatrixXd(3 * c), c), 1e-7);
  MatrixXd other = c;
  other.row(1) = setup.mapping.basis.phi.row(2);
  EXPECT_NEAR(ModeAngle(other, c), M_PI / 2, 1e-7);
}

TEST(SessionMeans, AveragesPerSession) {
  std::vector<TrialRecord> recs = {Record(1, 0, 1, 1), Record(1, 1, 0, 3), Record(2, 0, 1, 5)};
  const auto means = SessionMeans(ReachingError(recs), recs);
  EXPECT_EQ(means, (std::vector<double>{2, 5}));
}

TEST(SeriesFile, RoundTrip) {
  test::TempDir dir("series");
  MetricSeries s;
  s.kind = MetricKind::kFME;
  s.index = {1, 2, 3};
  s.values = (VectorXd(3) << 1.0, 0.1 + 0.2, 1e-300).finished();
  s.smoothing = "none";
  ExportSeries(s, dir / "fme.csv", "seed=3");
  const MetricSeries back = ImportSeries(dir / "fme.csv");
  EXPECT_EQ(back.kind, MetricKind::kFME);
  EXPECT_EQ(back.index, s.index);
  EXPECT_EQ(back.values, s.values);
}

}  // namespace
}  // namespace bomi
