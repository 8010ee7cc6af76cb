#include <gtest/gtest.h>

#include <map>

#include "fixtures.hpp"
#include "xwalk/augment.hpp"
#include "xwalk/error.hpp"
#include "xwalk/features.hpp"

using namespace xwalk;

namespace {

PhaseTimeline timeline() {
  // Phase 2 green [1000 s, 1025 s), [1070 s, 1095 s), ...
  return build_phase_timeline(testkit::alternating_spat(1'000'000, 70.0, 25.0, 3), testkit::default_phase_map());
}

}  // namespace

TEST(Features, LayoutAndDimensions) {
  EXPECT_EQ(feature_dim(true), 16);
  EXPECT_EQ(feature_dim(false), 15);
  EXPECT_EQ(feature_names(true).size(), 16u);
  EXPECT_EQ(feature_names(false).back(), "speed");
  EXPECT_EQ(feature_names(true).back(), "subclass_flag");
}

TEST(Features, PhaseColumnsAndSpentTime) {
  const auto t = testkit::straight_walk(1, 60, 1.2, 6.0, 0.1, 1'013'000);
  const auto w = range_selection(t, 10).front();
  const SubClassResult wheel{SubClass::Wheelchair, LabelSource::Criterion4, 1.0};
  const auto f = build_features(w, timeline(), true, wheel);
  ASSERT_EQ(f.rows(), 10);
  ASSERT_EQ(f.cols(), 16);
  // First point: 13 s into a 25 s green, so 12 s left.
  EXPECT_EQ(f(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(f(0, 1), 12.0);
  EXPECT_EQ(f(0, 2), 1.0);
  EXPECT_DOUBLE_EQ(f(0, 3), 0.0);
  EXPECT_DOUBLE_EQ(f(0, 4), 6.0);
  // Area one-hot: the first point is outside every crossing.
  EXPECT_EQ(f.block(0, 5, 1, 5).sum(), 1.0);
  EXPECT_EQ(f(0, 9), 1.0);
  EXPECT_DOUBLE_EQ(f(0, 14), 1.2);
  EXPECT_EQ(f(0, 15), 0.0);  // wheelchair
  const auto normal = build_features(w, timeline(), true, {SubClass::Normal, LabelSource::Criterion2, 1.0});
  EXPECT_EQ(normal(0, 15), 1.0);
}

TEST(Features, AblationDropsFlagColumn) {
  const auto t = testkit::straight_walk(1, 60, 1.2, 6.0, 0.1, 1'013'000);
  const auto w = range_selection(t, 10).front();
  const auto with = build_features(w, timeline(), true, {SubClass::Normal, LabelSource::Criterion2, 1.0});
  const auto without = build_features(w, timeline(), false, {});
  ASSERT_EQ(without.cols(), 15);
  EXPECT_EQ(with.leftCols(15), without);
}

TEST(Features, UnlabeledFlagIsRejected) {
  const auto t = testkit::straight_walk(1, 60, 1.2, 6.0, 0.1, 1'013'000);
  const auto w = range_selection(t, 10).front();
  try {
    build_features(w, timeline(), true, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
  }
}

TEST(Features, OutsideTimelineIsGap) {
  const auto t = testkit::straight_walk(1, 60, 1.2, 6.0, 0.1, 10'000);
  const auto w = range_selection(t, 10).front();
  try {
    build_features(w, timeline(), false, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TimelineGap);
  }
}

TEST(Dataset, StepMajorFlattening) {
  const auto t = testkit::straight_walk(4, 60, 1.2, 6.0, 0.1, 1'013'000);
  const auto windows = range_selection(t, 5);
  std::map<std::int64_t, SubClassResult> labels{{4, {SubClass::Normal, LabelSource::Criterion2, 1.0}}};
  const auto d = build_dataset(windows, timeline(), true, labels);
  ASSERT_EQ(d.size(), windows.size());
  EXPECT_EQ(d.x.cols(), 5 * 16);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto f = build_features(windows[i], timeline(), true, labels.at(4));
    for (int s = 0; s < 5; ++s) {
      for (int k = 0; k < 16; ++k) EXPECT_EQ(d.x(static_cast<Eigen::Index>(i), s * 16 + k), f(s, k));
    }
    EXPECT_EQ(d.y[static_cast<Eigen::Index>(i)], windows[i].target_s);
    EXPECT_EQ(d.end_index[i], windows[i].window_end_index());
  }
  try {
    build_dataset(windows, timeline(), true, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
  }
}

TEST(Scaler, PooledStatistics) {
  const auto t = testkit::straight_walk(4, 60, 1.2, 6.0, 0.1, 1'013'000);
  const auto d = build_dataset(range_selection(t, 5), timeline(), false, {});
  const auto s = FeatureScaler::fit(d);
  ASSERT_EQ(s.dim(), 15);
  const auto z = s.transform_rows(d.x);
  for (int k = 0; k < 15; ++k) {
    double sum = 0.0, sq = 0.0;
    int n = 0;
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      for (int step = 0; step < 5; ++step) {
        const double v = z(r, step * 15 + k);
        sum += v;
        sq += v * v;
        ++n;
      }
    }
    EXPECT_NEAR(sum / n, 0.0, 1e-9) << k;
    const double var = sq / n;
    // Constant features map to exactly zero; the rest to unit variance.
    if (var > 1e-12) EXPECT_NEAR(var, 1.0, 1e-9) << k;
  }
  EXPECT_EQ(s.scale[3], 1.0);  // pos_x never changes
  Eigen::MatrixXd wrong(5, 3);
  EXPECT_THROW(s.transform_window(wrong), Error);
}
