#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "xwalk/augment.hpp"
#include "xwalk/error.hpp"

using namespace xwalk;

namespace {

/// Walk through crossing 1 with `before` outside points, then `inside`
/// crossing points, then `after` outside points.
Trajectory shaped(std::int64_t id, std::size_t before, std::size_t inside, std::size_t after) {
  std::vector<TrackRecord> recs;
  std::int64_t t = 1'000'000;
  auto push = [&](double y) {
    recs.push_back(testkit::pedestrian_record(t, id, 0.0, y, 0.0, 1.0));
    t += 100;
  };
  for (std::size_t i = 0; i < before; ++i) push(7.0);
  for (std::size_t i = 0; i < inside; ++i) push(9.0);
  for (std::size_t i = 0; i < after; ++i) push(13.0);
  return assign_areas(group_by_id(recs).front(), testkit::default_areas());
}

/// Every start s for which points s..s+W-1 all lie at or before the exit.
std::vector<std::size_t> brute_force_starts(const Trajectory& t, std::size_t w) {
  std::vector<std::size_t> starts;
  const auto exit = t.exit_index();
  if (!exit) return starts;
  for (std::size_t s = 0; s < t.size(); ++s) {
    bool ok = true;
    for (std::size_t k = 0; k < w; ++k) ok = ok && s + k <= *exit;
    if (ok) starts.push_back(s);
  }
  return starts;
}

}  // namespace

TEST(RangeSelection, CountExamples) {
  EXPECT_EQ(range_selection(shaped(1, 0, 12, 0), 5).size(), 8u);
  EXPECT_EQ(range_selection(shaped(1, 0, 5, 0), 10).size(), 0u);
}

TEST(RangeSelection, PointsAfterExitAreExcluded) {
  const auto t = shaped(1, 3, 6, 4);
  const auto w = range_selection(t, 3);
  // Prefix up to the exit has 9 points.
  EXPECT_EQ(w.size(), 7u);
  EXPECT_EQ(w.back().window_end_index(), *t.exit_index());
  EXPECT_EQ(w.back().target_s, 0.0);
}

TEST(RangeSelection, MatchesBruteForceEnumerator) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<std::size_t> len(0, 40), win(2, 45), side(0, 5);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t inside = std::max<std::size_t>(1, len(rng));
    const auto t = shaped(trial, side(rng), inside, side(rng));
    const std::size_t w = win(rng);
    const auto windows = range_selection(t, w);
    const auto starts = brute_force_starts(t, w);
    ASSERT_EQ(windows.size(), starts.size()) << "trial " << trial;
    for (std::size_t i = 0; i < windows.size(); ++i) {
      ASSERT_EQ(windows[i].window_start_index, starts[i]);
      ASSERT_EQ(windows[i].points.size(), w);
      for (std::size_t k = 0; k < w; ++k) {
        ASSERT_EQ(windows[i].points[k].record, t.points[starts[i] + k].record);
      }
    }
  }
}

TEST(RangeSelection, TargetsDecreaseByFrameGap) {
  const auto t = shaped(5, 2, 20, 3);
  const auto w = range_selection(t, 4);
  for (std::size_t i = 1; i < w.size(); ++i) {
    const double gap = (t.points[w[i].window_end_index()].t_s() - t.points[w[i - 1].window_end_index()].t_s());
    EXPECT_NEAR(w[i - 1].target_s - w[i].target_s, gap, 1e-9);
    EXPECT_LE(w[i].target_s, w[i - 1].target_s);
  }
}

TEST(RangeSelection, WindowTooSmallIsRejected) {
  EXPECT_THROW(range_selection(shaped(1, 0, 12, 0), 1), Error);
}

TEST(ArrivalTarget, Subtraction) {
  // Points every 0.1 s; index 20 is t = 2.0 s, exit at index 145 (14.5 s).
  const auto t = shaped(1, 0, 146, 5);
  EXPECT_NEAR(compute_arrival_target(t, 20), 12.5, 1e-12);
  EXPECT_EQ(compute_arrival_target(t, 145), 0.0);
  try {
    compute_arrival_target(t, 146);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
  }
}

TEST(ArrivalTarget, NoCrossingExit) {
  std::vector<TrackRecord> recs;
  for (int i = 0; i < 5; ++i) recs.push_back(testkit::pedestrian_record(i * 100, 1, 30, 30, 1, 0));
  const auto t = assign_areas(group_by_id(recs).front(), testkit::default_areas());
  try {
    compute_arrival_target(t, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoCrossingExit);
  }
  EXPECT_THROW(range_selection(t, 3), Error);
}

TEST(ArrivalTarget, ConstantSpeedMatchesAnalyticTime) {
  // 1.25 m/s from y = 6: crossing 1 spans y in [8, 12], so the far edge is
  // reached 6 / 1.25 = 4.8 s after the start.
  const auto t = testkit::straight_walk(1, 80, 1.25);
  EXPECT_NEAR(compute_arrival_target(t, 0), 4.8, 0.1 + 1e-9);
  EXPECT_NEAR(compute_arrival_target(t, 20), 2.8, 0.1 + 1e-9);
}

TEST(RandomSelection, Examples) {
  const auto w = range_selection(shaped(1, 0, 7, 0), 5);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(random_selection(w, 1, 4).size(), 1u);
  const auto all = random_selection(w, 3, 4);
  std::multiset<std::size_t> a, b;
  for (const auto& x : w) a.insert(x.window_start_index);
  for (const auto& x : all) b.insert(x.window_start_index);
  EXPECT_EQ(a, b);
  try {
    random_selection(w, 4, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SampleTooLarge);
  }
}

TEST(RandomSelection, SeededAndWithoutReplacement) {
  const auto w = range_selection(shaped(1, 0, 60, 0), 5);
  const auto a = random_selection(w, 20, 123), b = random_selection(w, 20, 123);
  ASSERT_EQ(a.size(), 20u);
  std::set<std::size_t> starts;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].window_start_index, b[i].window_start_index);
    starts.insert(a[i].window_start_index);
  }
  EXPECT_EQ(starts.size(), 20u);
}

TEST(RandomSelection, RoughlyUniform) {
  const auto w = range_selection(shaped(1, 0, 14, 0), 5);  // 10 windows
  std::vector<int> hits(10, 0);
  for (std::uint64_t seed = 0; seed < 5000; ++seed) {
    for (const auto& x : random_selection(w, 3, seed)) ++hits[x.window_start_index];
  }
  for (int h : hits) EXPECT_NEAR(h, 1500, 200);
}

TEST(Split, TrajectoryLevelPartition) {
  std::vector<std::int64_t> ids;
  for (int i = 0; i < 96; ++i) ids.push_back(1000 + i);
  const auto s = split_trajectories(ids, 73.0 / 96.0, 0.1, 7);
  EXPECT_EQ(s.train.size() + s.validation.size(), 73u);
  EXPECT_EQ(s.test.size(), 23u);
  std::set<std::int64_t> all;
  for (const auto* side : {&s.train, &s.validation, &s.test}) {
    for (auto id : *side) EXPECT_TRUE(all.insert(id).second) << id;
  }
  EXPECT_EQ(all.size(), 96u);
  const auto again = split_trajectories(ids, 73.0 / 96.0, 0.1, 7);
  EXPECT_EQ(again.test, s.test);
}

TEST(WindowsCsv, RoundTrip) {
  const auto t = shaped(31, 2, 15, 2);
  const auto w = range_selection(t, 6);
  const auto text = format_windows_csv(w);
  const auto back = parse_windows_csv(text);
  ASSERT_EQ(back.size(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_EQ(back[i].agent_id, w[i].agent_id);
    EXPECT_EQ(back[i].window_start_index, w[i].window_start_index);
    EXPECT_EQ(back[i].target_s, w[i].target_s);
    EXPECT_EQ(back[i].governing_area, w[i].governing_area);
    for (std::size_t k = 0; k < w[i].points.size(); ++k) {
      EXPECT_EQ(back[i].points[k].record, w[i].points[k].record);
      EXPECT_EQ(back[i].points[k].spent_time_s, w[i].points[k].spent_time_s);
      EXPECT_EQ(back[i].points[k].area, w[i].points[k].area);
    }
  }
  EXPECT_EQ(format_windows_csv(back), text);
}
