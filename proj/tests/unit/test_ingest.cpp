#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include <Eigen/LU>

#include "fixtures.hpp"
#include "xwalk/csv.hpp"
#include "xwalk/error.hpp"
#include "xwalk/ingest.hpp"

using namespace xwalk;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no xwalk::Error thrown";
  return ErrorKind::Io;
}

}  // namespace

TEST(TrackParse, SingleRowMapsFields) {
  const auto r = parse_track_text("1633719576000,354573,2,0.97,12.1,-3.4,0.6,0.5,1.7,1.2,1.1,0.3,1\n");
  ASSERT_EQ(r.records.size(), 1u);
  const auto& rec = r.records[0];
  EXPECT_EQ(rec.timestamp_ms, 1633719576000);
  EXPECT_EQ(rec.agent_id, 354573);
  EXPECT_EQ(rec.label, AgentLabel::Pedestrian);
  EXPECT_DOUBLE_EQ(rec.confidence, 0.97);
  EXPECT_DOUBLE_EQ(rec.pos_x, 12.1);
  EXPECT_DOUBLE_EQ(rec.pos_y, -3.4);
  EXPECT_DOUBLE_EQ(rec.box_length, 0.6);
  EXPECT_DOUBLE_EQ(rec.box_width, 0.5);
  EXPECT_DOUBLE_EQ(rec.box_height, 1.7);
  EXPECT_DOUBLE_EQ(rec.yaw, 1.2);
  EXPECT_DOUBLE_EQ(rec.speed(), std::hypot(1.1, 0.3));
  EXPECT_EQ(rec.tracking_status, 1);
  EXPECT_FALSE(r.report.had_header);
}

TEST(TrackParse, EmptyInput) {
  const auto r = parse_track_text("");
  EXPECT_TRUE(r.records.empty());
  EXPECT_TRUE(r.report.malformed.empty());
  EXPECT_EQ(r.report.data_rows, 0u);
}

TEST(TrackParse, HeaderAutoDetectedAndReordered) {
  const std::string text =
      "id,timestamp_ms,label,confidence,pos_x,pos_y,box_length,box_width,box_height,yaw,vel_x,vel_y,tracking_status\n"
      "7,1000,2,0.5,1,2,0.8,0.5,1.7,0,1,0,3\n";
  const auto r = parse_track_text(text);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_TRUE(r.report.had_header);
  EXPECT_EQ(r.records[0].agent_id, 7);
  EXPECT_EQ(r.records[0].timestamp_ms, 1000);
}

TEST(TrackParse, WrongColumnCountIsSchemaMismatch) {
  EXPECT_EQ(kind_of([] { parse_track_text("1,2,3\n"); }), ErrorKind::SchemaMismatch);
}

TEST(TrackParse, InvalidValuesAreSkippedAndReported) {
  const std::string text =
      "1000,1,2,0.9,0,0,0.8,0.5,1.7,0,1,0,0\n"
      "1100,1,9,0.9,0,0,0.8,0.5,1.7,0,1,0,0\n"
      "1200,1,2,1.5,0,0,0.8,0.5,1.7,0,1,0,0\n"
      "1300,1,2,0.9,0,0,-1,0.5,1.7,0,1,0,0\n"
      "1400,1,2,0.9,nan,0,0.8,0.5,1.7,0,1,0,0\n";
  const auto r = parse_track_text(text);
  EXPECT_EQ(r.records.size(), 1u);
  ASSERT_EQ(r.report.malformed.size(), 4u);
  EXPECT_EQ(r.report.malformed[0].line, 2u);
}

TEST(TrackParse, OutOfOrderRowsAreStablySorted) {
  const std::string text =
      "2000,1,2,0.9,0,0,0.8,0.5,1.7,0,1,0,0\n"
      "1000,2,2,0.9,0,0,0.8,0.5,1.7,0,1,0,0\n"
      "1000,3,2,0.9,0,0,0.8,0.5,1.7,0,1,0,0\n";
  const auto r = parse_track_text(text);
  ASSERT_EQ(r.records.size(), 3u);
  EXPECT_TRUE(r.report.non_monotonic_timestamps);
  EXPECT_EQ(r.records[0].agent_id, 2);
  EXPECT_EQ(r.records[1].agent_id, 3);
  EXPECT_EQ(r.records[2].agent_id, 1);
}

TEST(TrackParse, RoundTripIsBitExact) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  std::uniform_real_distribution<double> pos(0.01, 3.0);
  std::vector<TrackRecord> records;
  for (int i = 0; i < 300; ++i) {
    TrackRecord r;
    r.timestamp_ms = 1633719576000 + i * 100;
    r.agent_id = 1000 + i % 7;
    r.label = static_cast<AgentLabel>(1 + i % 3);
    r.confidence = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    r.pos_x = u(rng);
    r.pos_y = u(rng);
    r.box_length = pos(rng);
    r.box_width = pos(rng);
    r.box_height = pos(rng);
    r.yaw = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
    r.vel_x = u(rng) / 10.0;
    r.vel_y = u(rng) / 10.0;
    r.tracking_status = i % 4;
    records.push_back(r);
  }
  const auto text = format_track_csv(records);
  const auto back = parse_track_text(text);
  ASSERT_EQ(back.records.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) EXPECT_EQ(back.records[i], records[i]) << i;
  EXPECT_EQ(format_track_csv(back.records), text);
}

TEST(TrackParse, ManyRowsParseToSameCount) {
  std::vector<TrackRecord> records;
  for (int i = 0; i < 41130; ++i) records.push_back(testkit::pedestrian_record(1000 + i, i % 50, 0, 0, 1, 0));
  const auto parsed = parse_track_text(format_track_csv(records));
  EXPECT_EQ(parsed.records.size(), 41130u);
}

TEST(TrackParse, MissingFile) {
  EXPECT_EQ(kind_of([] { parse_track_file("/nonexistent/tracks.csv"); }), ErrorKind::MissingFile);
}

TEST(Spat, ParsesAndRoundTrips) {
  const std::vector<SpatEvent> events = {{0, 2, PhaseEvent::Begin}, {30000, 2, PhaseEvent::End}};
  const auto text = format_spat_csv(events);
  EXPECT_EQ(parse_spat_text(text), events);
}

TEST(Spat, EndWithoutBeginIsUnpaired) {
  EXPECT_EQ(kind_of([] { build_phase_timeline({{0, 2, PhaseEvent::End}}, {{Area::Crossing1, 2}}); }),
            ErrorKind::UnpairedPhaseEvent);
}

TEST(Spat, ThreeHourLogParses) {
  // 2:00:03 PM to 5:00:00 PM, 70 s cycles.
  const std::int64_t start = 1633701603000;
  const std::int64_t end = 1633712400000;
  std::vector<SpatEvent> events;
  for (std::int64_t t = start; t + 25000 <= end; t += 70000) {
    events.push_back({t, 2, PhaseEvent::Begin});
    events.push_back({t + 25000, 2, PhaseEvent::End});
  }
  const auto parsed = parse_spat_text(format_spat_csv(events));
  EXPECT_EQ(parsed.size(), events.size());
  EXPECT_NO_THROW(build_phase_timeline(parsed, {{Area::Crossing1, 2}}));
}

TEST(Timeline, SinglePairInterval) {
  const auto tl = build_phase_timeline({{0, 2, PhaseEvent::Begin}, {30000, 2, PhaseEvent::End}}, {{Area::Crossing1, 2}});
  ASSERT_EQ(tl.intervals(Area::Crossing1).size(), 1u);
  EXPECT_EQ(tl.intervals(Area::Crossing1)[0], (GreenInterval{0, 30000}));
}

TEST(Timeline, IntervalArithmetic) {
  const auto tl = build_phase_timeline(
      {{0, 2, PhaseEvent::Begin}, {30000, 2, PhaseEvent::End}, {60000, 2, PhaseEvent::Begin}, {90000, 2, PhaseEvent::End}},
      {{Area::Crossing1, 2}});
  auto s = tl.query(10000, Area::Crossing1);
  EXPECT_TRUE(s.green);
  EXPECT_DOUBLE_EQ(s.left_s, 20.0);
  s = tl.query(35000, Area::Crossing1);
  EXPECT_FALSE(s.green);
  EXPECT_DOUBLE_EQ(s.left_s, 25.0);
  s = tl.query(30000, Area::Crossing1);
  EXPECT_FALSE(s.green);
  s = tl.query(60000, Area::Crossing1);
  EXPECT_TRUE(s.green);
}

TEST(Timeline, UnmappedAreaAndGap) {
  const auto tl = build_phase_timeline({{0, 2, PhaseEvent::Begin}, {30000, 2, PhaseEvent::End}}, {{Area::Crossing1, 2}});
  EXPECT_EQ(kind_of([&] { tl.query(1000, Area::Crossing2); }), ErrorKind::UnknownArea);
  EXPECT_EQ(kind_of([&] { tl.query(1000, Area::Vehicle); }), ErrorKind::UnknownArea);
  EXPECT_EQ(kind_of([&] { tl.query(40000, Area::Crossing1); }), ErrorKind::TimelineGap);
  EXPECT_EQ(kind_of([] { build_phase_timeline({}, {{Area::Vehicle, 2}}); }), ErrorKind::UnknownArea);
}

// Dense scan against an independent reading of the event list: green iff the
// latest event at or before t is a begin; left time runs to the next event of
// the phase (or the span end).
TEST(Timeline, DenseScanMatchesEventOracle) {
  const auto events = testkit::alternating_spat(5000, 70.0, 25.0, 4);
  const auto tl = build_phase_timeline(events, testkit::default_phase_map());
  for (Area area : kCrossings) {
    const int phase = testkit::default_phase_map().at(area);
    std::vector<SpatEvent> mine;
    for (const auto& e : events) {
      if (e.phase_id == phase) mine.push_back(e);
    }
    for (std::int64_t t = tl.span_start_ms(); t <= tl.span_end_ms(); t += 250) {
      bool green = false;
      std::int64_t next = tl.span_end_ms();
      for (const auto& e : mine) {
        if (e.timestamp_ms <= t) green = e.event == PhaseEvent::Begin;
      }
      for (const auto& e : mine) {
        if (e.timestamp_ms > t) {
          next = e.timestamp_ms;
          break;
        }
      }
      // A non-green stretch ends at the next begin, skipping nothing else.
      const auto s = tl.query(t, area);
      ASSERT_EQ(s.green, green) << "t=" << t;
      ASSERT_DOUBLE_EQ(s.left_s, static_cast<double>(next - t) / 1000.0) << "t=" << t;
    }
  }
}

TEST(Calibration, IdentityLeavesRecordsUnchanged) {
  std::vector<TrackRecord> in = {testkit::pedestrian_record(0, 1, 3, 4, 1, 0.5)};
  EXPECT_EQ(apply_calibration(in, CalibrationConfig::identity()), in);
}

TEST(Calibration, TranslationMovesOnlyPositions) {
  CalibrationConfig cal;
  cal.affine(0, 2) = 10.0;
  cal.affine(1, 2) = 5.0;
  const auto r = testkit::pedestrian_record(0, 1, 3, 4, 1, 0.5);
  const auto out = apply_calibration({r}, cal)[0];
  EXPECT_DOUBLE_EQ(out.pos_x, 13.0);
  EXPECT_DOUBLE_EQ(out.pos_y, 9.0);
  EXPECT_DOUBLE_EQ(out.vel_x, 1.0);
  EXPECT_DOUBLE_EQ(out.vel_y, 0.5);
  EXPECT_DOUBLE_EQ(out.box_length, r.box_length);
}

TEST(Calibration, RotationRotatesVelocity) {
  CalibrationConfig cal;
  cal.affine << 0, -1, 0, 1, 0, 0;
  auto r = testkit::pedestrian_record(0, 1, 1, 0, 1, 0);
  const auto out = apply_calibration({r}, cal)[0];
  EXPECT_NEAR(out.vel_x, 0.0, 1e-12);
  EXPECT_NEAR(out.vel_y, 1.0, 1e-12);
  EXPECT_NEAR(out.yaw, std::numbers::pi / 2, 1e-12);
  EXPECT_NEAR(out.box_length, r.box_length, 1e-12);
  EXPECT_NEAR(out.box_width, r.box_width, 1e-12);
}

TEST(Calibration, SingularIsRejected) {
  CalibrationConfig cal;
  cal.affine << 1, 2, 0, 2, 4, 0;
  EXPECT_EQ(kind_of([&] { apply_calibration({}, cal); }), ErrorKind::SingularCalibration);
}

TEST(Calibration, CompositionMatchesSequentialApplication) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    CalibrationConfig a, b;
    a.affine << u(rng), u(rng), u(rng), u(rng), u(rng), u(rng);
    b.affine << u(rng), u(rng), u(rng), u(rng), u(rng), u(rng);
    if (std::abs(a.linear().determinant()) < 0.1 || std::abs(b.linear().determinant()) < 0.1) continue;
    std::vector<TrackRecord> recs;
    for (int i = 0; i < 5; ++i) recs.push_back(testkit::pedestrian_record(i, 1, u(rng) * 10, u(rng) * 10, u(rng), u(rng)));
    const auto once = apply_calibration(recs, CalibrationConfig::compose(a, b));
    const auto twice = apply_calibration(apply_calibration(recs, b), a);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      EXPECT_NEAR(once[i].pos_x, twice[i].pos_x, 1e-9);
      EXPECT_NEAR(once[i].pos_y, twice[i].pos_y, 1e-9);
      EXPECT_NEAR(once[i].vel_x, twice[i].vel_x, 1e-9);
      EXPECT_NEAR(once[i].vel_y, twice[i].vel_y, 1e-9);
    }
  }
}

TEST(Csv, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) / 7.0;
    EXPECT_EQ(*csv::parse_double(csv::format_double(v)), v);
  }
}
