#include "xwalk/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "xwalk/csv.hpp"
#include "xwalk/error.hpp"

namespace xwalk {

std::string_view to_string(Area a) {
  switch (a) {
    case Area::Crossing1: return "crossing_1";
    case Area::Crossing2: return "crossing_2";
    case Area::Crossing3: return "crossing_3";
    case Area::Crossing4: return "crossing_4";
    case Area::Vehicle: return "vehicle_area";
  }
  return "vehicle_area";
}

std::optional<Area> area_from_string(std::string_view s) {
  for (int i = 0; i < kNumAreas; ++i) {
    const auto a = static_cast<Area>(i);
    if (to_string(a) == s) return a;
  }
  return std::nullopt;
}

double TrackRecord::speed() const { return std::hypot(vel_x, vel_y); }

double normalize_angle(double radians) {
  if (!std::isfinite(radians)) return radians;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double r = std::remainder(radians, kTwoPi);  // in [-pi, pi]
  if (r < -std::numbers::pi) r += kTwoPi;
  if (r > std::numbers::pi) r -= kTwoPi;
  return r;
}

// ---------------------------------------------------------------------------
// Track files

TrackSchema TrackSchema::canonical() {
  return {{"timestamp_ms", "id", "label", "confidence", "pos_x", "pos_y", "box_length",
           "box_width", "box_height", "yaw", "vel_x", "vel_y", "tracking_status"}};
}

namespace {

enum Column : std::size_t {
  kTimestamp, kId, kLabel, kConfidence, kPosX, kPosY, kLength, kWidth, kHeight,
  kYaw, kVelX, kVelY, kStatus
};

// Maps schema position -> canonical column.
std::array<std::size_t, kTrackColumns> column_mapping(const std::array<std::string, kTrackColumns>& cols) {
  const auto canon = TrackSchema::canonical().columns;
  std::array<std::size_t, kTrackColumns> map{};
  std::array<bool, kTrackColumns> seen{};
  for (std::size_t i = 0; i < kTrackColumns; ++i) {
    const auto it = std::find(canon.begin(), canon.end(), cols[i]);
    if (it == canon.end()) throw Error(ErrorKind::SchemaMismatch, "unknown column '" + cols[i] + "'");
    const auto c = static_cast<std::size_t>(it - canon.begin());
    if (seen[c]) throw Error(ErrorKind::SchemaMismatch, "duplicate column '" + cols[i] + "'");
    seen[c] = true;
    map[i] = c;
  }
  return map;
}

bool looks_like_header(std::string_view first_field) {
  return !csv::parse_double(first_field).has_value();
}

std::optional<std::string> parse_row(const std::vector<std::string_view>& fields,
                                     const std::array<std::size_t, kTrackColumns>& mapping,
                                     TrackRecord& out) {
  std::array<std::string_view, kTrackColumns> v;
  for (std::size_t i = 0; i < kTrackColumns; ++i) v[mapping[i]] = fields[i];

  const auto ts = csv::parse_int(v[kTimestamp]);
  const auto id = csv::parse_int(v[kId]);
  const auto label = csv::parse_int(v[kLabel]);
  const auto status = csv::parse_int(v[kStatus]);
  if (!ts) return "unparsable timestamp";
  if (!id) return "unparsable id";
  if (!label) return "unparsable label";
  if (!status) return "unparsable tracking_status";
  if (*label < 1 || *label > 3) return "label outside {1,2,3}";

  std::array<double, 9> reals{};
  constexpr std::array<std::size_t, 9> real_cols = {kConfidence, kPosX, kPosY, kLength, kWidth,
                                                    kHeight, kYaw, kVelX, kVelY};
  for (std::size_t i = 0; i < real_cols.size(); ++i) {
    const auto d = csv::parse_double(v[real_cols[i]]);
    if (!d || !std::isfinite(*d)) return "unparsable numeric field in column " + std::to_string(real_cols[i]);
    reals[i] = *d;
  }
  out.timestamp_ms = *ts;
  out.agent_id = *id;
  out.label = static_cast<AgentLabel>(*label);
  out.confidence = reals[0];
  out.pos_x = reals[1];
  out.pos_y = reals[2];
  out.box_length = reals[3];
  out.box_width = reals[4];
  out.box_height = reals[5];
  out.yaw = normalize_angle(reals[6]);
  out.vel_x = reals[7];
  out.vel_y = reals[8];
  out.tracking_status = *status;

  if (out.confidence < 0.0 || out.confidence > 1.0) return "confidence outside [0,1]";
  if (out.box_length <= 0.0 || out.box_width <= 0.0 || out.box_height <= 0.0) return "non-positive box dimension";
  return std::nullopt;
}

}  // namespace

TrackParseResult parse_track_text(std::string_view text, const TrackSchema& schema) {
  TrackParseResult result;
  auto mapping = column_mapping(schema.columns);
  bool first = true;
  const auto all_lines = csv::lines(text);
  for (std::size_t ln = 0; ln < all_lines.size(); ++ln) {
    const auto line = csv::trim(all_lines[ln]);
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    if (first) {
      first = false;
      if (looks_like_header(fields.front())) {
        if (fields.size() != kTrackColumns) {
          throw Error(ErrorKind::SchemaMismatch, "header has " + std::to_string(fields.size()) + " columns, expected 13");
        }
        std::array<std::string, kTrackColumns> cols;
        for (std::size_t i = 0; i < kTrackColumns; ++i) cols[i] = std::string(csv::trim(fields[i]));
        mapping = column_mapping(cols);
        result.report.had_header = true;
        continue;
      }
    }
    if (fields.size() != kTrackColumns) {
      throw Error(ErrorKind::SchemaMismatch, "line " + std::to_string(ln + 1) + " has " +
                                                 std::to_string(fields.size()) + " fields, expected 13");
    }
    ++result.report.data_rows;
    TrackRecord rec;
    if (auto issue = parse_row(fields, mapping, rec)) {
      result.report.malformed.push_back({ln + 1, *issue});
      continue;
    }
    result.records.push_back(rec);
  }

  const auto by_time = [](const TrackRecord& a, const TrackRecord& b) { return a.timestamp_ms < b.timestamp_ms; };
  if (!std::is_sorted(result.records.begin(), result.records.end(), by_time)) {
    result.report.non_monotonic_timestamps = true;
    result.report.warnings.push_back("NonMonotonicTimestamps: rows were stably sorted by timestamp");
    std::stable_sort(result.records.begin(), result.records.end(), by_time);
  }
  return result;
}

TrackParseResult parse_track_file(const std::filesystem::path& path, const TrackSchema& schema) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::MissingFile, path.string());
  return parse_track_text(csv::read_file(path), schema);
}

std::string format_track_csv(const std::vector<TrackRecord>& records, bool header) {
  std::string out;
  out.reserve(records.size() * 96 + 128);
  if (header) {
    const auto cols = TrackSchema::canonical().columns;
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) out += ',';
      out += cols[i];
    }
    out += '\n';
  }
  for (const auto& r : records) {
    out += std::to_string(r.timestamp_ms);
    out += ',';
    out += std::to_string(r.agent_id);
    out += ',';
    out += std::to_string(static_cast<int>(r.label));
    for (double d : {r.confidence, r.pos_x, r.pos_y, r.box_length, r.box_width, r.box_height, r.yaw,
                     r.vel_x, r.vel_y}) {
      out += ',';
      out += csv::format_double(d);
    }
    out += ',';
    out += std::to_string(r.tracking_status);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// SPaT files

std::vector<SpatEvent> parse_spat_text(std::string_view text) {
  std::vector<SpatEvent> events;
  bool first = true;
  const auto all_lines = csv::lines(text);
  for (std::size_t ln = 0; ln < all_lines.size(); ++ln) {
    const auto line = csv::trim(all_lines[ln]);
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    if (first) {
      first = false;
      if (!csv::parse_int(fields.front())) continue;  // header
    }
    if (fields.size() != 3) {
      throw Error(ErrorKind::SchemaMismatch, "SPaT line " + std::to_string(ln + 1) + " has " +
                                                 std::to_string(fields.size()) + " fields, expected 3");
    }
    const auto ts = csv::parse_int(fields[0]);
    const auto phase = csv::parse_int(fields[1]);
    const auto kind = csv::trim(fields[2]);
    if (!ts || !phase || (kind != "begin" && kind != "end")) {
      throw Error(ErrorKind::SchemaMismatch, "SPaT line " + std::to_string(ln + 1) + " is malformed");
    }
    events.push_back({*ts, static_cast<int>(*phase), kind == "begin" ? PhaseEvent::Begin : PhaseEvent::End});
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const SpatEvent& a, const SpatEvent& b) { return a.timestamp_ms < b.timestamp_ms; });

  std::map<int, PhaseEvent> last;
  for (const auto& e : events) {
    const auto it = last.find(e.phase_id);
    const bool expect_begin = it == last.end() || it->second == PhaseEvent::End;
    if (expect_begin != (e.event == PhaseEvent::Begin)) {
      throw Error(ErrorKind::UnpairedPhaseEvent,
                  std::string(e.event == PhaseEvent::End ? "end without begin" : "begin without end") +
                      " for phase " + std::to_string(e.phase_id) + " at t=" + std::to_string(e.timestamp_ms));
    }
    last[e.phase_id] = e.event;
  }
  return events;
}

std::vector<SpatEvent> parse_spat_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::MissingFile, path.string());
  return parse_spat_text(csv::read_file(path));
}

std::string format_spat_csv(const std::vector<SpatEvent>& events, bool header) {
  std::ostringstream out;
  if (header) out << "timestamp_ms,phase_id,event\n";
  for (const auto& e : events) {
    out << e.timestamp_ms << ',' << e.phase_id << ',' << (e.event == PhaseEvent::Begin ? "begin" : "end") << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Calibration

Eigen::Matrix<double, 2, 3> CalibrationConfig::identity_matrix() {
  Eigen::Matrix<double, 2, 3> m;
  m << 1, 0, 0, 0, 1, 0;
  return m;
}

CalibrationConfig CalibrationConfig::compose(const CalibrationConfig& outer, const CalibrationConfig& inner) {
  CalibrationConfig c;
  c.affine.leftCols<2>() = outer.linear() * inner.linear();
  c.affine.col(2) = outer.linear() * inner.translation() + outer.translation();
  return c;
}

void CalibrationConfig::validate() const {
  if (!affine.allFinite()) throw Error(ErrorKind::SingularCalibration, "calibration matrix has non-finite entries");
  if (std::abs(linear().determinant()) <= 1e-9) {
    throw Error(ErrorKind::SingularCalibration, "linear part of calibration is not invertible");
  }
}

std::vector<TrackRecord> apply_calibration(const std::vector<TrackRecord>& records, const CalibrationConfig& cal) {
  cal.validate();
  const Eigen::Matrix2d lin = cal.linear();
  const Eigen::Vector2d t = cal.translation();
  const double det = std::abs(lin.determinant());
  const bool pure_shift = lin == Eigen::Matrix2d::Identity();
  std::vector<TrackRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    TrackRecord c = r;
    if (pure_shift) {
      // Exact: headings, velocities and sizes are untouched by a translation.
      c.pos_x += t.x();
      c.pos_y += t.y();
      out.push_back(c);
      continue;
    }
    const Eigen::Vector2d p = lin * Eigen::Vector2d(r.pos_x, r.pos_y) + t;
    const Eigen::Vector2d v = lin * Eigen::Vector2d(r.vel_x, r.vel_y);
    const Eigen::Vector2d h = lin * Eigen::Vector2d(std::cos(r.yaw), std::sin(r.yaw));
    const double stretch = h.norm();
    c.pos_x = p.x();
    c.pos_y = p.y();
    c.vel_x = v.x();
    c.vel_y = v.y();
    c.yaw = normalize_angle(std::atan2(h.y(), h.x()));
    c.box_length = r.box_length * stretch;
    c.box_width = r.box_width * det / stretch;
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Phase timeline

PhaseTimeline::PhaseTimeline(std::int64_t span_start_ms, std::int64_t span_end_ms, std::map<Area, int> phase_map,
                             std::map<Area, std::vector<GreenInterval>> intervals)
    : span_start_ms_(span_start_ms),
      span_end_ms_(span_end_ms),
      phase_map_(std::move(phase_map)),
      intervals_(std::move(intervals)) {
  for (const auto& [area, list] : intervals_) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (list[i].end_ms <= list[i].start_ms || (i > 0 && list[i].start_ms < list[i - 1].end_ms)) {
        throw Error(ErrorKind::InvalidConfig, "green intervals must be disjoint and increasing");
      }
    }
  }
}

const std::vector<GreenInterval>& PhaseTimeline::intervals(Area area) const {
  const auto it = intervals_.find(area);
  if (it == intervals_.end()) throw Error(ErrorKind::UnknownArea, std::string(to_string(area)));
  return it->second;
}

PhaseState PhaseTimeline::query(std::int64_t t_ms, Area area) const {
  const auto& list = intervals(area);
  if (!covers(t_ms)) {
    throw Error(ErrorKind::TimelineGap, "t=" + std::to_string(t_ms) + " outside [" + std::to_string(span_start_ms_) +
                                            ", " + std::to_string(span_end_ms_) + "]");
  }
  // First interval whose end is after t.
  const auto it = std::upper_bound(list.begin(), list.end(), t_ms,
                                   [](std::int64_t t, const GreenInterval& g) { return t < g.end_ms; });
  if (it != list.end() && it->start_ms <= t_ms) {
    return {true, static_cast<double>(it->end_ms - t_ms) / 1000.0};
  }
  const std::int64_t next = it != list.end() ? it->start_ms : span_end_ms_;
  return {false, static_cast<double>(next - t_ms) / 1000.0};
}

std::optional<std::int64_t> PhaseTimeline::green_end_within(Area area, std::int64_t from_ms, std::int64_t to_ms) const {
  for (const auto& g : intervals(area)) {
    if (g.end_ms > from_ms && g.end_ms <= to_ms) return g.end_ms;
  }
  return std::nullopt;
}

PhaseTimeline build_phase_timeline(const std::vector<SpatEvent>& events, const std::map<Area, int>& phase_map) {
  for (const auto& [area, phase] : phase_map) {
    if (!is_crossing(area)) throw Error(ErrorKind::UnknownArea, "only crossing areas carry a pedestrian phase");
    (void)phase;
  }
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  if (!events.empty()) {
    lo = events.front().timestamp_ms;
    hi = events.front().timestamp_ms;
    for (const auto& e : events) {
      lo = std::min(lo, e.timestamp_ms);
      hi = std::max(hi, e.timestamp_ms);
    }
  }

  std::map<int, std::vector<GreenInterval>> by_phase;
  std::map<int, std::int64_t> open;
  for (const auto& e : events) {
    if (e.event == PhaseEvent::Begin) {
      if (open.contains(e.phase_id)) {
        throw Error(ErrorKind::UnpairedPhaseEvent, "begin without end for phase " + std::to_string(e.phase_id));
      }
      open[e.phase_id] = e.timestamp_ms;
    } else {
      const auto it = open.find(e.phase_id);
      if (it == open.end()) {
        throw Error(ErrorKind::UnpairedPhaseEvent, "end without begin for phase " + std::to_string(e.phase_id) +
                                                       " at t=" + std::to_string(e.timestamp_ms));
      }
      if (e.timestamp_ms > it->second) by_phase[e.phase_id].push_back({it->second, e.timestamp_ms});
      open.erase(it);
    }
  }
  // A green still open when the log stops runs to the end of the span.
  for (const auto& [phase, start] : open) {
    if (hi > start) by_phase[phase].push_back({start, hi});
  }

  std::map<Area, std::vector<GreenInterval>> per_area;
  for (const auto& [area, phase] : phase_map) {
    auto list = by_phase[phase];
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.start_ms < b.start_ms; });
    per_area[area] = std::move(list);
  }
  return PhaseTimeline(lo, hi, phase_map, std::move(per_area));
}

}  // namespace xwalk
