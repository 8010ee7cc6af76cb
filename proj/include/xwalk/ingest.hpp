#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "xwalk/area.hpp"

namespace xwalk {

enum class AgentLabel : int { Vehicle = 1, Pedestrian = 2, Cyclist = 3 };

/// One detected agent in one LiDAR frame, as produced by the upstream detector.
struct TrackRecord {
  std::int64_t timestamp_ms = 0;
  std::int64_t agent_id = 0;
  AgentLabel label = AgentLabel::Pedestrian;
  double confidence = 1.0;
  double pos_x = 0.0;
  double pos_y = 0.0;
  double box_length = 0.0;
  double box_width = 0.0;
  double box_height = 0.0;
  double yaw = 0.0;
  double vel_x = 0.0;
  double vel_y = 0.0;
  std::int64_t tracking_status = 0;  // opaque, carried through untouched

  double speed() const;
  bool operator==(const TrackRecord&) const = default;
};

inline constexpr std::size_t kTrackColumns = 13;

/// Column order of a track file. The canonical order is the one written by
/// `format_track_csv`; a header row in the file overrides it.
struct TrackSchema {
  std::array<std::string, kTrackColumns> columns;
  static TrackSchema canonical();
};

struct RowIssue {
  std::size_t line = 0;
  std::string reason;
};

struct TrackParseReport {
  std::size_t data_rows = 0;
  bool had_header = false;
  bool non_monotonic_timestamps = false;
  std::vector<RowIssue> malformed;
  std::vector<std::string> warnings;
};

struct TrackParseResult {
  std::vector<TrackRecord> records;
  TrackParseReport report;
};

/// Rows with the wrong column count raise SchemaMismatch. Rows with the right
/// shape but invalid values are skipped and listed in the report. Records are
/// stably sorted by timestamp when the file is out of order.
TrackParseResult parse_track_text(std::string_view text,
                                  const TrackSchema& schema = TrackSchema::canonical());
TrackParseResult parse_track_file(const std::filesystem::path& path,
                                  const TrackSchema& schema = TrackSchema::canonical());

std::string format_track_csv(const std::vector<TrackRecord>& records, bool header = true);

enum class PhaseEvent { Begin, End };

struct SpatEvent {
  std::int64_t timestamp_ms = 0;
  int phase_id = 0;
  PhaseEvent event = PhaseEvent::Begin;
  bool operator==(const SpatEvent&) const = default;
};

std::vector<SpatEvent> parse_spat_text(std::string_view text);
std::vector<SpatEvent> parse_spat_file(const std::filesystem::path& path);
std::string format_spat_csv(const std::vector<SpatEvent>& events, bool header = true);

/// Global 2D affine map from sensor frame to map frame: p' = L p + t, where
/// the matrix is [L | t].
struct CalibrationConfig {
  Eigen::Matrix<double, 2, 3> affine = identity_matrix();

  Eigen::Matrix2d linear() const { return affine.leftCols<2>(); }
  Eigen::Vector2d translation() const { return affine.col(2); }

  static Eigen::Matrix<double, 2, 3> identity_matrix();
  static CalibrationConfig identity() { return {}; }

  /// Returns the transform equivalent to applying `inner` first, then `outer`.
  static CalibrationConfig compose(const CalibrationConfig& outer, const CalibrationConfig& inner);

  void validate() const;
};

/// Positions are mapped through the full affine transform, velocities through
/// its linear part. Yaw follows the mapped heading vector; box length scales
/// with the mapped heading length and width so that the footprint area scales
/// by |det L|. Pure rotations leave box dimensions unchanged.
std::vector<TrackRecord> apply_calibration(const std::vector<TrackRecord>& records,
                                           const CalibrationConfig& cal);

double normalize_angle(double radians);

struct GreenInterval {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;  // exclusive
  bool operator==(const GreenInterval&) const = default;
};

struct PhaseState {
  bool green = false;
  double left_s = 0.0;  // seconds until the current state changes
};

/// Green intervals per crossing area, derived from begin/end events of the
/// phase that governs each area. Intervals are half-open.
class PhaseTimeline {
 public:
  PhaseTimeline() = default;
  PhaseTimeline(std::int64_t span_start_ms, std::int64_t span_end_ms,
                std::map<Area, int> phase_map,
                std::map<Area, std::vector<GreenInterval>> intervals);

  /// Throws UnknownArea for unmapped areas and TimelineGap outside the span.
  PhaseState query(std::int64_t t_ms, Area area) const;
  bool covers(std::int64_t t_ms) const { return t_ms >= span_start_ms_ && t_ms <= span_end_ms_; }

  std::int64_t span_start_ms() const { return span_start_ms_; }
  std::int64_t span_end_ms() const { return span_end_ms_; }
  const std::map<Area, int>& phase_map() const { return phase_map_; }
  const std::vector<GreenInterval>& intervals(Area area) const;

  /// First green end strictly inside (from_ms, to_ms], if any.
  std::optional<std::int64_t> green_end_within(Area area, std::int64_t from_ms, std::int64_t to_ms) const;

 private:
  std::int64_t span_start_ms_ = 0;
  std::int64_t span_end_ms_ = 0;
  std::map<Area, int> phase_map_;
  std::map<Area, std::vector<GreenInterval>> intervals_;
};

PhaseTimeline build_phase_timeline(const std::vector<SpatEvent>& events,
                                   const std::map<Area, int>& phase_map);

}  // namespace xwalk
