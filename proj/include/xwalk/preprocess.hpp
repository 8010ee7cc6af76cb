#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xwalk/area.hpp"
#include "xwalk/geometry.hpp"
#include "xwalk/ingest.hpp"

namespace xwalk {

struct TrajectoryPoint {
  TrackRecord record;         // calibrated
  double speed = 0.0;         // |(vel_x, vel_y)|, m/s
  double spent_time_s = 0.0;  // seconds since the first point of the trajectory
  Area area = Area::Vehicle;

  double t_s() const { return static_cast<double>(record.timestamp_ms) / 1000.0; }
  Vec2 position() const { return {record.pos_x, record.pos_y}; }
};

struct Trajectory {
  std::int64_t agent_id = 0;
  std::vector<TrajectoryPoint> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  /// Index of the last point inside any crossing area.
  std::optional<std::size_t> exit_index() const;

  /// Crossing area holding most of the trajectory's points (ties go to the
  /// lower-numbered crossing). Vehicle when the trajectory never crosses.
  Area primary_crossing() const;
};

/// Four convex crossing polygons in map frame. Anything outside them is the
/// vehicle area.
struct AreaConfig {
  std::array<ConvexPolygon, kNumCrossings> crossings;

  /// Throws InvalidAreaConfig for malformed polygons and OverlappingAreaConfig
  /// when two crossings share any point.
  void validate() const;

  /// Throws OverlappingAreaConfig when the point falls in two crossings.
  Area classify(const Vec2& p) const;
};

struct GroupingReport {
  std::size_t duplicates = 0;
  std::vector<std::pair<std::int64_t, std::int64_t>> duplicate_keys;  // (agent_id, timestamp_ms)
};

/// One trajectory per agent id, ordered by id. Points keep input order; a
/// repeated (id, timestamp) keeps its first occurrence. Speed and spent time
/// are populated; areas are left as Vehicle until `assign_areas`.
std::vector<Trajectory> group_by_id(const std::vector<TrackRecord>& records, GroupingReport* report = nullptr);

/// Pedestrian-labelled points make up at least half of the trajectory.
bool rule1_pedestrian_majority(const Trajectory& traj);
/// At least one point lies in (or on the boundary of) a crossing polygon.
bool rule2_touches_crossing(const Trajectory& traj, const AreaConfig& areas);
/// Strictly more than ten points.
bool rule3_min_points(const Trajectory& traj);

inline constexpr double kRule1MinRatio = 0.5;
inline constexpr std::size_t kRule3MinPointsExclusive = 10;

Trajectory assign_areas(Trajectory traj, const AreaConfig& areas);

struct PreprocessReport {
  std::size_t input_records = 0;
  std::size_t grouped_trajectories = 0;
  std::size_t duplicates = 0;
  std::size_t failed_rule1 = 0;
  std::size_t failed_rule2 = 0;
  std::size_t failed_rule3 = 0;
  std::size_t kept = 0;
};

struct PreprocessResult {
  std::vector<Trajectory> trajectories;
  PreprocessReport report;
};

/// Calibrate, group, annotate areas and keep trajectories passing all three
/// rules. Failure counters are not exclusive: a trajectory failing two rules
/// is counted under both.
PreprocessResult preprocess_pipeline(const std::vector<TrackRecord>& records, const AreaConfig& areas,
                                     const CalibrationConfig& cal);

std::string trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const std::string& text);

/// One JSON document per line.
void write_trajectories(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> read_trajectories(const std::filesystem::path& path);

}  // namespace xwalk
