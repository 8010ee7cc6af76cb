#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "xwalk/ingest.hpp"
#include "xwalk/preprocess.hpp"
#include "xwalk/subclass.hpp"

namespace xwalk {

/// Synthetic-world constants for one pedestrian class. Speeds in m/s,
/// sizes in m, yaw noise in rad.
struct ClassPopulation {
  double speed_mean = 1.4;
  double speed_std = 0.2;
  double speed_min = 0.5;
  double speed_max = 2.2;
  double height_min = 1.55;
  double height_max = 1.95;
  double width_mean = 0.5;
  double length_mean = 0.8;
  double size_std = 0.04;  // per-agent spread of width and length
  double yaw_noise = 0.9;
};

struct ScenarioConfig {
  AreaConfig areas;
  std::map<Area, int> phase_map;
  std::map<int, double> phase_offsets_s;  // first green start per phase
  double cycle_s = 70.0;
  double green_s = 25.0;
  int cycles = 12;

  int n_normal = 50;
  int n_wheelchair = 30;
  int n_vehicle = 10;
  int n_noise_tracks = 6;
  int n_non_crossing = 4;

  ClassPopulation normal;
  ClassPopulation wheelchair;
  double accel_probability = 0.3;   // normals that hurry before the green ends
  double accel_factor = 1.5;
  double accel_lead_s = 3.0;
  double steady_fraction = 0.06;    // calm normals that no rule identifies
  double steady_speed_min = 1.15;
  double steady_speed_max = 1.4;
  double steady_yaw_noise = 0.1;

  double frame_interval_s = 0.1;
  double approach_min_m = 2.0;      // walked distance before the crosswalk
  double approach_max_m = 2.0;
  double position_noise = 0.02;
  double velocity_noise = 0.03;
  double size_noise = 0.02;
  double label_flip_probability = 0.03;  // pedestrian frames reported as cyclist
  std::int64_t base_timestamp_ms = 1633719576000;
  std::uint64_t seed = 0;

  /// Four axis-aligned crosswalks around a central box, phase 2 for
  /// crossings 1 and 3, phase 4 for 2 and 4.
  static ScenarioConfig defaults();
  /// Class-shared sizes and noisy motion so that the class mostly shows
  /// through speed alone.
  static ScenarioConfig two_speed();
  /// Constant-speed crossers with no measurement noise.
  static ScenarioConfig zero_noise();

  /// Throws InvalidConfig.
  void validate() const;

  nlohmann::json to_json() const;
  /// Keys absent from `j` keep the values of `base`.
  static ScenarioConfig from_json(const nlohmann::json& j, const ScenarioConfig& base = defaults());
};

enum class AgentKind { Normal, Wheelchair, Vehicle, NoiseTrack, NonCrossing };
enum class AnomalyKind { None, WaitsForGreenMidCrossing, ViolationCrosser };

std::string_view to_string(AgentKind k);
std::string_view to_string(AnomalyKind k);
std::optional<AgentKind> agent_kind_from_string(std::string_view s);
std::optional<AnomalyKind> anomaly_from_string(std::string_view s);

struct MotionSegment {
  double start_s = 0.0;  // seconds after the base timestamp
  double speed = 0.0;
};

/// Straight-line, piecewise-constant-speed motion plan for one agent.
struct AgentPlan {
  std::int64_t agent_id = 0;
  AgentKind kind = AgentKind::Normal;
  AgentLabel label = AgentLabel::Pedestrian;
  Area crossing = Area::Vehicle;
  int green_index = 0;  // cycle whose green the agent uses
  Vec2 origin = Vec2::Zero();
  Vec2 direction = Vec2::UnitX();
  double path_length = 0.0;
  double crossing_start_m = 0.0;  // path distance where the crosswalk begins
  double crossing_end_m = 0.0;
  std::vector<MotionSegment> segments;  // first segment starts the track
  double width = 0.5;
  double length = 0.8;
  double height = 1.7;
  double yaw_noise = 0.0;
  bool accelerates = false;
  AnomalyKind anomaly = AnomalyKind::None;
  std::uint64_t noise_seed = 0;

  double start_s() const { return segments.front().start_s; }
  /// Seconds at which the path is fully covered.
  double end_s() const;
  double distance_at(double t_s) const;
  double speed_at(double t_s) const;
};

struct GroundTruth {
  std::int64_t agent_id = 0;
  AgentKind kind = AgentKind::Normal;
  std::optional<std::int64_t> exit_time_ms;  // last frame inside a crosswalk
  AnomalyKind anomaly = AnomalyKind::None;

  /// Normal or Wheelchair for pedestrians, Unknown otherwise.
  SubClass true_subclass() const;
};

struct Scene {
  ScenarioConfig config;
  std::vector<AgentPlan> agents;
  std::vector<TrackRecord> records;  // time-ordered, then by agent id
  std::vector<SpatEvent> spat;
  std::vector<GroundTruth> truth;    // by agent id
};

/// Green start/end times per phase in seconds after the base timestamp.
std::vector<std::pair<double, double>> green_windows(const ScenarioConfig& config, int phase);

Scene generate_scene(const ScenarioConfig& config);

/// Replaces the motion of `agent_id` (default: the first plain normal or
/// wheelchair crosser) with the anomaly template and re-renders the scene.
/// Throws UnknownAnomaly for AnomalyKind::None and UnknownAgent when no
/// suitable agent exists.
Scene inject_anomaly(Scene scene, AnomalyKind kind, std::optional<std::int64_t> agent_id = std::nullopt);
Scene inject_anomaly(Scene scene, std::string_view kind, std::optional<std::int64_t> agent_id = std::nullopt);

std::string format_ground_truth_csv(const std::vector<GroundTruth>& truth);
std::vector<GroundTruth> parse_ground_truth_csv(std::string_view text);

struct SceneFiles {
  std::filesystem::path tracks;
  std::filesystem::path spat;
  std::filesystem::path ground_truth;
};

/// Writes tracks.csv, spat.csv and ground_truth.csv into `dir`.
SceneFiles write_scene(const Scene& scene, const std::filesystem::path& dir);

}  // namespace xwalk
