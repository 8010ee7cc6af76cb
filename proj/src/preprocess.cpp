#include "xwalk/preprocess.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "xwalk/csv.hpp"
#include "xwalk/error.hpp"

namespace xwalk {

using nlohmann::json;

std::optional<std::size_t> Trajectory::exit_index() const {
  for (std::size_t i = points.size(); i-- > 0;) {
    if (is_crossing(points[i].area)) return i;
  }
  return std::nullopt;
}

Area Trajectory::primary_crossing() const {
  std::array<std::size_t, kNumCrossings> counts{};
  for (const auto& p : points) {
    if (is_crossing(p.area)) ++counts[index_of(p.area)];
  }
  const auto best = std::max_element(counts.begin(), counts.end());
  if (*best == 0) return Area::Vehicle;
  return static_cast<Area>(best - counts.begin());
}

void AreaConfig::validate() const {
  for (const auto& poly : crossings) poly.validate();
  for (int i = 0; i < kNumCrossings; ++i) {
    for (int j = i + 1; j < kNumCrossings; ++j) {
      if (crossings[i].intersects(crossings[j])) {
        throw Error(ErrorKind::OverlappingAreaConfig, "crossing_" + std::to_string(i + 1) + " and crossing_" +
                                                          std::to_string(j + 1) + " overlap");
      }
    }
  }
}

Area AreaConfig::classify(const Vec2& p) const {
  std::optional<Area> found;
  for (Area a : kCrossings) {
    if (!crossings[index_of(a)].contains(p)) continue;
    if (found) {
      throw Error(ErrorKind::OverlappingAreaConfig, "point lies in both " + std::string(to_string(*found)) +
                                                        " and " + std::string(to_string(a)));
    }
    found = a;
  }
  return found.value_or(Area::Vehicle);
}

std::vector<Trajectory> group_by_id(const std::vector<TrackRecord>& records, GroupingReport* report) {
  std::map<std::int64_t, Trajectory> by_id;
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  for (const auto& r : records) {
    if (!seen.emplace(r.agent_id, r.timestamp_ms).second) {
      if (report) {
        ++report->duplicates;
        report->duplicate_keys.emplace_back(r.agent_id, r.timestamp_ms);
      }
      continue;
    }
    auto& traj = by_id[r.agent_id];
    traj.agent_id = r.agent_id;
    traj.points.push_back({r, r.speed(), 0.0, Area::Vehicle});
  }

  std::vector<Trajectory> out;
  out.reserve(by_id.size());
  for (auto& [id, traj] : by_id) {
    std::stable_sort(traj.points.begin(), traj.points.end(), [](const auto& a, const auto& b) {
      return a.record.timestamp_ms < b.record.timestamp_ms;
    });
    const auto t0 = traj.points.front().record.timestamp_ms;
    for (auto& p : traj.points) p.spent_time_s = static_cast<double>(p.record.timestamp_ms - t0) / 1000.0;
    out.push_back(std::move(traj));
  }
  return out;
}

bool rule1_pedestrian_majority(const Trajectory& traj) {
  if (traj.empty()) return false;
  const auto peds = std::count_if(traj.points.begin(), traj.points.end(),
                                  [](const auto& p) { return p.record.label == AgentLabel::Pedestrian; });
  // Integer form of peds / n >= 0.5.
  return 2 * static_cast<std::size_t>(peds) >= traj.size();
}

bool rule2_touches_crossing(const Trajectory& traj, const AreaConfig& areas) {
  return std::any_of(traj.points.begin(), traj.points.end(), [&](const auto& p) {
    return std::any_of(areas.crossings.begin(), areas.crossings.end(),
                       [&](const ConvexPolygon& poly) { return poly.contains(p.position()); });
  });
}

bool rule3_min_points(const Trajectory& traj) { return traj.size() > kRule3MinPointsExclusive; }

Trajectory assign_areas(Trajectory traj, const AreaConfig& areas) {
  for (auto& p : traj.points) p.area = areas.classify(p.position());
  return traj;
}

PreprocessResult preprocess_pipeline(const std::vector<TrackRecord>& records, const AreaConfig& areas,
                                     const CalibrationConfig& cal) {
  areas.validate();
  PreprocessResult result;
  result.report.input_records = records.size();

  GroupingReport grouping;
  auto grouped = group_by_id(apply_calibration(records, cal), &grouping);
  result.report.duplicates = grouping.duplicates;
  result.report.grouped_trajectories = grouped.size();

  for (auto& raw : grouped) {
    const bool r1 = rule1_pedestrian_majority(raw);
    const bool r2 = rule2_touches_crossing(raw, areas);
    const bool r3 = rule3_min_points(raw);
    result.report.failed_rule1 += !r1;
    result.report.failed_rule2 += !r2;
    result.report.failed_rule3 += !r3;
    if (r1 && r2 && r3) result.trajectories.push_back(assign_areas(std::move(raw), areas));
  }
  result.report.kept = result.trajectories.size();
  return result;
}

// ---------------------------------------------------------------------------
// JSON checkpointing

namespace {

json point_to_json(const TrajectoryPoint& p) {
  const auto& r = p.record;
  return {{"timestamp_ms", r.timestamp_ms}, {"label", static_cast<int>(r.label)},
          {"confidence", r.confidence},     {"pos_x", r.pos_x},
          {"pos_y", r.pos_y},               {"box_length", r.box_length},
          {"box_width", r.box_width},       {"box_height", r.box_height},
          {"yaw", r.yaw},                   {"vel_x", r.vel_x},
          {"vel_y", r.vel_y},               {"tracking_status", r.tracking_status},
          {"speed", p.speed},               {"spent_time_s", p.spent_time_s},
          {"area", std::string(to_string(p.area))}};
}

TrajectoryPoint point_from_json(const json& j, std::int64_t agent_id) {
  TrajectoryPoint p;
  auto& r = p.record;
  r.agent_id = agent_id;
  r.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
  r.label = static_cast<AgentLabel>(j.at("label").get<int>());
  r.confidence = j.at("confidence").get<double>();
  r.pos_x = j.at("pos_x").get<double>();
  r.pos_y = j.at("pos_y").get<double>();
  r.box_length = j.at("box_length").get<double>();
  r.box_width = j.at("box_width").get<double>();
  r.box_height = j.at("box_height").get<double>();
  r.yaw = j.at("yaw").get<double>();
  r.vel_x = j.at("vel_x").get<double>();
  r.vel_y = j.at("vel_y").get<double>();
  r.tracking_status = j.at("tracking_status").get<std::int64_t>();
  p.speed = j.at("speed").get<double>();
  p.spent_time_s = j.at("spent_time_s").get<double>();
  const auto area = area_from_string(j.at("area").get<std::string>());
  if (!area) throw Error(ErrorKind::SchemaMismatch, "unknown area tag in trajectory file");
  p.area = *area;
  return p;
}

}  // namespace

std::string trajectory_to_json(const Trajectory& traj) {
  json points = json::array();
  for (const auto& p : traj.points) points.push_back(point_to_json(p));
  return json{{"agent_id", traj.agent_id}, {"points", std::move(points)}}.dump();
}

Trajectory trajectory_from_json(const std::string& text) {
  const auto j = json::parse(text);
  Trajectory traj;
  traj.agent_id = j.at("agent_id").get<std::int64_t>();
  for (const auto& p : j.at("points")) traj.points.push_back(point_from_json(p, traj.agent_id));
  return traj;
}

void write_trajectories(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories) {
  std::string out;
  for (const auto& t : trajectories) {
    out += trajectory_to_json(t);
    out += '\n';
  }
  csv::write_file(path, out);
}

std::vector<Trajectory> read_trajectories(const std::filesystem::path& path) {
  const auto text = csv::read_file(path);
  std::vector<Trajectory> out;
  for (const auto line : csv::lines(text)) {
    if (csv::trim(line).empty()) continue;
    out.push_back(trajectory_from_json(std::string(line)));
  }
  return out;
}

}  // namespace xwalk
