#include "xwalk/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "xwalk/csv.hpp"
#include "xwalk/error.hpp"

namespace xwalk {

using nlohmann::json;

namespace {

ConvexPolygon rect(double x0, double x1, double y0, double y1) {
  return ConvexPolygon({Vec2(x0, y0), Vec2(x1, y0), Vec2(x1, y1), Vec2(x0, y1)});
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double truncated_normal(std::mt19937_64& rng, double mean, double sd, double lo, double hi) {
  if (sd <= 0.0) return std::clamp(mean, lo, hi);
  std::normal_distribution<double> dist(mean, sd);
  for (int i = 0; i < 1000; ++i) {
    const double v = dist(rng);
    if (v >= lo && v <= hi) return v;
  }
  return std::clamp(mean, lo, hi);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  if (hi <= lo) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool chance(std::mt19937_64& rng, double p) { return p > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

struct Bounds {
  Vec2 lo;
  Vec2 hi;
};

Bounds bounds_of(const ConvexPolygon& poly) {
  Bounds b{poly.vertices().front(), poly.vertices().front()};
  for (const auto& v : poly.vertices()) {
    b.lo = b.lo.cwiseMin(v);
    b.hi = b.hi.cwiseMax(v);
  }
  return b;
}

/// Straight path along the crosswalk's long axis with `approach` meters of
/// sidewalk on either side.
void set_crossing_path(AgentPlan& plan, const ConvexPolygon& poly, double approach, double lateral, bool reverse) {
  const Bounds b = bounds_of(poly);
  const Vec2 center = (b.lo + b.hi) / 2.0;
  const Vec2 extent = b.hi - b.lo;
  const bool along_x = extent.x() >= extent.y();
  const Vec2 axis = along_x ? Vec2::UnitX() : Vec2::UnitY();
  const Vec2 perp = along_x ? Vec2::UnitY() : Vec2::UnitX();
  const double half_long = (along_x ? extent.x() : extent.y()) / 2.0;
  const double half_short = (along_x ? extent.y() : extent.x()) / 2.0;
  plan.direction = reverse ? Vec2(-axis) : axis;
  plan.origin = center + lateral * half_short * perp - plan.direction * (half_long + approach);
  plan.path_length = 2.0 * (half_long + approach);
  plan.crossing_start_m = approach;
  plan.crossing_end_m = approach + 2.0 * half_long;
}

double crossing_time(const AgentPlan& plan, double speed) { return (plan.crossing_end_m - plan.crossing_start_m) / speed; }

/// Motion that reaches the crosswalk edge at `t_enter` and keeps `speed`.
void plan_constant(AgentPlan& plan, double t_enter, double speed) {
  plan.segments = {{t_enter - plan.crossing_start_m / speed, speed}};
}

void plan_anomaly(AgentPlan& plan, const ScenarioConfig& config) {
  const int phase = config.phase_map.at(plan.crossing);
  const auto greens = green_windows(config, phase);
  const auto k = static_cast<std::size_t>(plan.green_index);
  const double speed = plan.segments.front().speed;
  const double half = (plan.crossing_end_m - plan.crossing_start_m) / 2.0;
  plan.accelerates = false;
  if (plan.anomaly == AnomalyKind::WaitsForGreenMidCrossing) {
    // Reach mid-crossing just before the green ends, stand through the red.
    const double t_mid = greens[k].second - 1.0;
    const double t_start = t_mid - (plan.crossing_start_m + half) / speed;
    plan.segments = {{t_start, speed}, {t_mid, 0.0}, {greens[k + 1].first, speed}};
  } else if (plan.anomaly == AnomalyKind::ViolationCrosser) {
    const double red = config.cycle_s - config.green_s;
    const double t_enter = greens[k].second + std::max(0.5, red / 2.0 - half / speed);
    plan_constant(plan, t_enter, speed);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

ScenarioConfig ScenarioConfig::defaults() {
  ScenarioConfig c;
  c.areas.crossings = {rect(-6, 6, 8, 12), rect(8, 12, -6, 6), rect(-6, 6, -12, -8), rect(-12, -8, -6, 6)};
  c.phase_map = {{Area::Crossing1, 2}, {Area::Crossing2, 4}, {Area::Crossing3, 2}, {Area::Crossing4, 4}};
  c.phase_offsets_s = {{2, 5.0}, {4, 40.0}};
  c.wheelchair.speed_mean = 1.17;
  c.wheelchair.speed_std = 21.1 / 60.0;
  c.wheelchair.speed_min = 0.6;
  c.wheelchair.speed_max = 1.45;
  c.wheelchair.height_min = 1.15;
  c.wheelchair.height_max = 1.45;
  c.wheelchair.width_mean = 0.75;
  c.wheelchair.length_mean = 0.75;
  c.wheelchair.size_std = 0.03;
  c.wheelchair.yaw_noise = 0.1;
  return c;
}

ScenarioConfig ScenarioConfig::two_speed() {
  ScenarioConfig c = defaults();
  for (ClassPopulation* p : {&c.normal, &c.wheelchair}) {
    p->height_min = 1.2;
    p->height_max = 1.9;
    p->width_mean = 0.65;
    p->length_mean = 0.65;
    p->size_std = 0.05;
    p->yaw_noise = 0.3;
  }
  c.normal.speed_mean = 1.6;
  c.normal.speed_std = 0.08;
  c.normal.speed_min = 1.4;
  c.normal.speed_max = 1.8;
  c.wheelchair.speed_mean = 0.8;
  c.wheelchair.speed_std = 0.08;
  c.wheelchair.speed_min = 0.6;
  c.wheelchair.speed_max = 1.0;
  c.accel_probability = 0.0;
  c.steady_fraction = 0.0;
  c.n_normal = 60;
  c.n_wheelchair = 60;
  c.approach_min_m = 1.0;
  c.approach_max_m = 8.0;
  c.position_noise = 0.3;
  c.velocity_noise = 0.8;
  c.label_flip_probability = 0.0;
  return c;
}

ScenarioConfig ScenarioConfig::zero_noise() {
  ScenarioConfig c = defaults();
  c.normal.yaw_noise = 0.0;
  c.wheelchair.yaw_noise = 0.0;
  c.normal.size_std = 0.0;
  c.wheelchair.size_std = 0.0;
  c.accel_probability = 0.0;
  c.steady_fraction = 0.0;
  c.steady_yaw_noise = 0.0;
  c.position_noise = 0.0;
  c.velocity_noise = 0.0;
  c.size_noise = 0.0;
  c.label_flip_probability = 0.0;
  return c;
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); };
  if (!(frame_interval_s > 0.0)) fail("frame interval must be positive");
  if (!(cycle_s > 0.0) || !(green_s > 0.0) || green_s >= cycle_s) fail("green must be shorter than the cycle");
  if (cycles < 4) fail("at least 4 signal cycles are needed");
  if (n_normal < 0 || n_wheelchair < 0 || n_vehicle < 0 || n_noise_tracks < 0 || n_non_crossing < 0) {
    fail("agent counts must be non-negative");
  }
  if (!(normal.speed_mean > wheelchair.speed_mean)) fail("normal mean speed must exceed wheelchair mean speed");
  for (const ClassPopulation* p : {&normal, &wheelchair}) {
    if (!(p->speed_min > 0.0) || p->speed_min > p->speed_max) fail("speed bounds must be positive and ordered");
    if (p->height_min > p->height_max || p->speed_std < 0.0 || p->size_std < 0.0 || p->yaw_noise < 0.0) {
      fail("class population has invalid spreads or bounds");
    }
  }
  for (double p : {accel_probability, steady_fraction, label_flip_probability}) {
    if (p < 0.0 || p > 1.0) fail("probabilities must lie in [0, 1]");
  }
  if (!(accel_factor > 0.0) || !(accel_lead_s > 0.0)) fail("acceleration parameters must be positive");
  if (!(steady_speed_min > 0.0) || steady_speed_min > steady_speed_max) fail("steady speed bounds invalid");
  if (approach_min_m < 0.0 || approach_min_m > approach_max_m) fail("approach bounds invalid");
  if (position_noise < 0.0 || velocity_noise < 0.0 || size_noise < 0.0 || steady_yaw_noise < 0.0) {
    fail("noise levels must be non-negative");
  }
  try {
    areas.validate();
  } catch (const Error& e) {
    fail(std::string("area polygons: ") + e.what());
  }
  for (Area a : kCrossings) {
    const auto it = phase_map.find(a);
    if (it == phase_map.end()) fail(std::string(to_string(a)) + " has no phase");
    if (!phase_offsets_s.contains(it->second)) fail("phase " + std::to_string(it->second) + " has no offset");
  }
}

namespace {

json population_to_json(const ClassPopulation& p) {
  return json{{"speed_mean", p.speed_mean},   {"speed_std", p.speed_std},     {"speed_min", p.speed_min},
              {"speed_max", p.speed_max},     {"height_min", p.height_min},   {"height_max", p.height_max},
              {"width_mean", p.width_mean},   {"length_mean", p.length_mean}, {"size_std", p.size_std},
              {"yaw_noise", p.yaw_noise}};
}

ClassPopulation population_from_json(const json& j, ClassPopulation p) {
  p.speed_mean = j.value("speed_mean", p.speed_mean);
  p.speed_std = j.value("speed_std", p.speed_std);
  p.speed_min = j.value("speed_min", p.speed_min);
  p.speed_max = j.value("speed_max", p.speed_max);
  p.height_min = j.value("height_min", p.height_min);
  p.height_max = j.value("height_max", p.height_max);
  p.width_mean = j.value("width_mean", p.width_mean);
  p.length_mean = j.value("length_mean", p.length_mean);
  p.size_std = j.value("size_std", p.size_std);
  p.yaw_noise = j.value("yaw_noise", p.yaw_noise);
  return p;
}

}  // namespace

json ScenarioConfig::to_json() const {
  json areas_j = json::object();
  for (std::size_t i = 0; i < areas.crossings.size(); ++i) {
    json verts = json::array();
    for (const auto& v : areas.crossings[i].vertices()) verts.push_back({v.x(), v.y()});
    areas_j[std::string(to_string(kCrossings[i]))] = verts;
  }
  json phases = json::object();
  for (const auto& [a, p] : phase_map) phases[std::string(to_string(a))] = p;
  json offsets = json::object();
  for (const auto& [p, o] : phase_offsets_s) offsets[std::to_string(p)] = o;
  return json{{"areas", areas_j},
              {"phase_map", phases},
              {"phase_offsets_s", offsets},
              {"cycle_s", cycle_s},
              {"green_s", green_s},
              {"cycles", cycles},
              {"n_normal", n_normal},
              {"n_wheelchair", n_wheelchair},
              {"n_vehicle", n_vehicle},
              {"n_noise_tracks", n_noise_tracks},
              {"n_non_crossing", n_non_crossing},
              {"normal", population_to_json(normal)},
              {"wheelchair", population_to_json(wheelchair)},
              {"accel_probability", accel_probability},
              {"accel_factor", accel_factor},
              {"accel_lead_s", accel_lead_s},
              {"steady_fraction", steady_fraction},
              {"steady_speed_min", steady_speed_min},
              {"steady_speed_max", steady_speed_max},
              {"steady_yaw_noise", steady_yaw_noise},
              {"frame_interval_s", frame_interval_s},
              {"approach_min_m", approach_min_m},
              {"approach_max_m", approach_max_m},
              {"position_noise", position_noise},
              {"velocity_noise", velocity_noise},
              {"size_noise", size_noise},
              {"label_flip_probability", label_flip_probability},
              {"base_timestamp_ms", base_timestamp_ms},
              {"seed", seed}};
}

ScenarioConfig ScenarioConfig::from_json(const json& j, const ScenarioConfig& base) {
  ScenarioConfig c = base;
  try {
    if (j.contains("preset")) {
      const auto name = j.at("preset").get<std::string>();
      if (name == "default") c = defaults();
      else if (name == "two_speed") c = two_speed();
      else if (name == "zero_noise") c = zero_noise();
      else throw Error(ErrorKind::InvalidConfig, "unknown scenario preset '" + name + "'");
    }
    if (j.contains("areas")) {
      for (const auto& [name, verts] : j.at("areas").items()) {
        const auto a = area_from_string(name);
        if (!a || !is_crossing(*a)) throw Error(ErrorKind::InvalidConfig, "unknown crossing '" + name + "'");
        std::vector<Vec2> pts;
        for (const auto& v : verts) pts.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
        c.areas.crossings[static_cast<std::size_t>(index_of(*a))] = ConvexPolygon(std::move(pts));
      }
    }
    if (j.contains("phase_map")) {
      for (const auto& [name, phase] : j.at("phase_map").items()) {
        const auto a = area_from_string(name);
        if (!a || !is_crossing(*a)) throw Error(ErrorKind::InvalidConfig, "unknown crossing '" + name + "'");
        c.phase_map[*a] = phase.get<int>();
      }
    }
    if (j.contains("phase_offsets_s")) {
      c.phase_offsets_s.clear();
      for (const auto& [phase, off] : j.at("phase_offsets_s").items()) c.phase_offsets_s[std::stoi(phase)] = off.get<double>();
    }
    c.cycle_s = j.value("cycle_s", c.cycle_s);
    c.green_s = j.value("green_s", c.green_s);
    c.cycles = j.value("cycles", c.cycles);
    c.n_normal = j.value("n_normal", c.n_normal);
    c.n_wheelchair = j.value("n_wheelchair", c.n_wheelchair);
    c.n_vehicle = j.value("n_vehicle", c.n_vehicle);
    c.n_noise_tracks = j.value("n_noise_tracks", c.n_noise_tracks);
    c.n_non_crossing = j.value("n_non_crossing", c.n_non_crossing);
    if (j.contains("normal")) c.normal = population_from_json(j.at("normal"), c.normal);
    if (j.contains("wheelchair")) c.wheelchair = population_from_json(j.at("wheelchair"), c.wheelchair);
    c.accel_probability = j.value("accel_probability", c.accel_probability);
    c.accel_factor = j.value("accel_factor", c.accel_factor);
    c.accel_lead_s = j.value("accel_lead_s", c.accel_lead_s);
    c.steady_fraction = j.value("steady_fraction", c.steady_fraction);
    c.steady_speed_min = j.value("steady_speed_min", c.steady_speed_min);
    c.steady_speed_max = j.value("steady_speed_max", c.steady_speed_max);
    c.steady_yaw_noise = j.value("steady_yaw_noise", c.steady_yaw_noise);
    c.frame_interval_s = j.value("frame_interval_s", c.frame_interval_s);
    c.approach_min_m = j.value("approach_min_m", c.approach_min_m);
    c.approach_max_m = j.value("approach_max_m", c.approach_max_m);
    c.position_noise = j.value("position_noise", c.position_noise);
    c.velocity_noise = j.value("velocity_noise", c.velocity_noise);
    c.size_noise = j.value("size_noise", c.size_noise);
    c.label_flip_probability = j.value("label_flip_probability", c.label_flip_probability);
    c.base_timestamp_ms = j.value("base_timestamp_ms", c.base_timestamp_ms);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("scenario config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Names

std::string_view to_string(AgentKind k) {
  switch (k) {
    case AgentKind::Normal: return "normal";
    case AgentKind::Wheelchair: return "wheelchair";
    case AgentKind::Vehicle: return "vehicle";
    case AgentKind::NoiseTrack: return "noise_track";
    case AgentKind::NonCrossing: return "non_crossing";
  }
  return "?";
}

std::string_view to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::None: return "none";
    case AnomalyKind::WaitsForGreenMidCrossing: return "waits_for_green_mid_crossing";
    case AnomalyKind::ViolationCrosser: return "violation_crosser";
  }
  return "?";
}

std::optional<AgentKind> agent_kind_from_string(std::string_view s) {
  for (auto k : {AgentKind::Normal, AgentKind::Wheelchair, AgentKind::Vehicle, AgentKind::NoiseTrack,
                 AgentKind::NonCrossing}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

std::optional<AnomalyKind> anomaly_from_string(std::string_view s) {
  for (auto k : {AnomalyKind::None, AnomalyKind::WaitsForGreenMidCrossing, AnomalyKind::ViolationCrosser}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

SubClass GroundTruth::true_subclass() const {
  if (kind == AgentKind::Normal) return SubClass::Normal;
  if (kind == AgentKind::Wheelchair) return SubClass::Wheelchair;
  return SubClass::Unknown;
}

// ---------------------------------------------------------------------------
// Motion

double AgentPlan::distance_at(double t_s) const {
  double s = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const double end = i + 1 < segments.size() ? segments[i + 1].start_s : std::numeric_limits<double>::infinity();
    if (t_s <= end) {
      s += segments[i].speed * std::max(0.0, t_s - segments[i].start_s);
      return std::min(s, path_length);
    }
    s += segments[i].speed * (end - segments[i].start_s);
  }
  return std::min(s, path_length);
}

double AgentPlan::speed_at(double t_s) const {
  double speed = segments.front().speed;
  for (const auto& seg : segments) {
    if (seg.start_s <= t_s) speed = seg.speed;
  }
  return speed;
}

double AgentPlan::end_s() const {
  double s = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const double end = i + 1 < segments.size() ? segments[i + 1].start_s : std::numeric_limits<double>::infinity();
    const double v = segments[i].speed;
    if (v > 0.0 && s + v * (end - segments[i].start_s) >= path_length) return segments[i].start_s + (path_length - s) / v;
    if (std::isfinite(end)) s += v * (end - segments[i].start_s);
  }
  throw Error(ErrorKind::InvalidConfig, "agent " + std::to_string(agent_id) + " never completes its path");
}

std::vector<std::pair<double, double>> green_windows(const ScenarioConfig& config, int phase) {
  const auto it = config.phase_offsets_s.find(phase);
  if (it == config.phase_offsets_s.end()) throw Error(ErrorKind::InvalidConfig, "phase " + std::to_string(phase) + " has no offset");
  std::vector<std::pair<double, double>> out;
  for (int k = 0; k < config.cycles; ++k) {
    const double start = it->second + k * config.cycle_s;
    out.emplace_back(start, start + config.green_s);
  }
  return out;
}

namespace {

std::vector<SpatEvent> build_spat(const ScenarioConfig& config) {
  std::vector<SpatEvent> events;
  for (const auto& [phase, offset] : config.phase_offsets_s) {
    for (const auto& [g0, g1] : green_windows(config, phase)) {
      events.push_back({config.base_timestamp_ms + std::llround(g0 * 1000.0), phase, PhaseEvent::Begin});
      events.push_back({config.base_timestamp_ms + std::llround(g1 * 1000.0), phase, PhaseEvent::End});
    }
  }
  std::stable_sort(events.begin(), events.end(), [](const SpatEvent& a, const SpatEvent& b) {
    return std::tie(a.timestamp_ms, a.phase_id) < std::tie(b.timestamp_ms, b.phase_id);
  });
  return events;
}

struct Rendered {
  std::vector<TrackRecord> records;
  std::optional<std::int64_t> exit_ms;
};

Rendered render(const AgentPlan& plan, const ScenarioConfig& config) {
  Rendered out;
  std::mt19937_64 rng(plan.noise_seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double dt = config.frame_interval_s;
  const auto k0 = static_cast<std::int64_t>(std::ceil(plan.start_s() / dt - 1e-9));
  const auto k1 = static_cast<std::int64_t>(std::floor(plan.end_s() / dt + 1e-9));
  const double heading = std::atan2(plan.direction.y(), plan.direction.x());
  const bool crosser = plan.kind == AgentKind::Normal || plan.kind == AgentKind::Wheelchair;
  for (std::int64_t k = k0; k <= k1; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Vec2 truth = plan.origin + plan.direction * plan.distance_at(t);
    const double speed = plan.speed_at(t);
    TrackRecord r;
    r.timestamp_ms = config.base_timestamp_ms + std::llround(t * 1000.0);
    r.agent_id = plan.agent_id;
    r.label = plan.label;
    if (plan.label == AgentLabel::Pedestrian && chance(rng, config.label_flip_probability)) r.label = AgentLabel::Cyclist;
    r.confidence = 0.9;
    r.pos_x = truth.x() + config.position_noise * unit(rng);
    r.pos_y = truth.y() + config.position_noise * unit(rng);
    r.box_length = std::max(0.05, plan.length + config.size_noise * unit(rng));
    r.box_width = std::max(0.05, plan.width + config.size_noise * unit(rng));
    r.box_height = std::max(0.05, plan.height + config.size_noise * unit(rng));
    r.yaw = normalize_angle(heading + plan.yaw_noise * unit(rng));
    r.vel_x = plan.direction.x() * speed + config.velocity_noise * unit(rng);
    r.vel_y = plan.direction.y() * speed + config.velocity_noise * unit(rng);
    r.tracking_status = 1;
    if (crosser && is_crossing(config.areas.classify(truth))) out.exit_ms = r.timestamp_ms;
    out.records.push_back(r);
  }
  return out;
}

void render_scene(Scene& scene) {
  scene.records.clear();
  scene.truth.clear();
  for (const auto& plan : scene.agents) {
    Rendered r = render(plan, scene.config);
    GroundTruth g;
    g.agent_id = plan.agent_id;
    g.kind = plan.kind;
    g.anomaly = plan.anomaly;
    g.exit_time_ms = r.exit_ms;
    scene.truth.push_back(g);
    scene.records.insert(scene.records.end(), r.records.begin(), r.records.end());
  }
  std::stable_sort(scene.records.begin(), scene.records.end(), [](const TrackRecord& a, const TrackRecord& b) {
    return std::tie(a.timestamp_ms, a.agent_id) < std::tie(b.timestamp_ms, b.agent_id);
  });
  std::sort(scene.truth.begin(), scene.truth.end(),
            [](const GroundTruth& a, const GroundTruth& b) { return a.agent_id < b.agent_id; });
}

AgentPlan plan_crosser(const ScenarioConfig& config, std::mt19937_64& rng, std::int64_t id, AgentKind kind) {
  AgentPlan plan;
  plan.agent_id = id;
  plan.kind = kind;
  plan.label = AgentLabel::Pedestrian;
  plan.noise_seed = mix_seed(config.seed, static_cast<std::uint64_t>(id));
  const auto area_idx = std::uniform_int_distribution<int>(0, kNumCrossings - 1)(rng);
  plan.crossing = kCrossings[static_cast<std::size_t>(area_idx)];
  plan.green_index = std::uniform_int_distribution<int>(1, config.cycles - 3)(rng);
  const double approach = uniform(rng, config.approach_min_m, config.approach_max_m);
  const double lateral = uniform(rng, -0.6, 0.6);
  const bool reverse = chance(rng, 0.5);
  set_crossing_path(plan, config.areas.crossings[static_cast<std::size_t>(area_idx)], approach, lateral, reverse);

  const ClassPopulation& pop = kind == AgentKind::Normal ? config.normal : config.wheelchair;
  double speed = truncated_normal(rng, pop.speed_mean, pop.speed_std, pop.speed_min, pop.speed_max);
  plan.yaw_noise = pop.yaw_noise;
  plan.height = uniform(rng, pop.height_min, pop.height_max);
  plan.width = std::max(0.1, pop.width_mean + pop.size_std * std::normal_distribution<double>(0.0, 1.0)(rng));
  plan.length = std::max(0.1, pop.length_mean + pop.size_std * std::normal_distribution<double>(0.0, 1.0)(rng));
  if (kind == AgentKind::Normal) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (u < config.steady_fraction) {
      speed = uniform(rng, config.steady_speed_min, config.steady_speed_max);
      plan.yaw_noise = config.steady_yaw_noise;
    } else if (u < config.steady_fraction + config.accel_probability) {
      plan.accelerates = true;
    }
  }

  const int phase = config.phase_map.at(plan.crossing);
  const auto [g0, g1] = green_windows(config, phase)[static_cast<std::size_t>(plan.green_index)];
  const double cross = crossing_time(plan, speed);
  if (plan.accelerates) {
    // Still crossing when the hurry starts, with some crossing before it.
    const double lead = config.accel_lead_s;
    const double before = uniform(rng, 0.5, std::max(0.6, 0.6 * cross));
    const double t_enter = g1 - lead - before;
    plan.segments = {{t_enter - plan.crossing_start_m / speed, speed}, {g1 - lead, speed * config.accel_factor}};
  } else {
    const double t_enter = g0 + uniform(rng, 0.0, std::max(0.0, config.green_s - cross - 1.0));
    plan_constant(plan, t_enter, speed);
  }
  return plan;
}

}  // namespace

Scene generate_scene(const ScenarioConfig& config) {
  config.validate();
  Scene scene;
  scene.config = config;
  scene.spat = build_spat(config);
  std::mt19937_64 rng(config.seed);
  std::int64_t next_id = 1;
  const double span_start = std::min_element(config.phase_offsets_s.begin(), config.phase_offsets_s.end(),
                                             [](const auto& a, const auto& b) { return a.second < b.second; })
                                ->second;
  double span_end = 0.0;
  for (const auto& [phase, off] : config.phase_offsets_s) {
    span_end = std::max(span_end, off + (config.cycles - 1) * config.cycle_s + config.green_s);
  }

  // Interleave classes so ids do not reveal the class.
  std::vector<AgentKind> crossers;
  crossers.insert(crossers.end(), static_cast<std::size_t>(config.n_normal), AgentKind::Normal);
  crossers.insert(crossers.end(), static_cast<std::size_t>(config.n_wheelchair), AgentKind::Wheelchair);
  std::shuffle(crossers.begin(), crossers.end(), rng);
  for (AgentKind kind : crossers) scene.agents.push_back(plan_crosser(config, rng, next_id++, kind));

  for (int i = 0; i < config.n_vehicle; ++i) {
    AgentPlan plan;
    plan.agent_id = next_id++;
    plan.kind = AgentKind::Vehicle;
    plan.label = AgentLabel::Vehicle;
    plan.noise_seed = mix_seed(config.seed, static_cast<std::uint64_t>(plan.agent_id));
    const bool along_x = chance(rng, 0.5);
    const double sign = chance(rng, 0.5) ? 1.0 : -1.0;
    const double lane = uniform(rng, -4.0, 4.0);
    const Vec2 axis = along_x ? Vec2::UnitX() : Vec2::UnitY();
    const Vec2 perp = along_x ? Vec2::UnitY() : Vec2::UnitX();
    plan.direction = sign * axis;
    plan.origin = lane * perp - plan.direction * 40.0;
    plan.path_length = 80.0;
    plan.length = 4.5;
    plan.width = 1.8;
    plan.height = 1.5;
    plan.yaw_noise = 0.02;
    const double speed = uniform(rng, 6.0, 10.0);
    plan.segments = {{uniform(rng, span_start + 10.0, span_end - 20.0), speed}};
    scene.agents.push_back(plan);
  }

  for (int i = 0; i < config.n_noise_tracks; ++i) {
    AgentPlan plan;
    plan.agent_id = next_id++;
    plan.kind = AgentKind::NoiseTrack;
    plan.noise_seed = mix_seed(config.seed, static_cast<std::uint64_t>(plan.agent_id));
    const auto idx = std::uniform_int_distribution<int>(0, kNumCrossings - 1)(rng);
    plan.crossing = kCrossings[static_cast<std::size_t>(idx)];
    plan.origin = config.areas.crossings[static_cast<std::size_t>(idx)].centroid();
    const int frames = std::uniform_int_distribution<int>(5, 9)(rng);
    const double speed = 0.3;
    plan.path_length = speed * (frames - 1) * config.frame_interval_s;
    const double t0 = std::round(uniform(rng, span_start + 10.0, span_end - 20.0) / config.frame_interval_s) *
                      config.frame_interval_s;
    plan.segments = {{t0, speed}};
    plan.height = 1.7;
    plan.yaw_noise = 0.5;
    scene.agents.push_back(plan);
  }

  const Bounds north = bounds_of(config.areas.crossings[0]);
  for (int i = 0; i < config.n_non_crossing; ++i) {
    AgentPlan plan;
    plan.agent_id = next_id++;
    plan.kind = AgentKind::NonCrossing;
    plan.noise_seed = mix_seed(config.seed, static_cast<std::uint64_t>(plan.agent_id));
    plan.origin = Vec2(north.lo.x() - 2.0, north.hi.y() + 4.0);
    plan.path_length = north.hi.x() - north.lo.x() + 4.0;
    plan.height = 1.7;
    plan.yaw_noise = 0.3;
    plan.segments = {{uniform(rng, span_start + 10.0, span_end - 40.0), config.normal.speed_mean}};
    scene.agents.push_back(plan);
  }

  render_scene(scene);
  return scene;
}

Scene inject_anomaly(Scene scene, AnomalyKind kind, std::optional<std::int64_t> agent_id) {
  if (kind == AnomalyKind::None) throw Error(ErrorKind::UnknownAnomaly, "no anomaly kind given");
  AgentPlan* target = nullptr;
  for (auto& plan : scene.agents) {
    const bool crosser = plan.kind == AgentKind::Normal || plan.kind == AgentKind::Wheelchair;
    if (agent_id ? plan.agent_id == *agent_id : (crosser && plan.anomaly == AnomalyKind::None)) {
      target = &plan;
      break;
    }
  }
  if (!target) {
    throw Error(ErrorKind::UnknownAgent, agent_id ? "agent " + std::to_string(*agent_id) + " is not in the scene"
                                                  : std::string("scene has no crossing agent to modify"));
  }
  if (target->kind != AgentKind::Normal && target->kind != AgentKind::Wheelchair) {
    throw Error(ErrorKind::UnknownAgent, "agent " + std::to_string(target->agent_id) + " is not a crossing pedestrian");
  }
  if (target->green_index + 1 >= scene.config.cycles) {
    throw Error(ErrorKind::InvalidConfig, "anomaly needs a following signal cycle");
  }
  target->anomaly = kind;
  plan_anomaly(*target, scene.config);
  render_scene(scene);
  return scene;
}

Scene inject_anomaly(Scene scene, std::string_view kind, std::optional<std::int64_t> agent_id) {
  const auto k = anomaly_from_string(kind);
  if (!k || *k == AnomalyKind::None) throw Error(ErrorKind::UnknownAnomaly, "unknown anomaly '" + std::string(kind) + "'");
  return inject_anomaly(std::move(scene), *k, agent_id);
}

// ---------------------------------------------------------------------------
// Files

std::string format_ground_truth_csv(const std::vector<GroundTruth>& truth) {
  std::string out = "agent_id,true_class,true_exit_time_ms,anomaly\n";
  for (const auto& g : truth) {
    out += std::to_string(g.agent_id) + ',' + std::string(to_string(g.kind)) + ',' +
           (g.exit_time_ms ? std::to_string(*g.exit_time_ms) : std::string()) + ',' + std::string(to_string(g.anomaly)) +
           '\n';
  }
  return out;
}

std::vector<GroundTruth> parse_ground_truth_csv(std::string_view text) {
  std::vector<GroundTruth> out;
  bool first = true;
  for (const auto line : csv::lines(text)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 4) throw Error(ErrorKind::SchemaMismatch, "ground truth rows need 4 fields");
    if (first && f[0] == "agent_id") {
      first = false;
      continue;
    }
    first = false;
    GroundTruth g;
    const auto id = csv::parse_int(f[0]);
    const auto kind = agent_kind_from_string(csv::trim(f[1]));
    const auto anomaly = anomaly_from_string(csv::trim(f[3]));
    if (!id || !kind || !anomaly) throw Error(ErrorKind::SchemaMismatch, "bad ground truth row '" + std::string(line) + "'");
    g.agent_id = *id;
    g.kind = *kind;
    g.anomaly = *anomaly;
    if (!csv::trim(f[2]).empty()) {
      const auto t = csv::parse_int(f[2]);
      if (!t) throw Error(ErrorKind::SchemaMismatch, "bad exit time in '" + std::string(line) + "'");
      g.exit_time_ms = *t;
    }
    out.push_back(g);
  }
  return out;
}

SceneFiles write_scene(const Scene& scene, const std::filesystem::path& dir) {
  SceneFiles files{dir / "tracks.csv", dir / "spat.csv", dir / "ground_truth.csv"};
  csv::write_file(files.tracks, format_track_csv(scene.records));
  csv::write_file(files.spat, format_spat_csv(scene.spat));
  csv::write_file(files.ground_truth, format_ground_truth_csv(scene.truth));
  return files;
}

}  // namespace xwalk
