#include "xwalk/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "xwalk/csv.hpp"
#include "xwalk/error.hpp"

namespace xwalk {

double compute_arrival_target(const Trajectory& traj, std::size_t index) {
  const auto exit = traj.exit_index();
  if (!exit) throw Error(ErrorKind::NoCrossingExit, "trajectory " + std::to_string(traj.agent_id) + " has no crossing exit");
  if (index > *exit) {
    throw Error(ErrorKind::InvalidArgument, "point " + std::to_string(index) + " lies after the crossing exit");
  }
  const auto dt = traj.points[*exit].record.timestamp_ms - traj.points[index].record.timestamp_ms;
  return static_cast<double>(dt) / 1000.0;
}

std::vector<TrainingWindow> range_selection(const Trajectory& traj, std::size_t window) {
  if (window < 2) throw Error(ErrorKind::InvalidArgument, "window must hold at least 2 points");
  const auto exit = traj.exit_index();
  if (!exit) throw Error(ErrorKind::NoCrossingExit, "trajectory " + std::to_string(traj.agent_id) + " has no crossing exit");
  const std::size_t usable = *exit + 1;
  std::vector<TrainingWindow> out;
  if (usable < window) return out;
  const Area fallback = traj.primary_crossing();
  out.reserve(usable - window + 1);
  for (std::size_t start = 0; start + window <= usable; ++start) {
    TrainingWindow w;
    w.agent_id = traj.agent_id;
    w.window_start_index = start;
    w.points.assign(traj.points.begin() + static_cast<std::ptrdiff_t>(start),
                    traj.points.begin() + static_cast<std::ptrdiff_t>(start + window));
    w.target_s = compute_arrival_target(traj, start + window - 1);
    const Area last = w.points.back().area;
    w.governing_area = is_crossing(last) ? last : fallback;
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<TrainingWindow> random_selection(const std::vector<TrainingWindow>& windows, std::size_t m,
                                             std::uint64_t seed) {
  if (m > windows.size()) {
    throw Error(ErrorKind::SampleTooLarge, "cannot sample " + std::to_string(m) + " of " + std::to_string(windows.size()));
  }
  std::vector<std::size_t> idx(windows.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first m slots are a uniform sample.
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> dist(i, idx.size() - 1);
    std::swap(idx[i], idx[dist(rng)]);
  }
  std::vector<TrainingWindow> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.push_back(windows[idx[i]]);
  return out;
}

TrajectorySplit split_trajectories(std::vector<std::int64_t> ids, double train_fraction, double validation_fraction,
                                   std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0) || !(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw Error(ErrorKind::ConfigValidationError, "split fractions out of range");
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> dist(0, i - 1);
    std::swap(ids[i - 1], ids[dist(rng)]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ids.size())));
  const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n_train)));
  TrajectorySplit split;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i < n_val) split.validation.push_back(ids[i]);
    else if (i < n_train) split.train.push_back(ids[i]);
    else split.test.push_back(ids[i]);
  }
  for (auto* v : {&split.train, &split.validation, &split.test}) std::sort(v->begin(), v->end());
  return split;
}

// ---------------------------------------------------------------------------
// CSV checkpoint

std::string format_windows_csv(const std::vector<TrainingWindow>& windows) {
  std::string out =
      "# window,index,agent_id,start_index,target_s,governing_area,points\n"
      "# point,timestamp_ms,label,confidence,pos_x,pos_y,box_length,box_width,box_height,yaw,vel_x,vel_y,"
      "tracking_status,speed,spent_time_s,area\n";
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    out += "window," + std::to_string(i) + ',' + std::to_string(w.agent_id) + ',' +
           std::to_string(w.window_start_index) + ',' + csv::format_double(w.target_s) + ',' +
           std::string(to_string(w.governing_area)) + ',' + std::to_string(w.points.size()) + '\n';
    for (const auto& p : w.points) {
      const auto& r = p.record;
      out += "point," + std::to_string(r.timestamp_ms) + ',' + std::to_string(static_cast<int>(r.label));
      for (double d : {r.confidence, r.pos_x, r.pos_y, r.box_length, r.box_width, r.box_height, r.yaw, r.vel_x,
                       r.vel_y}) {
        out += ',';
        out += csv::format_double(d);
      }
      out += ',' + std::to_string(r.tracking_status) + ',' + csv::format_double(p.speed) + ',' +
             csv::format_double(p.spent_time_s) + ',' + std::string(to_string(p.area)) + '\n';
    }
  }
  return out;
}

namespace {

double need_double(std::string_view s) {
  const auto d = csv::parse_double(s);
  if (!d) throw Error(ErrorKind::SchemaMismatch, "bad number '" + std::string(s) + "' in windows file");
  return *d;
}

std::int64_t need_int(std::string_view s) {
  const auto d = csv::parse_int(s);
  if (!d) throw Error(ErrorKind::SchemaMismatch, "bad integer '" + std::string(s) + "' in windows file");
  return *d;
}

Area need_area(std::string_view s) {
  const auto a = area_from_string(csv::trim(s));
  if (!a) throw Error(ErrorKind::SchemaMismatch, "bad area '" + std::string(s) + "' in windows file");
  return *a;
}

}  // namespace

std::vector<TrainingWindow> parse_windows_csv(std::string_view text) {
  std::vector<TrainingWindow> out;
  std::size_t expected = 0;
  for (const auto line : csv::lines(text)) {
    if (line.empty() || line.front() == '#') continue;
    const auto f = csv::split(line);
    if (f[0] == "window") {
      if (!out.empty() && out.back().points.size() != expected) {
        throw Error(ErrorKind::SchemaMismatch, "window has fewer points than declared");
      }
      if (f.size() != 7) throw Error(ErrorKind::SchemaMismatch, "window header row needs 7 fields");
      TrainingWindow w;
      w.agent_id = need_int(f[2]);
      w.window_start_index = static_cast<std::size_t>(need_int(f[3]));
      w.target_s = need_double(f[4]);
      w.governing_area = need_area(f[5]);
      expected = static_cast<std::size_t>(need_int(f[6]));
      w.points.reserve(expected);
      out.push_back(std::move(w));
    } else if (f[0] == "point") {
      if (out.empty() || f.size() != 16) throw Error(ErrorKind::SchemaMismatch, "malformed point row");
      TrajectoryPoint p;
      auto& r = p.record;
      r.agent_id = out.back().agent_id;
      r.timestamp_ms = need_int(f[1]);
      r.label = static_cast<AgentLabel>(need_int(f[2]));
      r.confidence = need_double(f[3]);
      r.pos_x = need_double(f[4]);
      r.pos_y = need_double(f[5]);
      r.box_length = need_double(f[6]);
      r.box_width = need_double(f[7]);
      r.box_height = need_double(f[8]);
      r.yaw = need_double(f[9]);
      r.vel_x = need_double(f[10]);
      r.vel_y = need_double(f[11]);
      r.tracking_status = need_int(f[12]);
      p.speed = need_double(f[13]);
      p.spent_time_s = need_double(f[14]);
      p.area = need_area(f[15]);
      out.back().points.push_back(p);
    } else {
      throw Error(ErrorKind::SchemaMismatch, "unknown row kind '" + std::string(f[0]) + "'");
    }
  }
  if (!out.empty() && out.back().points.size() != expected) {
    throw Error(ErrorKind::SchemaMismatch, "window has fewer points than declared");
  }
  return out;
}

void write_windows(const std::filesystem::path& path, const std::vector<TrainingWindow>& windows) {
  csv::write_file(path, format_windows_csv(windows));
}

std::vector<TrainingWindow> read_windows(const std::filesystem::path& path) {
  return parse_windows_csv(csv::read_file(path));
}

}  // namespace xwalk
