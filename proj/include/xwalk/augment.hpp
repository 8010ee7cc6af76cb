#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "xwalk/preprocess.hpp"

namespace xwalk {

/// W consecutive points of one trajectory plus the seconds remaining, at the
/// window's last point, until the trajectory leaves its crossing.
struct TrainingWindow {
  std::int64_t agent_id = 0;
  std::size_t window_start_index = 0;
  double target_s = 0.0;
  Area governing_area = Area::Vehicle;  // crossing whose signal the window is read against
  std::vector<TrajectoryPoint> points;

  std::size_t window_end_index() const { return window_start_index + points.size() - 1; }
};

/// Seconds from point `index` to the last in-crossing point. Throws
/// NoCrossingExit when the trajectory never enters a crossing and
/// InvalidArgument for indices past the exit.
double compute_arrival_target(const Trajectory& traj, std::size_t index);

/// Stride-1 windows of `window` points over the prefix ending at the crossing
/// exit: max(0, exit_index + 1 - window + 1) windows. Needs window >= 2.
std::vector<TrainingWindow> range_selection(const Trajectory& traj, std::size_t window);

/// Uniform sample of `m` windows without replacement, in sampled order.
/// Throws SampleTooLarge when m exceeds the input size.
std::vector<TrainingWindow> random_selection(const std::vector<TrainingWindow>& windows, std::size_t m,
                                             std::uint64_t seed);

/// Trajectory-level partition so no trajectory contributes windows to more
/// than one side.
struct TrajectorySplit {
  std::vector<std::int64_t> train;
  std::vector<std::int64_t> validation;
  std::vector<std::int64_t> test;
};

/// `train_fraction` of the ids (rounded) go to training; `validation_fraction`
/// of those training ids are then held out for validation.
TrajectorySplit split_trajectories(std::vector<std::int64_t> ids, double train_fraction, double validation_fraction,
                                   std::uint64_t seed);

/// Flat checkpoint: a `window` header row followed by one `point` row per
/// window point.
std::string format_windows_csv(const std::vector<TrainingWindow>& windows);
std::vector<TrainingWindow> parse_windows_csv(std::string_view text);
void write_windows(const std::filesystem::path& path, const std::vector<TrainingWindow>& windows);
std::vector<TrainingWindow> read_windows(const std::filesystem::path& path);

}  // namespace xwalk
