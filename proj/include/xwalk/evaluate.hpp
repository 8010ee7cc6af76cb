#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "xwalk/features.hpp"
#include "xwalk/ingest.hpp"
#include "xwalk/nn/models.hpp"

namespace xwalk {

struct ErrorMetrics {
  double mse = 0.0;
  double rmse = 0.0;
  std::size_t n = 0;
};

/// Throws EmptyTestSet for empty input, DimensionMismatch for unequal sizes.
ErrorMetrics compute_metrics(const Eigen::VectorXd& predicted, const Eigen::VectorXd& target);

struct GridCell {
  nn::Architecture architecture = nn::Architecture::Gru;
  int window = 10;
  bool include_subclass = true;
  ErrorMetrics metrics;
};

struct EvalGrid {
  std::vector<GridCell> cells;
  std::optional<std::size_t> best;  // lowest MSE among cells with the sub-class flag
};

/// Predictions for one trained cell over its held-out windows.
struct GridRun {
  nn::Architecture architecture = nn::Architecture::Gru;
  int window = 10;
  bool include_subclass = true;
  Eigen::VectorXd predicted;
  Eigen::VectorXd target;
};

/// Throws EmptyTestSet when any run has no held-out windows.
EvalGrid evaluate_grid(const std::vector<GridRun>& runs);

struct AblationPair {
  nn::Architecture architecture = nn::Architecture::Gru;
  int window = 10;
  double mse_with = 0.0;
  double mse_without = 0.0;
  double difference = 0.0;  // mse_without - mse_with; positive when the flag helps
};

/// Pairs every flagged cell with the unflagged cell of the same
/// (architecture, window). Unpaired cells are skipped.
std::vector<AblationPair> ablation_subclass(const EvalGrid& grid);

/// Same pairing over two explicit cell lists. Swapping the arguments negates
/// every difference.
std::vector<AblationPair> ablation_pairs(const std::vector<GridCell>& with, const std::vector<GridCell>& without);

/// Tukey box summary: type-7 quartiles, whiskers at the most extreme points
/// within 1.5 IQR of the box.
struct BoxStats {
  std::size_t n = 0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;

  double iqr() const { return q3 - q1; }
};

BoxStats box_stats(std::vector<double> values);

/// Linear-interpolated quantile of sorted data, q in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double q);

struct TrajectoryError {
  std::int64_t agent_id = 0;
  std::size_t windows = 0;
  double mse = 0.0;
  double rmse = 0.0;
};

struct TrajectoryErrorReport {
  std::vector<TrajectoryError> per_trajectory;  // by agent id
  BoxStats rmse_box;
};

/// Groups windows by agent id.
TrajectoryErrorReport per_trajectory_rmse(const Eigen::VectorXd& predicted, const WindowDataset& data);

enum class Verdict { CanCross, CannotCross };
std::string_view to_string(Verdict v);

struct CrossingDecision {
  std::int64_t agent_id = 0;
  double predicted_arrival_s = 0.0;
  double left_green_s = 0.0;  // 0 when the signal is not green
  double buffer_s = 3.0;
  bool green = false;
  Verdict verdict = Verdict::CannotCross;
};

inline constexpr double kMinBufferS = 3.0;
inline constexpr double kMaxBufferS = 5.0;

/// max(predicted, 0) + buffer <= left_green.
bool can_cross(double predicted_arrival_s, double left_green_s, double buffer_s);

/// Reads the signal state of `area` at `t_now_ms`. Not green means
/// cannot_cross. Throws TimelineGap outside the timeline and InvalidArgument
/// for a buffer outside [3, 5] s.
CrossingDecision decide_crossing(double predicted_arrival_s, const PhaseTimeline& timeline, Area area,
                                 std::int64_t t_now_ms, double buffer_s, std::int64_t agent_id = 0);

nlohmann::json to_json(const ErrorMetrics& m);
nlohmann::json to_json(const GridCell& c);
nlohmann::json to_json(const AblationPair& p);
nlohmann::json to_json(const BoxStats& b);
nlohmann::json to_json(const CrossingDecision& d);

}  // namespace xwalk
