#include "xwalk/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "xwalk/error.hpp"

namespace xwalk {

using nlohmann::json;

ErrorMetrics compute_metrics(const Eigen::VectorXd& predicted, const Eigen::VectorXd& target) {
  if (target.size() == 0) throw Error(ErrorKind::EmptyTestSet, "no test windows");
  if (predicted.size() != target.size()) throw Error(ErrorKind::DimensionMismatch, "prediction and target counts differ");
  ErrorMetrics m;
  m.n = static_cast<std::size_t>(target.size());
  m.mse = (predicted - target).squaredNorm() / static_cast<double>(m.n);
  m.rmse = std::sqrt(m.mse);
  return m;
}

EvalGrid evaluate_grid(const std::vector<GridRun>& runs) {
  EvalGrid grid;
  for (const auto& run : runs) {
    GridCell cell;
    cell.architecture = run.architecture;
    cell.window = run.window;
    cell.include_subclass = run.include_subclass;
    cell.metrics = compute_metrics(run.predicted, run.target);
    grid.cells.push_back(cell);
  }
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    if (!grid.cells[i].include_subclass) continue;
    if (!grid.best || grid.cells[i].metrics.mse < grid.cells[*grid.best].metrics.mse) grid.best = i;
  }
  return grid;
}

std::vector<AblationPair> ablation_pairs(const std::vector<GridCell>& with, const std::vector<GridCell>& without) {
  std::vector<AblationPair> out;
  for (const auto& a : with) {
    for (const auto& b : without) {
      if (a.architecture != b.architecture || a.window != b.window) continue;
      AblationPair p;
      p.architecture = a.architecture;
      p.window = a.window;
      p.mse_with = a.metrics.mse;
      p.mse_without = b.metrics.mse;
      p.difference = p.mse_without - p.mse_with;
      out.push_back(p);
      break;
    }
  }
  return out;
}

std::vector<AblationPair> ablation_subclass(const EvalGrid& grid) {
  std::vector<GridCell> with, without;
  for (const auto& c : grid.cells) (c.include_subclass ? with : without).push_back(c);
  return ablation_pairs(with, without);
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw Error(ErrorKind::InvalidArgument, "quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BoxStats box_stats(std::vector<double> values) {
  BoxStats b;
  b.n = values.size();
  if (values.empty()) return b;
  std::sort(values.begin(), values.end());
  b.min = values.front();
  b.max = values.back();
  b.q1 = quantile_sorted(values, 0.25);
  b.median = quantile_sorted(values, 0.5);
  b.q3 = quantile_sorted(values, 0.75);
  const double lo_fence = b.q1 - 1.5 * b.iqr();
  const double hi_fence = b.q3 + 1.5 * b.iqr();
  b.whisker_low = b.q1;
  b.whisker_high = b.q3;
  for (double v : values) {
    if (v < lo_fence || v > hi_fence) {
      b.outliers.push_back(v);
      continue;
    }
    b.whisker_low = std::min(b.whisker_low, v);
    b.whisker_high = std::max(b.whisker_high, v);
  }
  return b;
}

TrajectoryErrorReport per_trajectory_rmse(const Eigen::VectorXd& predicted, const WindowDataset& data) {
  if (static_cast<std::size_t>(predicted.size()) != data.size() || data.agent_ids.size() != data.size()) {
    throw Error(ErrorKind::DimensionMismatch, "predictions do not line up with the dataset");
  }
  std::map<std::int64_t, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double e = predicted[static_cast<Eigen::Index>(i)] - data.y[static_cast<Eigen::Index>(i)];
    auto& slot = acc[data.agent_ids[i]];
    slot.first += e * e;
    ++slot.second;
  }
  TrajectoryErrorReport report;
  std::vector<double> rmses;
  for (const auto& [id, s] : acc) {
    TrajectoryError t;
    t.agent_id = id;
    t.windows = s.second;
    t.mse = s.first / static_cast<double>(s.second);
    t.rmse = std::sqrt(t.mse);
    report.per_trajectory.push_back(t);
    rmses.push_back(t.rmse);
  }
  report.rmse_box = box_stats(std::move(rmses));
  return report;
}

std::string_view to_string(Verdict v) { return v == Verdict::CanCross ? "can_cross" : "cannot_cross"; }

bool can_cross(double predicted_arrival_s, double left_green_s, double buffer_s) {
  return std::max(predicted_arrival_s, 0.0) + buffer_s <= left_green_s;
}

CrossingDecision decide_crossing(double predicted_arrival_s, const PhaseTimeline& timeline, Area area,
                                 std::int64_t t_now_ms, double buffer_s, std::int64_t agent_id) {
  if (!(buffer_s >= kMinBufferS && buffer_s <= kMaxBufferS)) {
    throw Error(ErrorKind::InvalidArgument, "buffer must lie in [3, 5] s");
  }
  const PhaseState state = timeline.query(t_now_ms, area);
  CrossingDecision d;
  d.agent_id = agent_id;
  d.predicted_arrival_s = predicted_arrival_s;
  d.buffer_s = buffer_s;
  d.green = state.green;
  d.left_green_s = state.green ? state.left_s : 0.0;
  d.verdict = state.green && can_cross(predicted_arrival_s, d.left_green_s, buffer_s) ? Verdict::CanCross
                                                                                     : Verdict::CannotCross;
  return d;
}

json to_json(const ErrorMetrics& m) { return json{{"mse", m.mse}, {"rmse", m.rmse}, {"n", m.n}}; }

json to_json(const GridCell& c) {
  return json{{"architecture", std::string(nn::to_string(c.architecture))},
              {"window", c.window},
              {"include_subclass", c.include_subclass},
              {"mse", c.metrics.mse},
              {"rmse", c.metrics.rmse},
              {"n_test_windows", c.metrics.n}};
}

json to_json(const AblationPair& p) {
  return json{{"architecture", std::string(nn::to_string(p.architecture))},
              {"window", p.window},
              {"mse_with_subclass", p.mse_with},
              {"mse_without_subclass", p.mse_without},
              {"difference", p.difference}};
}

json to_json(const BoxStats& b) {
  return json{{"n", b.n},
              {"min", b.min},
              {"q1", b.q1},
              {"median", b.median},
              {"q3", b.q3},
              {"max", b.max},
              {"whisker_low", b.whisker_low},
              {"whisker_high", b.whisker_high},
              {"outliers", b.outliers}};
}

json to_json(const CrossingDecision& d) {
  return json{{"agent_id", d.agent_id},
              {"predicted_arrival_s", d.predicted_arrival_s},
              {"left_green_s", d.left_green_s},
              {"buffer_s", d.buffer_s},
              {"green", d.green},
              {"verdict", std::string(to_string(d.verdict))}};
}

}  // namespace xwalk
