#include "xwalk/predict.hpp"

#include <cmath>

#include "xwalk/augment.hpp"
#include "xwalk/error.hpp"
#include "xwalk/features.hpp"

namespace xwalk {

double PredictionPoint::abs_error() const { return std::abs(predicted_s - target_s); }

bool uses_subclass(const nn::TrainedModel& model) {
  if (model.input_dim() == kFeatureDimWithSubclass) return true;
  if (model.input_dim() == kFeatureDimWithoutSubclass) return false;
  throw Error(ErrorKind::DimensionMismatch, "model input dimension " + std::to_string(model.input_dim()) +
                                                " matches no feature layout");
}

std::vector<PredictionPoint> predict_trajectory(const nn::TrainedModel& model, const Trajectory& traj,
                                                const PhaseTimeline& timeline, const SubClassResult& subclass) {
  const auto w = static_cast<std::size_t>(model.config().window);
  const auto windows = range_selection(traj, w);
  if (windows.empty()) {
    throw Error(ErrorKind::TrajectoryTooShort, "trajectory " + std::to_string(traj.agent_id) + " has fewer than " +
                                                   std::to_string(w) + " points up to its crossing exit");
  }
  const bool with_subclass = uses_subclass(model);
  std::vector<PredictionPoint> out;
  out.reserve(windows.size());
  for (const auto& win : windows) {
    PredictionPoint p;
    p.index = win.window_end_index();
    p.timestamp_ms = win.points.back().record.timestamp_ms;
    p.predicted_s = model.forward(build_features(win, timeline, with_subclass, subclass));
    p.target_s = win.target_s;
    out.push_back(p);
  }
  return out;
}

}  // namespace xwalk
