#pragma once

#include <cstdint>
#include <vector>

#include "xwalk/ingest.hpp"
#include "xwalk/nn/trainer.hpp"
#include "xwalk/preprocess.hpp"
#include "xwalk/subclass.hpp"

namespace xwalk {

struct PredictionPoint {
  std::size_t index = 0;  // source index of the window's last point
  std::int64_t timestamp_ms = 0;
  double predicted_s = 0.0;
  double target_s = 0.0;

  double abs_error() const;
};

/// One prediction per window position up to the crossing exit. Throws
/// TrajectoryTooShort when no full window fits and NoCrossingExit when the
/// trajectory never crosses.
std::vector<PredictionPoint> predict_trajectory(const nn::TrainedModel& model, const Trajectory& traj,
                                                const PhaseTimeline& timeline, const SubClassResult& subclass);

/// Whether the model was trained with the sub-class flag column.
bool uses_subclass(const nn::TrainedModel& model);

}  // namespace xwalk
