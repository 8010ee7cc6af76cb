#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "xwalk/augment.hpp"
#include "xwalk/ingest.hpp"
#include "xwalk/subclass.hpp"

namespace xwalk {

// Per-point layout: spent_time, left_phase_time, current_phase, pos_x, pos_y,
// five area flags, box_width, box_length, box_height, yaw, speed and, unless
// ablated, the sub-class flag.
inline constexpr int kFeatureDimWithSubclass = 16;
inline constexpr int kFeatureDimWithoutSubclass = 15;

int feature_dim(bool include_subclass);
std::vector<std::string> feature_names(bool include_subclass);

/// W x D matrix, one row per window point in time order. The phase columns
/// come from the signal governing the window's crossing. Throws TimelineGap
/// when a point falls outside the timeline, InvalidArgument when the
/// sub-class flag is requested for an unlabeled agent.
Eigen::MatrixXd build_features(const TrainingWindow& window, const PhaseTimeline& timeline, bool include_subclass,
                               const SubClassResult& subclass);

/// Windows flattened row-wise: row i holds window i's W x D matrix laid out
/// step by step (all features of step 0, then step 1, ...).
struct WindowDataset {
  int window = 0;
  int dim = 0;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::int64_t> agent_ids;
  std::vector<std::size_t> end_index;  // source index of each window's last point

  std::size_t size() const { return static_cast<std::size_t>(y.size()); }
};

/// Agents missing from `labels` are an error only when include_subclass is set.
WindowDataset build_dataset(const std::vector<TrainingWindow>& windows, const PhaseTimeline& timeline,
                            bool include_subclass, const std::map<std::int64_t, SubClassResult>& labels);

/// Per-feature z-scoring. Statistics are per point feature, pooled over all
/// steps of all windows; zero spread maps to a unit scale.
struct FeatureScaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static FeatureScaler fit(const WindowDataset& data);
  /// Rows of W*D values.
  Eigen::MatrixXd transform_rows(const Eigen::MatrixXd& rows) const;
  /// A single W x D window.
  Eigen::MatrixXd transform_window(const Eigen::MatrixXd& window) const;
  int dim() const { return static_cast<int>(mean.size()); }
};

}  // namespace xwalk
