#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "xwalk/ingest.hpp"
#include "xwalk/preprocess.hpp"

namespace xwalk {

/// Numeric codes follow the classifier convention: normal pedestrians are 1,
/// wheelchair users 0.
enum class SubClass : int { Wheelchair = 0, Normal = 1, Unknown = 2 };

enum class LabelSource { Criterion1, Criterion2, Criterion3, Criterion4, FallbackUnknown, Svm };

std::string_view to_string(SubClass c);
std::string_view to_string(LabelSource s);
std::optional<SubClass> subclass_from_string(std::string_view s);
std::optional<LabelSource> label_source_from_string(std::string_view s);

inline constexpr int kNumSubClassFeatures = 6;
using FeatureRow = Eigen::Matrix<double, kNumSubClassFeatures, 1>;

/// Size and motion summary of a trajectory's in-crossing points.
struct SubClassFeatures {
  double mean_height = 0.0;
  double mean_width = 0.0;
  double mean_length = 0.0;
  double yaw_std = 0.0;
  double mean_speed = 0.0;
  double max_speed = 0.0;

  /// Order: height, width, length, yaw_std, mean_speed, max_speed.
  FeatureRow as_vector() const;
  static SubClassFeatures from_vector(const FeatureRow& v);
};

struct SubClassResult {
  SubClass label = SubClass::Unknown;
  LabelSource source = LabelSource::FallbackUnknown;
  double confidence = 1.0;
};

struct CriteriaThresholds {
  double speed_normal = 1.5;        // m/s, strict
  double accel_window_s = 3.0;      // seconds before the green end
  double accel_ratio = 1.3;         // window mean speed / earlier mean speed, strict
  double yaw_std_high = 0.5;        // rad, strict
  double wheelchair_height_min = 1.1;
  double wheelchair_height_max = 1.5;
  double squareness_tol = 0.25;     // |w - l| / max(w, l), inclusive

  void validate() const;
};

/// Throws DegenerateTrajectory when no point lies in a crossing.
SubClassFeatures extract_features(const Trajectory& traj);

/// Unwraps consecutive angles so successive differences lie in [-pi, pi].
std::vector<double> unwrap_angles(const std::vector<double>& angles);

bool criterion1_accelerates_before_phase_change(const Trajectory& traj, const PhaseTimeline& timeline,
                                                const CriteriaThresholds& th);
bool criterion2_fast(const SubClassFeatures& f, const CriteriaThresholds& th);
bool criterion3_high_yaw_variance(const SubClassFeatures& f, const CriteriaThresholds& th);
bool criterion4_wheelchair_shape(const SubClassFeatures& f, const CriteriaThresholds& th);

/// Criteria 1-3 mark a normal pedestrian; criterion 4 is only consulted when
/// none of them fires.
SubClassResult apply_criteria(const Trajectory& traj, const PhaseTimeline& timeline, const CriteriaThresholds& th);

/// Same decision when the features are already extracted.
SubClassResult apply_criteria(const Trajectory& traj, const SubClassFeatures& features, const PhaseTimeline& timeline,
                              const CriteriaThresholds& th);

struct LabeledFeatures {
  std::int64_t agent_id = 0;
  SubClassFeatures features;
  SubClassResult result;
};

std::string format_labeled_features_csv(const std::vector<LabeledFeatures>& rows);
std::vector<LabeledFeatures> parse_labeled_features_csv(std::string_view text);

}  // namespace xwalk
