#include "xwalk/subclass.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "xwalk/csv.hpp"
#include "xwalk/error.hpp"

namespace xwalk {

std::string_view to_string(SubClass c) {
  switch (c) {
    case SubClass::Wheelchair: return "wheelchair";
    case SubClass::Normal: return "normal";
    case SubClass::Unknown: return "unknown";
  }
  return "unknown";
}

std::string_view to_string(LabelSource s) {
  switch (s) {
    case LabelSource::Criterion1: return "criterion_1";
    case LabelSource::Criterion2: return "criterion_2";
    case LabelSource::Criterion3: return "criterion_3";
    case LabelSource::Criterion4: return "criterion_4";
    case LabelSource::FallbackUnknown: return "fallback_unknown";
    case LabelSource::Svm: return "svm";
  }
  return "fallback_unknown";
}

std::optional<SubClass> subclass_from_string(std::string_view s) {
  for (auto c : {SubClass::Wheelchair, SubClass::Normal, SubClass::Unknown}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

std::optional<LabelSource> label_source_from_string(std::string_view s) {
  for (auto v : {LabelSource::Criterion1, LabelSource::Criterion2, LabelSource::Criterion3, LabelSource::Criterion4,
                 LabelSource::FallbackUnknown, LabelSource::Svm}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

FeatureRow SubClassFeatures::as_vector() const {
  FeatureRow v;
  v << mean_height, mean_width, mean_length, yaw_std, mean_speed, max_speed;
  return v;
}

SubClassFeatures SubClassFeatures::from_vector(const FeatureRow& v) {
  return {v[0], v[1], v[2], v[3], v[4], v[5]};
}

void CriteriaThresholds::validate() const {
  for (double v : {speed_normal, accel_window_s, accel_ratio, yaw_std_high, wheelchair_height_min,
                   wheelchair_height_max, squareness_tol}) {
    if (!(v > 0.0)) throw Error(ErrorKind::ConfigValidationError, "criteria thresholds must be positive");
  }
  if (!(wheelchair_height_min < wheelchair_height_max)) {
    throw Error(ErrorKind::ConfigValidationError, "wheelchair height band must satisfy min < max");
  }
}

std::vector<double> unwrap_angles(const std::vector<double>& angles) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  std::vector<double> out = angles;
  double offset = 0.0;
  for (std::size_t i = 1; i < angles.size(); ++i) {
    const double d = angles[i] - angles[i - 1];
    offset -= kTwoPi * std::round(d / kTwoPi);
    out[i] = angles[i] + offset;
  }
  return out;
}

SubClassFeatures extract_features(const Trajectory& traj) {
  std::vector<const TrajectoryPoint*> pts;
  for (const auto& p : traj.points) {
    if (is_crossing(p.area)) pts.push_back(&p);
  }
  if (pts.empty()) {
    throw Error(ErrorKind::DegenerateTrajectory, "trajectory " + std::to_string(traj.agent_id) + " never enters a crossing");
  }
  const double n = static_cast<double>(pts.size());
  // Means are taken as offsets from the first point so that a constant
  // sequence reproduces its value exactly; the criteria compare against
  // inclusive and strict boundaries.
  const auto& first = pts.front()->record;
  const double speed0 = pts.front()->speed;
  double dh = 0.0, dw = 0.0, dl = 0.0, ds = 0.0;
  SubClassFeatures f;
  std::vector<double> yaws;
  yaws.reserve(pts.size());
  for (const auto* p : pts) {
    dh += p->record.box_height - first.box_height;
    dw += p->record.box_width - first.box_width;
    dl += p->record.box_length - first.box_length;
    ds += p->speed - speed0;
    f.max_speed = std::max(f.max_speed, p->speed);
    yaws.push_back(p->record.yaw);
  }
  f.mean_height = first.box_height + dh / n;
  f.mean_width = first.box_width + dw / n;
  f.mean_length = first.box_length + dl / n;
  f.mean_speed = speed0 + ds / n;
  // Rounding can leave the mean one ulp above a constant maximum.
  f.max_speed = std::max(f.max_speed, f.mean_speed);

  const auto unwrapped = unwrap_angles(yaws);
  // Offsets from the first heading keep a constant heading at exactly zero spread.
  double mean_yaw = 0.0;
  for (double y : unwrapped) mean_yaw += y - unwrapped.front();
  mean_yaw = unwrapped.front() + mean_yaw / n;
  double var = 0.0;
  for (double y : unwrapped) var += (y - mean_yaw) * (y - mean_yaw);
  f.yaw_std = std::sqrt(var / n);
  return f;
}

bool criterion1_accelerates_before_phase_change(const Trajectory& traj, const PhaseTimeline& timeline,
                                                const CriteriaThresholds& th) {
  const Area area = traj.primary_crossing();
  if (!is_crossing(area)) return false;

  std::vector<const TrajectoryPoint*> crossing;
  for (const auto& p : traj.points) {
    if (is_crossing(p.area)) crossing.push_back(&p);
  }
  const auto t_first = crossing.front()->record.timestamp_ms;
  const auto t_last = crossing.back()->record.timestamp_ms;
  const auto change = timeline.green_end_within(area, t_first, t_last);
  if (!change) return false;

  const auto window_ms = static_cast<std::int64_t>(std::llround(th.accel_window_s * 1000.0));
  const auto window_start = *change - window_ms;
  double window_sum = 0.0;
  double prior_sum = 0.0;
  std::size_t window_n = 0;
  std::size_t prior_n = 0;
  for (const auto* p : crossing) {
    const auto t = p->record.timestamp_ms;
    if (t >= *change) continue;
    if (t >= window_start) {
      window_sum += p->speed;
      ++window_n;
    } else {
      prior_sum += p->speed;
      ++prior_n;
    }
  }
  if (window_n == 0 || prior_n == 0) return false;
  const double window_mean = window_sum / static_cast<double>(window_n);
  const double prior_mean = prior_sum / static_cast<double>(prior_n);
  return window_mean > th.accel_ratio * prior_mean;
}

bool criterion2_fast(const SubClassFeatures& f, const CriteriaThresholds& th) { return f.mean_speed > th.speed_normal; }

bool criterion3_high_yaw_variance(const SubClassFeatures& f, const CriteriaThresholds& th) {
  return f.yaw_std > th.yaw_std_high;
}

bool criterion4_wheelchair_shape(const SubClassFeatures& f, const CriteriaThresholds& th) {
  if (f.mean_height < th.wheelchair_height_min || f.mean_height > th.wheelchair_height_max) return false;
  const double longer = std::max(f.mean_width, f.mean_length);
  if (longer <= 0.0) return false;
  return std::abs(f.mean_width - f.mean_length) / longer <= th.squareness_tol;
}

SubClassResult apply_criteria(const Trajectory& traj, const SubClassFeatures& features, const PhaseTimeline& timeline,
                              const CriteriaThresholds& th) {
  if (criterion1_accelerates_before_phase_change(traj, timeline, th)) {
    return {SubClass::Normal, LabelSource::Criterion1, 1.0};
  }
  if (criterion2_fast(features, th)) return {SubClass::Normal, LabelSource::Criterion2, 1.0};
  if (criterion3_high_yaw_variance(features, th)) return {SubClass::Normal, LabelSource::Criterion3, 1.0};
  if (criterion4_wheelchair_shape(features, th)) return {SubClass::Wheelchair, LabelSource::Criterion4, 1.0};
  return {SubClass::Unknown, LabelSource::FallbackUnknown, 1.0};
}

SubClassResult apply_criteria(const Trajectory& traj, const PhaseTimeline& timeline, const CriteriaThresholds& th) {
  return apply_criteria(traj, extract_features(traj), timeline, th);
}

std::string format_labeled_features_csv(const std::vector<LabeledFeatures>& rows) {
  std::string out = "agent_id,mean_height,mean_width,mean_length,yaw_std,mean_speed,max_speed,label,source\n";
  for (const auto& r : rows) {
    out += std::to_string(r.agent_id);
    for (int i = 0; i < kNumSubClassFeatures; ++i) {
      out += ',';
      out += csv::format_double(r.features.as_vector()[i]);
    }
    out += ',';
    out += std::to_string(static_cast<int>(r.result.label));
    out += ',';
    out += to_string(r.result.source);
    out += '\n';
  }
  return out;
}

std::vector<LabeledFeatures> parse_labeled_features_csv(std::string_view text) {
  std::vector<LabeledFeatures> out;
  bool first = true;
  for (const auto line : csv::lines(text)) {
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split(line);
    if (first) {
      first = false;
      if (!csv::parse_int(fields.front())) continue;
    }
    if (fields.size() != 9) throw Error(ErrorKind::SchemaMismatch, "labeled-features row needs 9 fields");
    LabeledFeatures row;
    const auto id = csv::parse_int(fields[0]);
    const auto label = csv::parse_int(fields[7]);
    const auto source = label_source_from_string(csv::trim(fields[8]));
    if (!id || !label || *label < 0 || *label > 2 || !source) {
      throw Error(ErrorKind::SchemaMismatch, "malformed labeled-features row");
    }
    FeatureRow v;
    for (int i = 0; i < kNumSubClassFeatures; ++i) {
      const auto d = csv::parse_double(fields[static_cast<std::size_t>(i) + 1]);
      if (!d) throw Error(ErrorKind::SchemaMismatch, "malformed feature value");
      v[i] = *d;
    }
    row.agent_id = *id;
    row.features = SubClassFeatures::from_vector(v);
    row.result = {static_cast<SubClass>(*label), *source, 1.0};
    out.push_back(row);
  }
  return out;
}

}  // namespace xwalk
