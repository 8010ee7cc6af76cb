#include "xwalk/features.hpp"

#include <cmath>

#include "xwalk/error.hpp"

namespace xwalk {

int feature_dim(bool include_subclass) {
  return include_subclass ? kFeatureDimWithSubclass : kFeatureDimWithoutSubclass;
}

std::vector<std::string> feature_names(bool include_subclass) {
  std::vector<std::string> names = {"spent_time", "left_phase_time", "current_phase", "pos_x",      "pos_y",
                                    "area_crossing_1", "area_crossing_2", "area_crossing_3", "area_crossing_4",
                                    "area_vehicle", "box_width", "box_length", "box_height", "yaw", "speed"};
  if (include_subclass) names.emplace_back("subclass_flag");
  return names;
}

Eigen::MatrixXd build_features(const TrainingWindow& window, const PhaseTimeline& timeline, bool include_subclass,
                               const SubClassResult& subclass) {
  if (include_subclass && subclass.label == SubClass::Unknown) {
    throw Error(ErrorKind::InvalidArgument,
                "agent " + std::to_string(window.agent_id) + " has no definite sub-class for the feature flag");
  }
  const int d = feature_dim(include_subclass);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(window.points.size()), d);
  for (std::size_t i = 0; i < window.points.size(); ++i) {
    const auto& p = window.points[i];
    const auto& r = p.record;
    const PhaseState phase = timeline.query(r.timestamp_ms, window.governing_area);
    auto row = out.row(static_cast<Eigen::Index>(i));
    row[0] = p.spent_time_s;
    row[1] = phase.left_s;
    row[2] = phase.green ? 1.0 : 0.0;
    row[3] = r.pos_x;
    row[4] = r.pos_y;
    row[5 + static_cast<int>(p.area)] = 1.0;
    row[10] = r.box_width;
    row[11] = r.box_length;
    row[12] = r.box_height;
    row[13] = r.yaw;
    row[14] = p.speed;
    if (include_subclass) row[15] = subclass.label == SubClass::Normal ? 1.0 : 0.0;
  }
  return out;
}

WindowDataset build_dataset(const std::vector<TrainingWindow>& windows, const PhaseTimeline& timeline,
                            bool include_subclass, const std::map<std::int64_t, SubClassResult>& labels) {
  WindowDataset data;
  data.dim = feature_dim(include_subclass);
  if (windows.empty()) return data;
  data.window = static_cast<int>(windows.front().points.size());
  const auto n = static_cast<Eigen::Index>(windows.size());
  data.x.resize(n, static_cast<Eigen::Index>(data.window) * data.dim);
  data.y.resize(n);
  const SubClassResult unlabeled;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& w = windows[static_cast<std::size_t>(i)];
    if (static_cast<int>(w.points.size()) != data.window) {
      throw Error(ErrorKind::DimensionMismatch, "windows of different lengths in one dataset");
    }
    const auto it = labels.find(w.agent_id);
    const SubClassResult& label = it == labels.end() ? unlabeled : it->second;
    const Eigen::MatrixXd f = build_features(w, timeline, include_subclass, label);
    for (int t = 0; t < data.window; ++t) data.x.block(i, t * data.dim, 1, data.dim) = f.row(t);
    data.y[i] = w.target_s;
    data.agent_ids.push_back(w.agent_id);
    data.end_index.push_back(w.window_end_index());
  }
  return data;
}

FeatureScaler FeatureScaler::fit(const WindowDataset& data) {
  if (data.size() == 0) throw Error(ErrorKind::EmptyTrainSet, "cannot fit feature statistics on no windows");
  const Eigen::Index d = data.dim;
  const Eigen::Index n = static_cast<Eigen::Index>(data.size()) * data.window;
  FeatureScaler s;
  s.mean = Eigen::VectorXd::Zero(d);
  s.scale = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    for (int t = 0; t < data.window; ++t) s.mean += data.x.block(i, t * d, 1, d).transpose();
  }
  s.mean /= static_cast<double>(n);
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    for (int t = 0; t < data.window; ++t) {
      s.scale += (data.x.block(i, t * d, 1, d).transpose() - s.mean).cwiseAbs2();
    }
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    const double sd = std::sqrt(s.scale[j] / static_cast<double>(n));
    s.scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Eigen::MatrixXd FeatureScaler::transform_rows(const Eigen::MatrixXd& rows) const {
  const Eigen::Index d = mean.size();
  if (d == 0 || rows.cols() % d != 0) throw Error(ErrorKind::DimensionMismatch, "row width is not a multiple of D");
  Eigen::MatrixXd out(rows.rows(), rows.cols());
  for (Eigen::Index t = 0; t < rows.cols() / d; ++t) {
    out.middleCols(t * d, d) =
        (rows.middleCols(t * d, d).rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  }
  return out;
}

Eigen::MatrixXd FeatureScaler::transform_window(const Eigen::MatrixXd& window) const {
  if (window.cols() != mean.size()) {
    throw Error(ErrorKind::DimensionMismatch, "window has " + std::to_string(window.cols()) + " features, model expects " +
                                                  std::to_string(mean.size()));
  }
  return (window.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

}  // namespace xwalk
