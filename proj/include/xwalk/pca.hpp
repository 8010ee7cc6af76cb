#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "xwalk/subclass.hpp"

namespace xwalk {

/// Two-component PCA over z-scored sub-class features.
struct PcaModel {
  FeatureRow mean = FeatureRow::Zero();
  FeatureRow scale = FeatureRow::Ones();  // sample standard deviation; 1 for dropped features
  std::array<bool, kNumSubClassFeatures> kept{};
  Eigen::Matrix<double, 2, kNumSubClassFeatures> components = Eigen::Matrix<double, 2, kNumSubClassFeatures>::Zero();
  Eigen::Vector2d explained_variance_ratio = Eigen::Vector2d::Zero();
  std::vector<std::string> warnings;

  FeatureRow standardize(const FeatureRow& raw) const;
  Eigen::Vector2d project(const FeatureRow& raw) const;
  /// Inverse of `project` restricted to the retained subspace.
  FeatureRow reconstruct(const Eigen::Vector2d& scores) const;

  std::string to_json() const;
  static PcaModel from_json(const std::string& text);
};

/// Needs at least three samples. Constant features are dropped with a
/// warning; if every feature is constant, throws AllFeaturesConstant.
PcaModel fit_pca(const std::vector<FeatureRow>& samples);

}  // namespace xwalk
