#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "xwalk/subclass.hpp"

namespace xwalk {

enum class SvmKernel { Rbf, Linear };

/// Binary C-SVC over standardized sub-class features. Positive decision
/// values mean a normal pedestrian, negative a wheelchair user.
struct SvmModel {
  SvmKernel kernel = SvmKernel::Rbf;
  double gamma = 0.0;
  double c = 1.0;
  FeatureRow mean = FeatureRow::Zero();
  FeatureRow scale = FeatureRow::Ones();
  std::vector<FeatureRow> support_vectors;  // standardized
  std::vector<double> dual_coef;            // alpha_i * y_i
  double bias = 0.0;

  bool trained() const { return !support_vectors.empty(); }
  double kernel_value(const FeatureRow& a, const FeatureRow& b) const;
  double decision(const FeatureRow& raw) const;
  SubClass predict(const FeatureRow& raw) const;

  std::string to_json() const;
  static SvmModel from_json(const std::string& text);
};

struct SvmOptions {
  SvmKernel kernel = SvmKernel::Rbf;
  double c = 1.0;
  double split_ratio = 0.8;
  int folds = 5;
  std::uint64_t seed = 0;
  double tolerance = 1e-6;
  int max_iterations = 1000000;
};

struct SvmReport {
  double cv_accuracy = 0.0;
  std::vector<double> fold_accuracies;
  double test_accuracy = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

struct SvmTrainResult {
  SvmModel model;
  SvmReport report;
};

/// Fits an SVM on already-split data. Labels must be Normal or Wheelchair.
SvmModel fit_svm(const std::vector<FeatureRow>& samples, const std::vector<SubClass>& labels,
                 const SvmOptions& options);

/// Stratified split, k-fold cross-validation on the training part, final fit
/// on the whole training part, accuracy on the held-out part.
SvmTrainResult train_svm(const std::vector<FeatureRow>& samples, const std::vector<SubClass>& labels,
                         const SvmOptions& options);

/// Every input row gets a binary label with source `svm`.
std::vector<SubClassResult> relabel_unknowns(const SvmModel& model, const std::vector<FeatureRow>& unknowns);

/// Maps |decision| to a confidence in [0.5, 1).
double margin_confidence(double decision_value);

}  // namespace xwalk
