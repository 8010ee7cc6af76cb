#pragma once

#include <memory>
#include <vector>

#include "xwalk/features.hpp"
#include "xwalk/nn/models.hpp"

namespace xwalk::nn {

struct TrainingLogEntry {
  int step = 0;
  double train_mse = 0.0;  // mean batch loss since the previous entry
  double val_mse = 0.0;    // NaN without a validation set
  double wall_seconds = 0.0;
};

/// Snapshot of every parameter value, in store order.
using ParameterValues = std::vector<Matrix>;

/// A trained regressor plus what is needed to feed it raw features.
/// Inference never mutates the network, so one instance can serve several
/// threads.
class TrainedModel {
 public:
  TrainedModel(ModelConfig config, int input_dim, FeatureScaler scaler, ParameterValues values);

  const ModelConfig& config() const { return config_; }
  int input_dim() const { return input_dim_; }
  const FeatureScaler& scaler() const { return scaler_; }
  ParameterValues values() const;
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const { return net_->params().count(); }

  /// One raw W x D window. Throws DimensionMismatch.
  double forward(const Eigen::MatrixXd& features) const;
  /// Raw rows of W*D values.
  Eigen::VectorXd predict_rows(const Eigen::MatrixXd& rows) const;

  std::vector<TrainingLogEntry> history;
  double initial_train_mse = 0.0;
  double final_train_mse = 0.0;  // mean of the last min(100, iterations) batch losses
  int best_step = 0;
  double best_val_mse = 0.0;
  ParameterValues best_values;

 private:
  ModelConfig config_;
  int input_dim_;
  FeatureScaler scaler_;
  std::shared_ptr<Regressor> net_;
};

/// Mean squared error of a network over standardized rows, evaluated in
/// chunks without recording gradients.
double dataset_mse(Regressor& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
Eigen::VectorXd predict_standardized(Regressor& net, const Eigen::MatrixXd& x);

/// Adam on MSE for config.iterations batch steps. The feature scaler is fit on
/// `train` only. Throws EmptyTrainSet and DivergedTraining.
TrainedModel train(const ModelConfig& config, const WindowDataset& train, const WindowDataset& validation);

}  // namespace xwalk::nn
