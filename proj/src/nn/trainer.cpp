#include "xwalk/nn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <random>

#include "xwalk/error.hpp"

namespace xwalk::nn {

namespace {

constexpr Eigen::Index kEvalChunk = 512;
constexpr std::size_t kSmoothingWindow = 100;

void load_values(Regressor& net, const ParameterValues& values) {
  auto& params = net.params().all();
  if (params.size() != values.size()) throw Error(ErrorKind::DimensionMismatch, "parameter list length differs");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->value.rows() != values[i].rows() || params[i]->value.cols() != values[i].cols()) {
      throw Error(ErrorKind::DimensionMismatch, "parameter " + params[i]->name + " has the wrong shape");
    }
    params[i]->value = values[i];
  }
}

ParameterValues snapshot(const Regressor& net) {
  ParameterValues out;
  for (const auto& p : net.params().all()) out.push_back(p->value);
  return out;
}

}  // namespace

TrainedModel::TrainedModel(ModelConfig config, int input_dim, FeatureScaler scaler, ParameterValues values)
    : config_(std::move(config)), input_dim_(input_dim), scaler_(std::move(scaler)) {
  if (scaler_.dim() != input_dim_) throw Error(ErrorKind::DimensionMismatch, "scaler and model dimensions differ");
  net_ = make_regressor(config_, input_dim_);
  load_values(*net_, values);
}

ParameterValues TrainedModel::values() const { return snapshot(*net_); }

std::vector<std::string> TrainedModel::parameter_names() const {
  std::vector<std::string> names;
  for (const auto& p : net_->params().all()) names.push_back(p->name);
  return names;
}

double TrainedModel::forward(const Eigen::MatrixXd& features) const {
  if (features.rows() != config_.window || features.cols() != input_dim_) {
    throw Error(ErrorKind::DimensionMismatch, "window is " + std::to_string(features.rows()) + " x " +
                                                  std::to_string(features.cols()) + ", model expects " +
                                                  std::to_string(config_.window) + " x " + std::to_string(input_dim_));
  }
  const Eigen::MatrixXd z = scaler_.transform_window(features);
  Eigen::MatrixXd row(1, z.size());
  for (Eigen::Index t = 0; t < z.rows(); ++t) row.block(0, t * z.cols(), 1, z.cols()) = z.row(t);
  Tape tape(false);
  return tape.value(net_->forward(tape, row))(0, 0);
}

Eigen::VectorXd TrainedModel::predict_rows(const Eigen::MatrixXd& rows) const {
  if (rows.cols() != static_cast<Eigen::Index>(config_.window) * input_dim_) {
    throw Error(ErrorKind::DimensionMismatch, "rows have the wrong width for this model");
  }
  return predict_standardized(*net_, scaler_.transform_rows(rows));
}

Eigen::VectorXd predict_standardized(Regressor& net, const Eigen::MatrixXd& x) {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index start = 0; start < x.rows(); start += kEvalChunk) {
    const Eigen::Index n = std::min(kEvalChunk, x.rows() - start);
    Tape tape(false);
    out.segment(start, n) = tape.value(net.forward(tape, x.middleRows(start, n))).col(0);
  }
  return out;
}

double dataset_mse(Regressor& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (y.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  return (predict_standardized(net, x) - y).squaredNorm() / static_cast<double>(y.size());
}

TrainedModel train(const ModelConfig& config, const WindowDataset& train_set, const WindowDataset& validation) {
  config.validate();
  if (train_set.size() == 0) throw Error(ErrorKind::EmptyTrainSet, "no training windows");
  if (train_set.window != config.window) {
    throw Error(ErrorKind::DimensionMismatch, "training windows have " + std::to_string(train_set.window) +
                                                  " points, config expects " + std::to_string(config.window));
  }
  if (validation.size() > 0 && (validation.window != train_set.window || validation.dim != train_set.dim)) {
    throw Error(ErrorKind::DimensionMismatch, "validation windows do not match the training layout");
  }
  const auto start_time = std::chrono::steady_clock::now();
  FeatureScaler scaler = FeatureScaler::fit(train_set);
  const Eigen::MatrixXd x = scaler.transform_rows(train_set.x);
  const Eigen::MatrixXd vx = validation.size() > 0 ? scaler.transform_rows(validation.x) : Eigen::MatrixXd();
  auto net = make_regressor(config, train_set.dim);
  auto& params = net->params().all();

  std::vector<Matrix> m1, m2;
  for (const auto& p : params) {
    m1.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    m2.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }

  const double initial = dataset_mse(*net, x, train_set.y);
  double best_val = std::numeric_limits<double>::infinity();
  int best_step = 0;
  ParameterValues best = snapshot(*net);
  if (validation.size() > 0) best_val = dataset_mse(*net, vx, validation.y);

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::size_t cursor = order.size();

  std::vector<TrainingLogEntry> history;
  std::deque<double> recent;
  double since_log = 0.0;
  int since_log_n = 0;
  const auto batch = static_cast<Eigen::Index>(config.batch_size);
  Matrix xb(batch, x.cols());
  Matrix yb(batch, 1);
  double b1t = 1.0, b2t = 1.0;

  for (int step = 1; step <= config.iterations; ++step) {
    for (Eigen::Index r = 0; r < batch; ++r) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const Eigen::Index idx = order[cursor++];
      xb.row(r) = x.row(idx);
      yb(r, 0) = train_set.y[idx];
    }
    net->params().zero_grad();
    Tape tape;
    Var loss = tape.mse(net->forward(tape, xb), yb);
    const double lv = tape.value(loss)(0, 0);
    if (!std::isfinite(lv)) {
      throw Error(ErrorKind::DivergedTraining, "loss is not finite at step " + std::to_string(step));
    }
    tape.backward(loss);

    b1t *= config.adam_beta1;
    b2t *= config.adam_beta2;
    const double step_size = config.learning_rate / (1.0 - b1t);
    const double v_corr = 1.0 / (1.0 - b2t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Matrix& g = params[i]->grad;
      m1[i] = config.adam_beta1 * m1[i] + (1.0 - config.adam_beta1) * g;
      m2[i] = config.adam_beta2 * m2[i] + (1.0 - config.adam_beta2) * g.cwiseAbs2();
      params[i]->value.array() -= step_size * m1[i].array() / ((m2[i].array() * v_corr).sqrt() + config.adam_eps);
    }

    recent.push_back(lv);
    if (recent.size() > kSmoothingWindow) recent.pop_front();
    since_log += lv;
    ++since_log_n;
    if (step % config.log_every == 0 || step == config.iterations) {
      TrainingLogEntry e;
      e.step = step;
      e.train_mse = since_log / since_log_n;
      e.val_mse = validation.size() > 0 ? dataset_mse(*net, vx, validation.y) : std::numeric_limits<double>::quiet_NaN();
      e.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
      if (validation.size() > 0 && e.val_mse < best_val) {
        best_val = e.val_mse;
        best_step = step;
        best = snapshot(*net);
      }
      history.push_back(e);
      since_log = 0.0;
      since_log_n = 0;
    }
  }

  TrainedModel model(config, train_set.dim, std::move(scaler), snapshot(*net));
  model.history = std::move(history);
  model.initial_train_mse = initial;
  model.final_train_mse =
      recent.empty() ? initial : std::accumulate(recent.begin(), recent.end(), 0.0) / static_cast<double>(recent.size());
  model.best_step = best_step;
  model.best_val_mse = validation.size() > 0 ? best_val : std::numeric_limits<double>::quiet_NaN();
  model.best_values = validation.size() > 0 ? std::move(best) : model.values();
  return model;
}

}  // namespace xwalk::nn
