#include "xwalk/nn/checkpoint.hpp"

#include <cmath>

#include "xwalk/csv.hpp"
#include "xwalk/error.hpp"

namespace xwalk::nn {

using nlohmann::json;

namespace {

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double from_nullable(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json matrix_to_json(const std::string& name, const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return json{{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw Error(ErrorKind::SchemaMismatch, "parameter " + j.value("name", std::string("?")) + " has wrong data length");
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

json config_to_json(const ModelConfig& c) {
  return json{{"architecture", std::string(to_string(c.architecture))},
              {"window", c.window},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"iterations", c.iterations},
              {"log_every", c.log_every},
              {"seed", c.seed},
              {"hidden_layers", c.hidden_layers},
              {"recurrent_hidden", c.recurrent_hidden},
              {"recurrent_layers", c.recurrent_layers},
              {"embed_dim", c.embed_dim},
              {"heads", c.heads},
              {"encoder_layers", c.encoder_layers},
              {"decoder_layers", c.decoder_layers},
              {"ffn_dim", c.ffn_dim},
              {"positional_encoding", c.positional_encoding},
              {"optimizer", {{"name", "adam"}, {"beta1", c.adam_beta1}, {"beta2", c.adam_beta2}, {"eps", c.adam_eps}}}};
}

ModelConfig config_from_json(const json& j, ModelConfig c) {
  try {
    if (j.contains("architecture")) {
      const auto name = j.at("architecture").get<std::string>();
      const auto a = architecture_from_string(name);
      if (!a) throw Error(ErrorKind::ConfigValidationError, "unknown architecture '" + name + "'");
      c.architecture = *a;
    }
    c.window = j.value("window", c.window);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.iterations = j.value("iterations", c.iterations);
    c.log_every = j.value("log_every", c.log_every);
    c.seed = j.value("seed", c.seed);
    c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
    c.recurrent_hidden = j.value("recurrent_hidden", c.recurrent_hidden);
    c.recurrent_layers = j.value("recurrent_layers", c.recurrent_layers);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.heads = j.value("heads", c.heads);
    c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
    c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
    c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
    c.positional_encoding = j.value("positional_encoding", c.positional_encoding);
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      if (o.value("name", std::string("adam")) != "adam") {
        throw Error(ErrorKind::ConfigValidationError, "only the adam optimizer is supported");
      }
      c.adam_beta1 = o.value("beta1", c.adam_beta1);
      c.adam_beta2 = o.value("beta2", c.adam_beta2);
      c.adam_eps = o.value("eps", c.adam_eps);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigValidationError, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string checkpoint_to_json(const TrainedModel& model, bool best) {
  json j;
  j["format"] = "xwalk-model";
  j["version"] = 1;
  j["variant"] = best ? "best_validation" : "final";
  j["config"] = config_to_json(model.config());
  j["input_dim"] = model.input_dim();
  j["scaler"] = {{"mean", to_vec(model.scaler().mean)}, {"scale", to_vec(model.scaler().scale)}};
  const auto names = model.parameter_names();
  const auto values = best ? model.best_values : model.values();
  json params = json::array();
  for (std::size_t i = 0; i < names.size(); ++i) params.push_back(matrix_to_json(names[i], values[i]));
  j["parameters"] = params;
  json hist = json::array();
  for (const auto& e : model.history) {
    hist.push_back({{"step", e.step}, {"train_mse", nullable(e.train_mse)}, {"val_mse", nullable(e.val_mse)}});
  }
  j["history"] = hist;
  j["initial_train_mse"] = nullable(model.initial_train_mse);
  j["final_train_mse"] = nullable(model.final_train_mse);
  j["best_step"] = model.best_step;
  j["best_val_mse"] = nullable(model.best_val_mse);
  return j.dump(1);
}

TrainedModel checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, std::string("model file is not JSON: ") + e.what());
  }
  if (j.value("format", "") != "xwalk-model" || j.value("version", 0) != 1) {
    throw Error(ErrorKind::SchemaMismatch, "not a version 1 model document");
  }
  try {
    const ModelConfig config = config_from_json(j.at("config"));
    const int input_dim = j.at("input_dim").get<int>();
    FeatureScaler scaler;
    scaler.mean = from_vec(j.at("scaler").at("mean").get<std::vector<double>>());
    scaler.scale = from_vec(j.at("scaler").at("scale").get<std::vector<double>>());
    ParameterValues values;
    for (const auto& p : j.at("parameters")) values.push_back(matrix_from_json(p));
    TrainedModel model(config, input_dim, std::move(scaler), values);
    for (const auto& e : j.at("history")) {
      model.history.push_back({e.at("step").get<int>(), from_nullable(e.at("train_mse")),
                               from_nullable(e.at("val_mse")), std::numeric_limits<double>::quiet_NaN()});
    }
    model.initial_train_mse = from_nullable(j.at("initial_train_mse"));
    model.final_train_mse = from_nullable(j.at("final_train_mse"));
    model.best_step = j.at("best_step").get<int>();
    model.best_val_mse = from_nullable(j.at("best_val_mse"));
    model.best_values = std::move(values);
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, std::string("model document: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const TrainedModel& model, bool best) {
  csv::write_file(path, checkpoint_to_json(model, best));
}

TrainedModel load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(csv::read_file(path)); }

std::string format_training_log(const std::vector<TrainingLogEntry>& history) {
  std::string out = "step,train_mse,val_mse,wall_seconds\n";
  for (const auto& e : history) {
    out += std::to_string(e.step) + ',' + csv::format_double(e.train_mse) + ',' +
           (std::isfinite(e.val_mse) ? csv::format_double(e.val_mse) : std::string("nan")) + ',' +
           csv::format_double(e.wall_seconds) + '\n';
  }
  return out;
}

}  // namespace xwalk::nn
