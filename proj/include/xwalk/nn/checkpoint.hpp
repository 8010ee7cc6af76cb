#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "xwalk/nn/trainer.hpp"

namespace xwalk::nn {

nlohmann::json config_to_json(const ModelConfig& config);
/// Missing keys keep their defaults; unknown architectures and bad sizes throw
/// ConfigValidationError.
ModelConfig config_from_json(const nlohmann::json& j, ModelConfig base = {});

/// Self-describing model document: config, scaler, parameters and the
/// training summary. With `best` set, the best-validation parameters are
/// written instead of the final ones. Wall-clock times are left out so that
/// identical runs produce identical files.
std::string checkpoint_to_json(const TrainedModel& model, bool best = false);
TrainedModel checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const TrainedModel& model, bool best = false);
TrainedModel load_checkpoint(const std::filesystem::path& path);

/// `step,train_mse,val_mse,wall_seconds`
std::string format_training_log(const std::vector<TrainingLogEntry>& history);

}  // namespace xwalk::nn
