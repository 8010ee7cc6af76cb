#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "xwalk/config.hpp"

namespace xwalk {

/// Run directory: <output_root>/run-<seed>-<config digest>. The name depends
/// only on the config content, so separate stage invocations agree on it.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path stage(std::string_view name) const { return root / std::string(name); }
};

RunPaths run_paths(const RunConfig& config);

inline constexpr std::string_view kStages[] = {"synth", "preprocess", "classify", "augment",
                                                "train", "evaluate", "decide"};

/// What a stage did: its directory and a short JSON summary for the CLI.
struct StageResult {
  std::string stage;
  std::filesystem::path dir;
  nlohmann::json summary;
};

StageResult cmd_synth(const RunConfig& config);
StageResult cmd_preprocess(const RunConfig& config);
StageResult cmd_classify(const RunConfig& config);
StageResult cmd_augment(const RunConfig& config);
StageResult cmd_train(const RunConfig& config);
StageResult cmd_evaluate(const RunConfig& config);
StageResult cmd_decide(const RunConfig& config);
/// Every stage in order; synth only when the config has no input files.
std::vector<StageResult> cmd_all(const RunConfig& config);

/// Reads <stage>/manifest.json. Throws MissingUpstreamArtifact when it is
/// absent or carries another schema version.
nlohmann::json require_stage(const RunPaths& paths, std::string_view stage);

}  // namespace xwalk
