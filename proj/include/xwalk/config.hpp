#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include <json.hpp>

#include "xwalk/ingest.hpp"
#include "xwalk/nn/models.hpp"
#include "xwalk/preprocess.hpp"
#include "xwalk/subclass.hpp"
#include "xwalk/svm.hpp"
#include "xwalk/synthgen.hpp"

namespace xwalk {

inline constexpr int kSchemaVersion = 1;

/// Where the sub-class flag fed to the regressors comes from.
enum class LabelOrigin { Classifier, GroundTruth };

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_root = "runs";
  int workers = 1;

  // Inputs. Without explicit files the synth stage provides them.
  std::optional<std::filesystem::path> tracks_file;
  std::optional<std::filesystem::path> spat_file;
  std::optional<std::filesystem::path> ground_truth_file;

  ScenarioConfig scenario = ScenarioConfig::defaults();
  std::vector<AnomalyKind> anomalies;

  CalibrationConfig calibration;
  AreaConfig areas = ScenarioConfig::defaults().areas;
  std::map<Area, int> phase_map = ScenarioConfig::defaults().phase_map;
  CriteriaThresholds criteria;

  SvmOptions svm;
  LabelOrigin label_origin = LabelOrigin::Classifier;

  std::vector<int> windows = {5, 10, 20, 40};
  std::optional<std::size_t> random_m;  // per-trajectory sample size; all windows when unset
  double train_fraction = 73.0 / 96.0;
  double validation_fraction = 0.1;

  std::vector<nn::Architecture> architectures = {nn::Architecture::Feedforward, nn::Architecture::Lstm,
                                                 nn::Architecture::Gru, nn::Architecture::Transformer};
  std::vector<int> ablation_windows = {10, 20};
  nn::ModelConfig model;  // architecture, window and seed are set per grid cell

  double buffer_s = 3.0;

  bool uses_synth() const { return !tracks_file.has_value(); }

  /// Sets the run seed and the scene and classifier seeds derived from it.
  void set_seed(std::uint64_t s) {
    seed = s;
    scenario.seed = s;
    svm.seed = s;
  }

  /// Throws ConfigValidationError.
  void validate() const;

  /// Canonical content snapshot. The output root and worker count are left
  /// out: they change where and how fast, not what, a run produces.
  nlohmann::json snapshot() const;

  /// Relative input paths resolve against `base_dir`.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static RunConfig load(const std::filesystem::path& path);
};

/// One trained model of the experiment grid.
struct GridSpec {
  nn::Architecture architecture = nn::Architecture::Gru;
  int window = 10;
  bool include_subclass = true;

  std::string name() const;  // e.g. "gru_w10_sub"
};

/// Every architecture at every window with the flag, plus flag-free twins for
/// the ablation windows. Ordered by window, then architecture, flagged first.
std::vector<GridSpec> grid_specs(const RunConfig& config);

/// Windows needed by the grid, ascending.
std::vector<int> required_windows(const RunConfig& config);

/// Full model config for one cell with a seed derived from the run seed.
nn::ModelConfig cell_model_config(const RunConfig& config, const GridSpec& spec);

nlohmann::json areas_to_json(const AreaConfig& areas);
AreaConfig areas_from_json(const nlohmann::json& j);
nlohmann::json criteria_to_json(const CriteriaThresholds& th);
CriteriaThresholds criteria_from_json(const nlohmann::json& j, CriteriaThresholds base = {});

}  // namespace xwalk
