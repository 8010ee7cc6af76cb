#include "xwalk/config.hpp"

#include <algorithm>
#include <set>

#include "xwalk/csv.hpp"
#include "xwalk/error.hpp"
#include "xwalk/nn/checkpoint.hpp"

namespace xwalk {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorKind::ConfigValidationError, what); }

std::optional<std::filesystem::path> optional_path(const json& j, const char* key,
                                                   const std::filesystem::path& base_dir) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  std::filesystem::path p = j.at(key).get<std::string>();
  return p.is_absolute() ? p : base_dir / p;
}

}  // namespace

json areas_to_json(const AreaConfig& areas) {
  json out = json::object();
  for (std::size_t i = 0; i < areas.crossings.size(); ++i) {
    json verts = json::array();
    for (const auto& v : areas.crossings[i].vertices()) verts.push_back({v.x(), v.y()});
    out[std::string(to_string(kCrossings[i]))] = verts;
  }
  return out;
}

AreaConfig areas_from_json(const json& j) {
  AreaConfig areas;
  std::set<Area> seen;
  for (const auto& [name, verts] : j.items()) {
    const auto a = area_from_string(name);
    if (!a || !is_crossing(*a)) invalid("unknown crossing area '" + name + "'");
    std::vector<Vec2> pts;
    for (const auto& v : verts) pts.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
    areas.crossings[static_cast<std::size_t>(index_of(*a))] = ConvexPolygon(std::move(pts));
    seen.insert(*a);
  }
  if (seen.size() != kNumCrossings) invalid("areas must define all four crossings");
  return areas;
}

json criteria_to_json(const CriteriaThresholds& th) {
  return json{{"speed_normal", th.speed_normal},
              {"accel_window_s", th.accel_window_s},
              {"accel_ratio", th.accel_ratio},
              {"yaw_std_high", th.yaw_std_high},
              {"wheelchair_height_min", th.wheelchair_height_min},
              {"wheelchair_height_max", th.wheelchair_height_max},
              {"squareness_tol", th.squareness_tol}};
}

CriteriaThresholds criteria_from_json(const json& j, CriteriaThresholds th) {
  th.speed_normal = j.value("speed_normal", th.speed_normal);
  th.accel_window_s = j.value("accel_window_s", th.accel_window_s);
  th.accel_ratio = j.value("accel_ratio", th.accel_ratio);
  th.yaw_std_high = j.value("yaw_std_high", th.yaw_std_high);
  th.wheelchair_height_min = j.value("wheelchair_height_min", th.wheelchair_height_min);
  th.wheelchair_height_max = j.value("wheelchair_height_max", th.wheelchair_height_max);
  th.squareness_tol = j.value("squareness_tol", th.squareness_tol);
  return th;
}

void RunConfig::validate() const {
  if (workers < 1) invalid("workers must be at least 1");
  if (tracks_file.has_value() != spat_file.has_value()) invalid("tracks and spat inputs must be given together");
  for (const auto* p : {&tracks_file, &spat_file, &ground_truth_file}) {
    if (*p && !std::filesystem::exists(**p)) invalid("input file " + (*p)->string() + " does not exist");
  }
  if (label_origin == LabelOrigin::GroundTruth && !uses_synth() && !ground_truth_file) {
    invalid("ground-truth labels need a ground_truth input or the synth stage");
  }
  if (uses_synth()) {
    try {
      scenario.validate();
    } catch (const Error& e) {
      invalid(e.what());
    }
  }
  try {
    calibration.validate();
    areas.validate();
    criteria.validate();
    model.validate();
  } catch (const Error& e) {
    invalid(e.what());
  }
  for (Area a : kCrossings) {
    if (!phase_map.contains(a)) invalid(std::string(to_string(a)) + " has no signal phase");
  }
  if (svm.c <= 0.0 || svm.folds < 2 || !(svm.split_ratio > 0.0 && svm.split_ratio < 1.0)) {
    invalid("classifier settings out of range");
  }
  if (windows.empty()) invalid("at least one window length is needed");
  for (int w : windows) {
    if (w < 2) invalid("window lengths must be at least 2");
  }
  for (int w : ablation_windows) {
    if (std::find(windows.begin(), windows.end(), w) == windows.end()) {
      invalid("ablation window " + std::to_string(w) + " is not in the window list");
    }
  }
  if (random_m && *random_m == 0) invalid("random_m must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) invalid("train_fraction must lie in (0, 1)");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) invalid("validation_fraction must lie in [0, 1)");
  if (architectures.empty()) invalid("at least one architecture is needed");
  if (!(buffer_s >= 3.0 && buffer_s <= 5.0)) invalid("buffer_s must lie in [3, 5]");
}

json RunConfig::snapshot() const {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = seed;
  auto path_or_null = [](const std::optional<std::filesystem::path>& p) {
    return p ? json(p->generic_string()) : json(nullptr);
  };
  j["inputs"] = {{"tracks", path_or_null(tracks_file)},
                 {"spat", path_or_null(spat_file)},
                 {"ground_truth", path_or_null(ground_truth_file)}};
  if (uses_synth()) {
    json s = scenario.to_json();
    json kinds = json::array();
    for (auto a : anomalies) kinds.push_back(std::string(to_string(a)));
    s["anomalies"] = kinds;
    j["synth"] = s;
  }
  const auto& m = calibration.affine;
  j["calibration"] = {{"affine", {{m(0, 0), m(0, 1), m(0, 2)}, {m(1, 0), m(1, 1), m(1, 2)}}}};
  j["areas"] = areas_to_json(areas);
  json phases = json::object();
  for (const auto& [a, p] : phase_map) phases[std::string(to_string(a))] = p;
  j["phase_map"] = phases;
  j["criteria"] = criteria_to_json(criteria);
  j["classify"] = {{"kernel", svm.kernel == SvmKernel::Rbf ? "rbf" : "linear"},
                   {"c", svm.c},
                   {"split_ratio", svm.split_ratio},
                   {"folds", svm.folds},
                   {"label_origin", label_origin == LabelOrigin::Classifier ? "classifier" : "ground_truth"}};
  j["augment"] = {{"windows", windows},
                  {"random_m", random_m ? json(*random_m) : json(nullptr)},
                  {"train_fraction", train_fraction},
                  {"validation_fraction", validation_fraction}};
  json archs = json::array();
  for (auto a : architectures) archs.push_back(std::string(nn::to_string(a)));
  json mj = nn::config_to_json(model);
  for (const char* key : {"architecture", "window", "seed"}) mj.erase(key);
  j["train"] = {{"architectures", archs}, {"ablation_windows", ablation_windows}, {"model", mj}};
  j["decide"] = {{"buffer_s", buffer_s}};
  return j;
}

RunConfig RunConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  try {
    if (j.value("schema_version", kSchemaVersion) != kSchemaVersion) invalid("unsupported config schema_version");
    if (!j.contains("seed")) invalid("config needs a seed");
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output_root")) {
      std::filesystem::path out = j.at("output_root").get<std::string>();
      c.output_root = out.is_absolute() ? out : base_dir / out;
    } else {
      c.output_root = base_dir / "runs";
    }
    c.workers = j.value("workers", c.workers);

    if (j.contains("inputs")) {
      const auto& in = j.at("inputs");
      c.tracks_file = optional_path(in, "tracks", base_dir);
      c.spat_file = optional_path(in, "spat", base_dir);
      c.ground_truth_file = optional_path(in, "ground_truth", base_dir);
    }
    if (j.contains("synth")) {
      const auto& s = j.at("synth");
      c.scenario = ScenarioConfig::from_json(s);
      if (s.contains("anomalies")) {
        for (const auto& a : s.at("anomalies")) {
          const auto name = a.get<std::string>();
          const auto kind = anomaly_from_string(name);
          if (!kind || *kind == AnomalyKind::None) invalid("unknown anomaly '" + name + "'");
          c.anomalies.push_back(*kind);
        }
      }
    }
    c.scenario.seed = c.seed;
    c.areas = j.contains("areas") ? areas_from_json(j.at("areas")) : c.scenario.areas;
    if (j.contains("phase_map")) {
      c.phase_map.clear();
      for (const auto& [name, phase] : j.at("phase_map").items()) {
        const auto a = area_from_string(name);
        if (!a || !is_crossing(*a)) invalid("unknown crossing area '" + name + "'");
        c.phase_map[*a] = phase.get<int>();
      }
    } else {
      c.phase_map = c.scenario.phase_map;
    }
    if (j.contains("calibration")) {
      const auto rows = j.at("calibration").at("affine").get<std::vector<std::vector<double>>>();
      if (rows.size() != 2 || rows[0].size() != 3 || rows[1].size() != 3) invalid("calibration.affine must be 2x3");
      for (int r = 0; r < 2; ++r) {
        for (int col = 0; col < 3; ++col) c.calibration.affine(r, col) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)];
      }
    }
    if (j.contains("criteria")) c.criteria = criteria_from_json(j.at("criteria"));
    if (j.contains("classify")) {
      const auto& k = j.at("classify");
      const auto kernel = k.value("kernel", std::string("rbf"));
      if (kernel != "rbf" && kernel != "linear") invalid("unknown kernel '" + kernel + "'");
      c.svm.kernel = kernel == "rbf" ? SvmKernel::Rbf : SvmKernel::Linear;
      c.svm.c = k.value("c", c.svm.c);
      c.svm.split_ratio = k.value("split_ratio", c.svm.split_ratio);
      c.svm.folds = k.value("folds", c.svm.folds);
      const auto origin = k.value("label_origin", std::string("classifier"));
      if (origin != "classifier" && origin != "ground_truth") invalid("unknown label_origin '" + origin + "'");
      c.label_origin = origin == "classifier" ? LabelOrigin::Classifier : LabelOrigin::GroundTruth;
    }
    c.svm.seed = c.seed;
    if (j.contains("augment")) {
      const auto& a = j.at("augment");
      c.windows = a.value("windows", c.windows);
      if (a.contains("random_m") && !a.at("random_m").is_null()) c.random_m = a.at("random_m").get<std::size_t>();
      c.train_fraction = a.value("train_fraction", c.train_fraction);
      c.validation_fraction = a.value("validation_fraction", c.validation_fraction);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      if (t.contains("architectures")) {
        c.architectures.clear();
        for (const auto& a : t.at("architectures")) {
          const auto name = a.get<std::string>();
          const auto arch = nn::architecture_from_string(name);
          if (!arch) invalid("unknown architecture '" + name + "'");
          c.architectures.push_back(*arch);
        }
      }
      c.ablation_windows = t.value("ablation_windows", c.ablation_windows);
      if (t.contains("model")) c.model = nn::config_from_json(t.at("model"));
    }
    if (j.contains("decide")) c.buffer_s = j.at("decide").value("buffer_s", c.buffer_s);
  } catch (const json::exception& e) {
    invalid(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) invalid("config file " + path.string() + " does not exist");
  json j;
  try {
    j = json::parse(csv::read_file(path));
  } catch (const json::exception& e) {
    invalid("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, path.parent_path());
}

std::string GridSpec::name() const {
  return std::string(nn::to_string(architecture)) + "_w" + std::to_string(window) + (include_subclass ? "_sub" : "_nosub");
}

std::vector<GridSpec> grid_specs(const RunConfig& config) {
  std::vector<GridSpec> out;
  std::vector<int> windows = config.windows;
  std::sort(windows.begin(), windows.end());
  windows.erase(std::unique(windows.begin(), windows.end()), windows.end());
  for (int w : windows) {
    const bool ablate = std::find(config.ablation_windows.begin(), config.ablation_windows.end(), w) !=
                        config.ablation_windows.end();
    for (auto a : config.architectures) {
      out.push_back({a, w, true});
      if (ablate) out.push_back({a, w, false});
    }
  }
  return out;
}

std::vector<int> required_windows(const RunConfig& config) {
  std::vector<int> windows = config.windows;
  std::sort(windows.begin(), windows.end());
  windows.erase(std::unique(windows.begin(), windows.end()), windows.end());
  return windows;
}

nn::ModelConfig cell_model_config(const RunConfig& config, const GridSpec& spec) {
  nn::ModelConfig m = config.model;
  m.architecture = spec.architecture;
  m.window = spec.window;
  // Distinct, reproducible stream per cell; the flag twins share a seed so the
  // ablation compares like with like.
  m.seed = config.seed * 1000003ULL + static_cast<std::uint64_t>(spec.architecture) * 7919ULL +
           static_cast<std::uint64_t>(spec.window);
  return m;
}

}  // namespace xwalk
