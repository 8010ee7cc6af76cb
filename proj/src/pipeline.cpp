#include "xwalk/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "xwalk/augment.hpp"
#include "xwalk/csv.hpp"
#include "xwalk/error.hpp"
#include "xwalk/evaluate.hpp"
#include "xwalk/features.hpp"
#include "xwalk/hashing.hpp"
#include "xwalk/nn/checkpoint.hpp"
#include "xwalk/pca.hpp"
#include "xwalk/plot.hpp"
#include "xwalk/predict.hpp"
#include "xwalk/svm.hpp"
#include "xwalk/synthgen.hpp"

namespace xwalk {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* kNormalColor = "#1f77b4";
const char* kWheelchairColor = "#ff7f0e";
const char* kUnknownColor = "#7f7f7f";

// ---------------------------------------------------------------------------
// Manifests

std::string manifest_path_of(const RunPaths& paths, const fs::path& file) {
  const auto rel = fs::relative(file, paths.root);
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return fs::absolute(file).generic_string();
}

/// Collects a stage's files while it runs, then writes the manifest.
class StageWriter {
 public:
  StageWriter(const RunConfig& config, std::string stage)
      : config_(config), paths_(run_paths(config)), stage_(std::move(stage)), dir_(paths_.stage(stage_)) {
    fs::create_directories(dir_);
    fs::remove(dir_ / "manifest.json");
  }

  const RunPaths& paths() const { return paths_; }
  const fs::path& dir() const { return dir_; }

  void input(const fs::path& file) { inputs_.push_back(file); }

  fs::path write(const std::string& name, std::string_view content) {
    const fs::path p = dir_ / name;
    csv::write_file(p, content);
    outputs_.push_back(p);
    return p;
  }

  /// Content that legitimately differs between identical runs (wall clock).
  fs::path write_volatile(const std::string& name, std::string_view content) {
    const fs::path p = dir_ / name;
    csv::write_file(p, content);
    volatile_.push_back(p);
    return p;
  }

  StageResult finish(json summary) {
    json m;
    m["stage"] = stage_;
    m["schema_version"] = kSchemaVersion;
    m["seed"] = config_.seed;
    m["config"] = config_.snapshot();
    json in = json::array();
    for (const auto& p : inputs_) in.push_back({{"path", manifest_path_of(paths_, p)}, {"sha256", sha256_file(p)}});
    m["inputs"] = in;
    json out = json::array();
    for (const auto& p : outputs_) out.push_back({{"path", manifest_path_of(paths_, p)}, {"sha256", sha256_file(p)}});
    m["outputs"] = out;
    json vol = json::array();
    for (const auto& p : volatile_) vol.push_back(manifest_path_of(paths_, p));
    m["volatile_outputs"] = vol;
    m["summary"] = summary;
    csv::write_file(dir_ / "manifest.json", m.dump(2) + "\n");
    return {stage_, dir_, std::move(summary)};
  }

 private:
  const RunConfig& config_;
  RunPaths paths_;
  std::string stage_;
  fs::path dir_;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
  std::vector<fs::path> volatile_;
};

// ---------------------------------------------------------------------------
// Shared inputs

fs::path tracks_input(const RunConfig& config, const RunPaths& paths) {
  if (config.tracks_file) return *config.tracks_file;
  require_stage(paths, "synth");
  return paths.stage("synth") / "tracks.csv";
}

fs::path spat_input(const RunConfig& config, const RunPaths& paths) {
  if (config.spat_file) return *config.spat_file;
  require_stage(paths, "synth");
  return paths.stage("synth") / "spat.csv";
}

std::optional<fs::path> optional_ground_truth(const RunConfig& config, const RunPaths& paths) {
  if (config.ground_truth_file) return config.ground_truth_file;
  if (config.uses_synth() && fs::exists(paths.stage("synth") / "manifest.json")) {
    return paths.stage("synth") / "ground_truth.csv";
  }
  return std::nullopt;
}

PhaseTimeline load_timeline(const RunConfig& config, const fs::path& spat) {
  return build_phase_timeline(parse_spat_file(spat), config.phase_map);
}

std::string fmt(double v) { return csv::format_double(v); }

std::string labels_csv(const std::map<std::int64_t, SubClassResult>& labels, const std::string& origin) {
  std::string out = "agent_id,label,source,confidence\n";
  for (const auto& [id, r] : labels) {
    out += std::to_string(id) + ',' + std::string(to_string(r.label)) + ',' +
           (origin.empty() ? std::string(to_string(r.source)) : origin) + ',' + fmt(r.confidence) + '\n';
  }
  return out;
}

std::map<std::int64_t, SubClassResult> parse_flag_labels(const fs::path& path) {
  std::map<std::int64_t, SubClassResult> out;
  bool header = true;
  const std::string text = csv::read_file(path);
  for (const auto line : csv::lines(text)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto f = csv::split(line);
    if (f.size() != 4) throw Error(ErrorKind::SchemaMismatch, "flag label rows need 4 fields");
    const auto id = csv::parse_int(f[0]);
    const auto label = subclass_from_string(csv::trim(f[1]));
    const auto conf = csv::parse_double(f[3]);
    if (!id || !label || !conf) throw Error(ErrorKind::SchemaMismatch, "bad flag label row '" + std::string(line) + "'");
    SubClassResult r;
    r.label = *label;
    r.source = label_source_from_string(csv::trim(f[2])).value_or(LabelSource::FallbackUnknown);
    r.confidence = *conf;
    out[*id] = r;
  }
  return out;
}

struct Split {
  std::set<std::int64_t> train, validation, test;
};

Split read_split(const fs::path& path) {
  const auto j = json::parse(csv::read_file(path));
  Split s;
  for (auto id : j.at("train").get<std::vector<std::int64_t>>()) s.train.insert(id);
  for (auto id : j.at("validation").get<std::vector<std::int64_t>>()) s.validation.insert(id);
  for (auto id : j.at("test").get<std::vector<std::int64_t>>()) s.test.insert(id);
  return s;
}

std::vector<TrainingWindow> windows_of(const std::vector<TrainingWindow>& all, const std::set<std::int64_t>& ids) {
  std::vector<TrainingWindow> out;
  for (const auto& w : all) {
    if (ids.contains(w.agent_id)) out.push_back(w);
  }
  return out;
}

std::string windows_file(int w) { return "windows_w" + std::to_string(w) + ".csv"; }

/// Runs `job(i)` for i in [0, n) on up to `workers` threads. The first
/// failure by index is rethrown after all threads stop.
template <typename Job>
void fan_out(std::size_t n, int workers, Job job) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

// ---------------------------------------------------------------------------

RunPaths run_paths(const RunConfig& config) {
  const std::string digest = sha256_hex(config.snapshot().dump()).substr(0, 12);
  return {config.output_root / ("run-" + std::to_string(config.seed) + "-" + digest)};
}

json require_stage(const RunPaths& paths, std::string_view stage) {
  const fs::path p = paths.stage(stage) / "manifest.json";
  if (!fs::exists(p)) {
    throw Error(ErrorKind::MissingUpstreamArtifact,
                "stage '" + std::string(stage) + "' has not been run (no " + p.string() + ")");
  }
  json m;
  try {
    m = json::parse(csv::read_file(p));
  } catch (const json::exception&) {
    throw Error(ErrorKind::MissingUpstreamArtifact, "manifest " + p.string() + " is unreadable");
  }
  if (m.value("schema_version", 0) != kSchemaVersion) {
    throw Error(ErrorKind::MissingUpstreamArtifact, "manifest " + p.string() + " has another schema version");
  }
  return m;
}

StageResult cmd_synth(const RunConfig& config) {
  config.validate();
  if (!config.uses_synth()) {
    throw Error(ErrorKind::ConfigValidationError, "config names input files; there is nothing to synthesize");
  }
  StageWriter out(config, "synth");
  Scene scene = generate_scene(config.scenario);
  for (AnomalyKind kind : config.anomalies) scene = inject_anomaly(std::move(scene), kind);
  out.write("tracks.csv", format_track_csv(scene.records));
  out.write("spat.csv", format_spat_csv(scene.spat));
  out.write("ground_truth.csv", format_ground_truth_csv(scene.truth));
  out.write("scenario.json", config.scenario.to_json().dump(2) + "\n");
  json anomalies = json::array();
  for (const auto& g : scene.truth) {
    if (g.anomaly != AnomalyKind::None) anomalies.push_back({{"agent_id", g.agent_id}, {"kind", to_string(g.anomaly)}});
  }
  return out.finish({{"agents", scene.agents.size()},
                     {"records", scene.records.size()},
                     {"spat_events", scene.spat.size()},
                     {"anomalies", anomalies}});
}

StageResult cmd_preprocess(const RunConfig& config) {
  config.validate();
  const RunPaths paths = run_paths(config);
  const fs::path tracks = tracks_input(config, paths);
  StageWriter out(config, "preprocess");
  out.input(tracks);
  const TrackParseResult parsed = parse_track_file(tracks);
  const PreprocessResult result = preprocess_pipeline(parsed.records, config.areas, config.calibration);
  out.write("trajectories.jsonl", [&] {
    std::string s;
    for (const auto& t : result.trajectories) s += trajectory_to_json(t) + '\n';
    return s;
  }());
  json malformed = json::array();
  for (const auto& r : parsed.report.malformed) malformed.push_back({{"line", r.line}, {"reason", r.reason}});
  const auto& r = result.report;
  json report = {{"parse",
                  {{"data_rows", parsed.report.data_rows},
                   {"had_header", parsed.report.had_header},
                   {"non_monotonic_timestamps", parsed.report.non_monotonic_timestamps},
                   {"malformed", malformed},
                   {"warnings", parsed.report.warnings}}},
                 {"filter",
                  {{"input_records", r.input_records},
                   {"grouped_trajectories", r.grouped_trajectories},
                   {"duplicates", r.duplicates},
                   {"failed_rule1", r.failed_rule1},
                   {"failed_rule2", r.failed_rule2},
                   {"failed_rule3", r.failed_rule3},
                   {"kept", r.kept}}}};
  out.write("report.json", report.dump(2) + "\n");
  return out.finish({{"trajectories", r.kept}, {"malformed_rows", parsed.report.malformed.size()}});
}

StageResult cmd_classify(const RunConfig& config) {
  config.validate();
  const RunPaths paths = run_paths(config);
  require_stage(paths, "preprocess");
  const fs::path traj_file = paths.stage("preprocess") / "trajectories.jsonl";
  const fs::path spat = spat_input(config, paths);
  StageWriter out(config, "classify");
  out.input(traj_file);
  out.input(spat);
  const auto trajectories = read_trajectories(traj_file);
  const PhaseTimeline timeline = load_timeline(config, spat);

  std::vector<LabeledFeatures> rows;
  for (const auto& t : trajectories) {
    LabeledFeatures row;
    row.agent_id = t.agent_id;
    row.features = extract_features(t);
    row.result = apply_criteria(t, row.features, timeline, config.criteria);
    rows.push_back(row);
  }
  out.write("features.csv", format_labeled_features_csv(rows));

  std::vector<FeatureRow> all, known, unknown;
  std::vector<SubClass> known_labels;
  for (const auto& r : rows) {
    all.push_back(r.features.as_vector());
    if (r.result.label == SubClass::Unknown) {
      unknown.push_back(r.features.as_vector());
    } else {
      known.push_back(r.features.as_vector());
      known_labels.push_back(r.result.label);
    }
  }

  json summary;
  const PcaModel pca = fit_pca(all);
  out.write("pca.json", pca.to_json() + "\n");
  {
    std::string s = "agent_id,pc1,pc2,criteria_label\n";
    std::map<SubClass, plot::Series> series;
    series[SubClass::Normal] = {"normal", kNormalColor, {}, {}};
    series[SubClass::Wheelchair] = {"wheelchair", kWheelchairColor, {}, {}};
    series[SubClass::Unknown] = {"unknown", kUnknownColor, {}, {}};
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Eigen::Vector2d pc = pca.project(all[i]);
      s += std::to_string(rows[i].agent_id) + ',' + fmt(pc[0]) + ',' + fmt(pc[1]) + ',' +
           std::string(to_string(rows[i].result.label)) + '\n';
      series[rows[i].result.label].x.push_back(pc[0]);
      series[rows[i].result.label].y.push_back(pc[1]);
    }
    out.write("pca_scatter.csv", s);
    out.write("pca_scatter.svg", plot::scatter_svg({series[SubClass::Normal], series[SubClass::Wheelchair],
                                                     series[SubClass::Unknown]},
                                                    {"Sub-class features, first two principal components", "PC1",
                                                     "PC2"}));
  }
  summary["pca_explained_variance_ratio"] = {pca.explained_variance_ratio[0], pca.explained_variance_ratio[1]};

  const SvmTrainResult svm = train_svm(known, known_labels, config.svm);
  out.write("svm.json", svm.model.to_json() + "\n");
  out.write("svm_report.json", json{{"cv_accuracy", svm.report.cv_accuracy},
                                    {"fold_accuracies", svm.report.fold_accuracies},
                                    {"test_accuracy", svm.report.test_accuracy},
                                    {"n_train", svm.report.n_train},
                                    {"n_test", svm.report.n_test}}
                                   .dump(2) + "\n");
  summary["svm_cv_accuracy"] = svm.report.cv_accuracy;
  summary["svm_test_accuracy"] = svm.report.test_accuracy;

  const auto relabeled = relabel_unknowns(svm.model, unknown);
  std::map<std::int64_t, SubClassResult> labels;
  std::size_t u = 0;
  std::map<std::string, int> by_source;
  for (const auto& r : rows) {
    labels[r.agent_id] = r.result.label == SubClass::Unknown ? relabeled[u++] : r.result;
    ++by_source[std::string(to_string(labels[r.agent_id].source))];
  }
  out.write("labels.csv", labels_csv(labels, ""));
  summary["label_sources"] = by_source;

  // Labels that feed the regressors' sub-class flag.
  std::map<std::int64_t, SubClassResult> flags = labels;
  std::string origin;
  const auto truth_file = optional_ground_truth(config, paths);
  std::map<std::int64_t, SubClass> truth;
  if (truth_file) {
    out.input(*truth_file);
    for (const auto& g : parse_ground_truth_csv(csv::read_file(*truth_file))) truth[g.agent_id] = g.true_subclass();
  }
  if (config.label_origin == LabelOrigin::GroundTruth) {
    if (!truth_file) throw Error(ErrorKind::MissingUpstreamArtifact, "ground-truth labels requested but none exist");
    origin = "ground_truth";
    for (auto& [id, r] : flags) {
      const auto it = truth.find(id);
      if (it == truth.end() || it->second == SubClass::Unknown) {
        throw Error(ErrorKind::SchemaMismatch, "no pedestrian ground truth for agent " + std::to_string(id));
      }
      r = {it->second, LabelSource::FallbackUnknown, 1.0};
    }
  }
  out.write("flag_labels.csv", labels_csv(flags, origin));
  if (!truth.empty()) {
    std::size_t criteria_match = 0, final_match = 0;
    for (const auto& r : rows) {
      const auto it = truth.find(r.agent_id);
      if (it == truth.end()) continue;
      criteria_match += r.result.label == it->second;
      final_match += labels[r.agent_id].label == it->second;
    }
    summary["criteria_agreement_with_truth"] = static_cast<double>(criteria_match) / static_cast<double>(rows.size());
    summary["final_agreement_with_truth"] = static_cast<double>(final_match) / static_cast<double>(rows.size());
  }
  out.write("report.json", summary.dump(2) + "\n");
  return out.finish(summary);
}

StageResult cmd_augment(const RunConfig& config) {
  config.validate();
  const RunPaths paths = run_paths(config);
  require_stage(paths, "preprocess");
  const fs::path traj_file = paths.stage("preprocess") / "trajectories.jsonl";
  StageWriter out(config, "augment");
  out.input(traj_file);
  const auto trajectories = read_trajectories(traj_file);

  std::vector<std::int64_t> ids;
  for (const auto& t : trajectories) ids.push_back(t.agent_id);
  const TrajectorySplit split = split_trajectories(ids, config.train_fraction, config.validation_fraction, config.seed);
  out.write("split.json", json{{"train", split.train}, {"validation", split.validation}, {"test", split.test}}.dump(2) + "\n");

  json counts = json::object();
  for (int w : required_windows(config)) {
    std::vector<TrainingWindow> all;
    std::size_t skipped_short = 0;
    for (const auto& t : trajectories) {
      auto windows = range_selection(t, static_cast<std::size_t>(w));
      if (windows.empty()) ++skipped_short;
      if (config.random_m) {
        const std::size_t m = std::min(*config.random_m, windows.size());
        const auto seed = config.seed * 1000003ULL + static_cast<std::uint64_t>(t.agent_id) * 101ULL +
                          static_cast<std::uint64_t>(w);
        windows = random_selection(windows, m, seed);
      }
      all.insert(all.end(), windows.begin(), windows.end());
    }
    out.write(windows_file(w), format_windows_csv(all));
    std::size_t n_train = 0, n_val = 0, n_test = 0;
    const std::set<std::int64_t> train(split.train.begin(), split.train.end());
    const std::set<std::int64_t> val(split.validation.begin(), split.validation.end());
    for (const auto& win : all) {
      if (train.contains(win.agent_id)) ++n_train;
      else if (val.contains(win.agent_id)) ++n_val;
      else ++n_test;
    }
    counts[std::to_string(w)] = {{"windows", all.size()},
                                 {"train", n_train},
                                 {"validation", n_val},
                                 {"test", n_test},
                                 {"trajectories_too_short", skipped_short}};
  }
  json summary = {{"trajectories",
                   {{"train", split.train.size()}, {"validation", split.validation.size()}, {"test", split.test.size()}}},
                  {"windows", counts}};
  out.write("report.json", summary.dump(2) + "\n");
  return out.finish(summary);
}

StageResult cmd_train(const RunConfig& config) {
  config.validate();
  const RunPaths paths = run_paths(config);
  require_stage(paths, "augment");
  require_stage(paths, "classify");
  const fs::path spat = spat_input(config, paths);
  const fs::path flags_file = paths.stage("classify") / "flag_labels.csv";
  const fs::path split_file = paths.stage("augment") / "split.json";
  StageWriter out(config, "train");
  out.input(spat);
  out.input(flags_file);
  out.input(split_file);
  const PhaseTimeline timeline = load_timeline(config, spat);
  const auto flags = parse_flag_labels(flags_file);
  const Split split = read_split(split_file);

  std::map<int, std::vector<TrainingWindow>> windows;
  for (int w : required_windows(config)) {
    const fs::path f = paths.stage("augment") / windows_file(w);
    out.input(f);
    windows[w] = read_windows(f);
  }

  const auto specs = grid_specs(config);
  std::vector<std::optional<nn::TrainedModel>> models(specs.size());
  std::vector<double> seconds(specs.size(), 0.0);
  fan_out(specs.size(), config.workers, [&](std::size_t i) {
    const GridSpec& spec = specs[i];
    const auto& all = windows.at(spec.window);
    const WindowDataset train_set =
        build_dataset(windows_of(all, split.train), timeline, spec.include_subclass, flags);
    const WindowDataset val_set =
        build_dataset(windows_of(all, split.validation), timeline, spec.include_subclass, flags);
    const auto t0 = std::chrono::steady_clock::now();
    models[i] = nn::train(cell_model_config(config, spec), train_set, val_set);
    seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  json cells = json::array();
  json timings = json::object();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& spec = specs[i];
    const auto& m = *models[i];
    const std::string name = spec.name();
    out.write(name + "/model.json", nn::checkpoint_to_json(m) + "\n");
    out.write(name + "/model_best.json", nn::checkpoint_to_json(m, true) + "\n");
    out.write_volatile(name + "/train_log.csv", nn::format_training_log(m.history));
    plot::Series train_curve{"train", kNormalColor, {}, {}};
    plot::Series val_curve{"validation", kWheelchairColor, {}, {}};
    for (const auto& e : m.history) {
      train_curve.x.push_back(e.step);
      train_curve.y.push_back(e.train_mse);
      if (std::isfinite(e.val_mse)) {
        val_curve.x.push_back(e.step);
        val_curve.y.push_back(e.val_mse);
      }
    }
    out.write(name + "/loss.svg", plot::line_svg({train_curve, val_curve}, {"Training loss, " + name, "step", "MSE (s^2)"}));
    cells.push_back({{"name", name},
                     {"architecture", std::string(nn::to_string(spec.architecture))},
                     {"window", spec.window},
                     {"include_subclass", spec.include_subclass},
                     {"parameters", m.parameter_count()},
                     {"initial_train_mse", m.initial_train_mse},
                     {"final_train_mse", m.final_train_mse},
                     {"best_step", m.best_step},
                     {"best_val_mse", std::isfinite(m.best_val_mse) ? json(m.best_val_mse) : json(nullptr)}});
    timings[name] = seconds[i];
  }
  out.write("report.json", json{{"cells", cells}}.dump(2) + "\n");
  out.write_volatile("timings.json", timings.dump(2) + "\n");
  return out.finish({{"cells", specs.size()}});
}

StageResult cmd_evaluate(const RunConfig& config) {
  config.validate();
  const RunPaths paths = run_paths(config);
  require_stage(paths, "train");
  require_stage(paths, "preprocess");
  const fs::path spat = spat_input(config, paths);
  const fs::path flags_file = paths.stage("classify") / "flag_labels.csv";
  const fs::path split_file = paths.stage("augment") / "split.json";
  const fs::path traj_file = paths.stage("preprocess") / "trajectories.jsonl";
  StageWriter out(config, "evaluate");
  for (const auto& f : {spat, flags_file, split_file, traj_file}) out.input(f);
  const PhaseTimeline timeline = load_timeline(config, spat);
  const auto flags = parse_flag_labels(flags_file);
  const Split split = read_split(split_file);

  const auto specs = grid_specs(config);
  std::map<int, std::vector<TrainingWindow>> test_windows;
  for (int w : required_windows(config)) {
    const fs::path f = paths.stage("augment") / windows_file(w);
    out.input(f);
    test_windows[w] = windows_of(read_windows(f), split.test);
  }

  std::vector<GridRun> runs;
  std::vector<TrajectoryErrorReport> per_traj;
  std::vector<std::optional<nn::TrainedModel>> models;
  for (const auto& spec : specs) {
    const fs::path model_file = paths.stage("train") / spec.name() / "model.json";
    out.input(model_file);
    models.push_back(nn::load_checkpoint(model_file));
    const WindowDataset test = build_dataset(test_windows.at(spec.window), timeline, spec.include_subclass, flags);
    GridRun run{spec.architecture, spec.window, spec.include_subclass, models.back()->predict_rows(test.x), test.y};
    if (test.size() == 0) throw Error(ErrorKind::EmptyTestSet, "no held-out windows for " + spec.name());
    per_traj.push_back(per_trajectory_rmse(run.predicted, test));
    runs.push_back(std::move(run));
  }
  const EvalGrid grid = evaluate_grid(runs);
  const auto ablation = ablation_subclass(grid);

  std::string grid_csv = "architecture,window,include_subclass,mse,rmse,n_test_windows\n";
  json cells = json::array();
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    const auto& c = grid.cells[i];
    grid_csv += std::string(nn::to_string(c.architecture)) + ',' + std::to_string(c.window) + ',' +
                (c.include_subclass ? "true" : "false") + ',' + fmt(c.metrics.mse) + ',' + fmt(c.metrics.rmse) + ',' +
                std::to_string(c.metrics.n) + '\n';
    json cj = to_json(c);
    cj["name"] = specs[i].name();
    cj["per_trajectory_rmse"] = to_json(per_traj[i].rmse_box);
    cells.push_back(cj);
  }
  out.write("grid.csv", grid_csv);

  std::string ablation_csv = "architecture,window,mse_with_subclass,mse_without_subclass,difference\n";
  json ablation_j = json::array();
  for (const auto& p : ablation) {
    ablation_csv += std::string(nn::to_string(p.architecture)) + ',' + std::to_string(p.window) + ',' + fmt(p.mse_with) +
                    ',' + fmt(p.mse_without) + ',' + fmt(p.difference) + '\n';
    ablation_j.push_back(to_json(p));
  }
  out.write("ablation.csv", ablation_csv);

  // Per-trajectory RMSE distributions, one box per flagged cell.
  std::string box_csv = "cell,agent_id,windows,mse,rmse\n";
  std::vector<std::pair<std::string, BoxStats>> boxes;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    for (const auto& t : per_traj[i].per_trajectory) {
      box_csv += specs[i].name() + ',' + std::to_string(t.agent_id) + ',' + std::to_string(t.windows) + ',' +
                 fmt(t.mse) + ',' + fmt(t.rmse) + '\n';
    }
    if (specs[i].include_subclass) {
      boxes.emplace_back(std::string(nn::to_string(specs[i].architecture)) + " W" + std::to_string(specs[i].window),
                         per_traj[i].rmse_box);
    }
  }
  out.write("per_trajectory_rmse.csv", box_csv);
  out.write("per_trajectory_rmse.svg", plot::box_svg(boxes, {"Per-trajectory RMSE", "model", "RMSE (s)"}));

  json report;
  report["grid"] = cells;
  report["ablation"] = ablation_j;
  if (grid.best) {
    const std::size_t b = *grid.best;
    report["best"] = specs[b].name();
    // Per-point series of the best cell over the held-out trajectories. The
    // absolute error column is this artifact's reading of the per-figure L1
    // loss.
    const auto trajectories = read_trajectories(traj_file);
    std::string series_csv = "agent_id,index,timestamp_ms,predicted_s,target_s,abs_error_s\n";
    std::map<std::int64_t, std::vector<PredictionPoint>> by_agent;
    for (const auto& t : trajectories) {
      if (!split.test.contains(t.agent_id)) continue;
      const auto it = flags.find(t.agent_id);
      std::vector<PredictionPoint> pts;
      try {
        pts = predict_trajectory(*models[b], t, timeline, it == flags.end() ? SubClassResult{} : it->second);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::TrajectoryTooShort) throw;
        continue;
      }
      for (const auto& p : pts) {
        series_csv += std::to_string(t.agent_id) + ',' + std::to_string(p.index) + ',' + std::to_string(p.timestamp_ms) +
                      ',' + fmt(p.predicted_s) + ',' + fmt(p.target_s) + ',' + fmt(p.abs_error()) + '\n';
      }
      by_agent[t.agent_id] = std::move(pts);
    }
    out.write("best_prediction_series.csv", series_csv);
    const auto& trajs = per_traj[b].per_trajectory;
    if (!trajs.empty()) {
      const auto worst = std::max_element(trajs.begin(), trajs.end(),
                                          [](const auto& a, const auto& c) { return a.rmse < c.rmse; });
      const auto best = std::min_element(trajs.begin(), trajs.end(),
                                         [](const auto& a, const auto& c) { return a.rmse < c.rmse; });
      report["best_cell_worst_trajectory"] = {{"agent_id", worst->agent_id}, {"rmse", worst->rmse}};
      report["best_cell_best_trajectory"] = {{"agent_id", best->agent_id}, {"rmse", best->rmse}};
      for (const auto& [tag, id] : {std::pair<std::string, std::int64_t>{"worst", worst->agent_id},
                                    std::pair<std::string, std::int64_t>{"best", best->agent_id}}) {
        const auto& pts = by_agent[id];
        plot::Series pred{"predicted", kNormalColor, {}, {}};
        plot::Series target{"time left to arrive", "#2ca02c", {}, {}};
        plot::Series l1{"absolute error", "#d62728", {}, {}};
        for (const auto& p : pts) {
          const double t_s = static_cast<double>(p.timestamp_ms - pts.front().timestamp_ms) / 1000.0;
          pred.x.push_back(t_s);
          pred.y.push_back(p.predicted_s);
          target.x.push_back(t_s);
          target.y.push_back(p.target_s);
          l1.x.push_back(t_s);
          l1.y.push_back(p.abs_error());
        }
        out.write("arrival_" + tag + "_agent" + std::to_string(id) + ".svg",
                  plot::line_svg({pred, target, l1}, {"Arrival prediction, agent " + std::to_string(id) + " (" +
                                                          specs[b].name() + ")",
                                                      "seconds since first prediction", "seconds"}));
      }
    }
  }
  out.write("report.json", report.dump(2) + "\n");
  // Wall clock per trained cell, kept apart from the deterministic report.
  const fs::path train_timings = paths.stage("train") / "timings.json";
  if (fs::exists(train_timings)) out.write_volatile("timings.json", csv::read_file(train_timings));
  json summary = {{"cells", grid.cells.size()}};
  if (grid.best) {
    summary["best"] = specs[*grid.best].name();
    summary["best_mse"] = grid.cells[*grid.best].metrics.mse;
  }
  return out.finish(summary);
}

StageResult cmd_decide(const RunConfig& config) {
  config.validate();
  const RunPaths paths = run_paths(config);
  const json eval_manifest = require_stage(paths, "evaluate");
  const fs::path report_file = paths.stage("evaluate") / "report.json";
  const json report = json::parse(csv::read_file(report_file));
  if (!report.contains("best")) throw Error(ErrorKind::MissingUpstreamArtifact, "evaluation has no best model");
  const std::string best = report.at("best").get<std::string>();
  const fs::path model_file = paths.stage("train") / best / "model.json";
  const fs::path spat = spat_input(config, paths);
  const fs::path flags_file = paths.stage("classify") / "flag_labels.csv";
  const fs::path split_file = paths.stage("augment") / "split.json";
  const fs::path traj_file = paths.stage("preprocess") / "trajectories.jsonl";
  StageWriter out(config, "decide");
  for (const auto& f : {report_file, model_file, spat, flags_file, split_file, traj_file}) out.input(f);

  const nn::TrainedModel model = nn::load_checkpoint(model_file);
  const PhaseTimeline timeline = load_timeline(config, spat);
  const auto flags = parse_flag_labels(flags_file);
  const Split split = read_split(split_file);
  const auto w = static_cast<std::size_t>(model.config().window);

  std::string csv_out = "agent_id,timestamp_ms,area,predicted_arrival_s,true_arrival_s,left_green_s,buffer_s,green,verdict\n";
  std::size_t can = 0, cannot = 0;
  for (const auto& t : read_trajectories(traj_file)) {
    if (!split.test.contains(t.agent_id)) continue;
    const auto it = flags.find(t.agent_id);
    const SubClassResult label = it == flags.end() ? SubClassResult{} : it->second;
    for (const auto& win : range_selection(t, w)) {
      const double pred = model.forward(build_features(win, timeline, uses_subclass(model), label));
      const auto now = win.points.back().record.timestamp_ms;
      const CrossingDecision d = decide_crossing(pred, timeline, win.governing_area, now, config.buffer_s, t.agent_id);
      (d.verdict == Verdict::CanCross ? can : cannot)++;
      csv_out += std::to_string(t.agent_id) + ',' + std::to_string(now) + ',' +
                 std::string(to_string(win.governing_area)) + ',' + fmt(pred) + ',' + fmt(win.target_s) + ',' +
                 fmt(d.left_green_s) + ',' + fmt(d.buffer_s) + ',' + (d.green ? "true" : "false") + ',' +
                 std::string(to_string(d.verdict)) + '\n';
    }
  }
  out.write("decisions.csv", csv_out);
  json summary = {{"model", best}, {"buffer_s", config.buffer_s}, {"can_cross", can}, {"cannot_cross", cannot}};
  out.write("summary.json", summary.dump(2) + "\n");
  return out.finish(summary);
}

std::vector<StageResult> cmd_all(const RunConfig& config) {
  std::vector<StageResult> results;
  if (config.uses_synth()) results.push_back(cmd_synth(config));
  results.push_back(cmd_preprocess(config));
  results.push_back(cmd_classify(config));
  results.push_back(cmd_augment(config));
  results.push_back(cmd_train(config));
  results.push_back(cmd_evaluate(config));
  results.push_back(cmd_decide(config));
  return results;
}

}  // namespace xwalk
