// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fixtures.hpp"
#include "xwalk/augment.hpp"
#include "xwalk/csv.hpp"
#include "xwalk/evaluate.hpp"
#include "xwalk/hashing.hpp"
#include "xwalk/ingest.hpp"
#include "xwalk/nn/models.hpp"
#include "xwalk/pca.hpp"
#include "xwalk/pipeline.hpp"
#include "xwalk/preprocess.hpp"
#include "xwalk/subclass.hpp"
#include "xwalk/svm.hpp"
#include "xwalk/synthgen.hpp"

using namespace xwalk;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// 1. Filtering rules and labeling criteria on the boundary fixture.

Outcome rules_and_criteria() {
  const auto fx = testkit::boundary_fixture();
  const auto areas = testkit::default_areas();
  const auto timeline = build_phase_timeline(fx.spat, testkit::default_phase_map());
  std::map<std::int64_t, Trajectory> grouped;
  for (auto& t : group_by_id(fx.records)) grouped[t.agent_id] = assign_areas(t, areas);
  const auto kept = preprocess_pipeline(fx.records, areas, CalibrationConfig::identity());
  std::set<std::int64_t> kept_ids;
  for (const auto& t : kept.trajectories) kept_ids.insert(t.agent_id);

  std::vector<std::string> mismatches;
  for (const auto& c : fx.cases) {
    const auto& t = grouped.at(c.id);
    const bool r1 = rule1_pedestrian_majority(t), r2 = rule2_touches_crossing(t, areas), r3 = rule3_min_points(t);
    if (r1 != c.rule1 || r2 != c.rule2 || r3 != c.rule3) mismatches.push_back(c.what + " (rules)");
    const bool keep = c.rule1 && c.rule2 && c.rule3;
    if (keep != kept_ids.contains(c.id)) mismatches.push_back(c.what + " (kept)");
    if (!keep || !kept_ids.contains(c.id)) continue;
    const auto& kt = *std::find_if(kept.trajectories.begin(), kept.trajectories.end(),
                                   [&](const Trajectory& k) { return k.agent_id == c.id; });
    const auto r = apply_criteria(kt, timeline, CriteriaThresholds{});
    if (r.label != c.label || r.source != c.source) mismatches.push_back(c.what + " (label)");
  }
  std::string detail = std::to_string(fx.cases.size()) + " cases, " + std::to_string(kept_ids.size()) + " kept";
  for (const auto& m : mismatches) detail += "; mismatch: " + m;
  return {fx.cases.size() == 12 && mismatches.empty(), detail};
}

// ---------------------------------------------------------------------------
// 2. Window counts against a brute-force enumerator.

Trajectory shaped(std::int64_t id, std::size_t before, std::size_t inside, std::size_t after) {
  std::vector<TrackRecord> recs;
  std::int64_t t = 1'000'000;
  auto push = [&](double y) {
    recs.push_back(testkit::pedestrian_record(t, id, 0.0, y, 0.0, 1.0));
    t += 100;
  };
  for (std::size_t i = 0; i < before; ++i) push(7.0);
  for (std::size_t i = 0; i < inside; ++i) push(9.0 + 0.01 * static_cast<double>(i));
  for (std::size_t i = 0; i < after; ++i) push(13.0);
  return assign_areas(group_by_id(recs).front(), testkit::default_areas());
}

Outcome window_counts() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> inside_len(1, 80), win(2, 60), side(0, 8);
  std::size_t total_expected = 0, total_got = 0, bad_windows = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto t = shaped(trial, side(rng), inside_len(rng), side(rng));
    const std::size_t w = win(rng);
    // L is the prefix length up to and including the last in-crossing point.
    std::size_t last_inside = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t.points[i].area != Area::Vehicle) last_inside = i;
    }
    const std::size_t l = last_inside + 1;
    std::size_t expected = 0;
    for (std::size_t s = 0; s + w <= l; ++s) ++expected;
    const auto windows = range_selection(t, w);
    total_expected += expected;
    total_got += windows.size();
    for (std::size_t i = 0; i < windows.size(); ++i) {
      const auto& win_i = windows[i];
      bool ok = win_i.points.size() == w && win_i.window_start_index == i;
      for (std::size_t k = 0; ok && k < w; ++k) ok = win_i.points[k].record == t.points[i + k].record;
      if (!ok) ++bad_windows;
    }
    if (windows.size() != expected) ++bad_windows;
  }
  return {total_expected == total_got && bad_windows == 0,
          "windows " + std::to_string(total_got) + " vs oracle " + std::to_string(total_expected) + ", " +
              std::to_string(bad_windows) + " bad"};
}

// ---------------------------------------------------------------------------
// 3. PCA properties.

struct PedestrianScene {
  Scene scene;
  PhaseTimeline timeline;
  std::vector<Trajectory> kept;
  std::map<std::int64_t, SubClass> truth;
};

PedestrianScene default_scene(std::uint64_t seed) {
  auto cfg = ScenarioConfig::defaults();
  cfg.seed = seed;
  PedestrianScene s{generate_scene(cfg), {}, {}, {}};
  s.timeline = build_phase_timeline(s.scene.spat, cfg.phase_map);
  s.kept = preprocess_pipeline(s.scene.records, cfg.areas, CalibrationConfig::identity()).trajectories;
  for (const auto& g : s.scene.truth) s.truth[g.agent_id] = g.true_subclass();
  return s;
}

Outcome pca_properties() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g;
  Eigen::Matrix<double, 6, 6> mix;
  for (int i = 0; i < 36; ++i) mix.data()[i] = g(rng);
  std::vector<FeatureRow> rows;
  for (int i = 0; i < 400; ++i) {
    FeatureRow z;
    for (int k = 0; k < 6; ++k) z[k] = g(rng) * (k + 1);
    rows.push_back(mix * z + FeatureRow::Constant(3.0));
  }
  const auto pca = fit_pca(rows);
  const double ortho = (pca.components * pca.components.transpose() - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff();

  // Independent route: correlation matrix by hand, cyclic Jacobi.
  const int n = static_cast<int>(rows.size());
  Eigen::MatrixXd x(n, 6);
  for (int i = 0; i < n; ++i) x.row(i) = rows[static_cast<std::size_t>(i)].transpose();
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd c = x.rowwise() - mean;
  Eigen::MatrixXd cov = c.transpose() * c / (n - 1);
  Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
  Eigen::MatrixXd corr = cov.array() / (sd * sd.transpose()).array();
  const auto eig = testkit::jacobi_eigen(corr);
  const double total = eig.values.sum();
  double ratio_err = 0.0, dir_err = 0.0;
  for (int k = 0; k < 2; ++k) {
    ratio_err = std::max(ratio_err, std::abs(pca.explained_variance_ratio[k] - eig.values[k] / total));
    dir_err = std::max(dir_err, std::abs(std::abs(pca.components.row(k).transpose().dot(eig.vectors.col(k))) - 1.0));
  }

  // Class separation along PC1 on the default scene, ground-truth classes.
  const auto s = default_scene(1);
  std::vector<FeatureRow> feats;
  for (const auto& t : s.kept) feats.push_back(extract_features(t).as_vector());
  const auto scene_pca = fit_pca(feats);
  std::map<SubClass, std::vector<double>> pc1;
  for (std::size_t i = 0; i < feats.size(); ++i) pc1[s.truth.at(s.kept[i].agent_id)].push_back(scene_pca.project(feats[i])[0]);
  const auto& a = pc1[SubClass::Normal];
  const auto& b = pc1[SubClass::Wheelchair];
  auto mean_of = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); };
  auto ss = [](const std::vector<double>& v, double m) {
    double acc = 0.0;
    for (double e : v) acc += (e - m) * (e - m);
    return acc;
  };
  const double ma = mean_of(a), mb = mean_of(b);
  const double pooled = std::sqrt((ss(a, ma) + ss(b, mb)) / static_cast<double>(a.size() + b.size() - 2));
  const double separation = std::abs(ma - mb) / pooled;

  const bool pass = ortho < 1e-9 && ratio_err < 1e-6 && dir_err < 1e-6 && separation >= 3.0;
  return {pass, "orthonormality err " + num(ortho, 3) + ", explained-variance err " + num(ratio_err, 3) +
                    ", direction err " + num(dir_err, 3) + ", PC1 separation " + num(separation, 3) + "x pooled std (" +
                    std::to_string(a.size()) + " normal, " + std::to_string(b.size()) + " wheelchair)"};
}

// ---------------------------------------------------------------------------
// 4. SVM protocol over five seeds.

Outcome svm_protocol() {
  std::vector<double> cv, held;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = default_scene(seed);
    std::vector<FeatureRow> x;
    std::vector<SubClass> y;
    for (const auto& t : s.kept) {
      const auto f = extract_features(t);
      const auto r = apply_criteria(t, f, s.timeline, CriteriaThresholds{});
      if (r.label == SubClass::Unknown) continue;
      x.push_back(f.as_vector());
      y.push_back(r.label);
    }
    SvmOptions opt;
    opt.seed = seed;
    const auto res = train_svm(x, y, opt);
    cv.push_back(res.report.cv_accuracy);
    held.push_back(res.report.test_accuracy);
  }
  auto stats = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double var = 0.0;
    for (double e : v) var += (e - m) * (e - m);
    return std::pair{m, std::sqrt(var / static_cast<double>(v.size() - 1))};
  };
  const auto [cv_m, cv_s] = stats(cv);
  const auto [h_m, h_s] = stats(held);
  const double cv_min = *std::min_element(cv.begin(), cv.end());
  const double h_min = *std::min_element(held.begin(), held.end());
  return {cv_min >= 0.9 && h_min >= 0.9,
          "5-fold CV " + num(100 * cv_m) + "% +- " + num(100 * cv_s) + " (min " + num(100 * cv_min) + "), held-out " +
              num(100 * h_m) + "% +- " + num(100 * h_s) + " (min " + num(100 * h_min) + ")"};
}

// ---------------------------------------------------------------------------
// 5. Finite-difference gradient checks at toy size.

Outcome gradient_checks() {
  std::string detail;
  bool pass = true;
  for (auto a : {nn::Architecture::Feedforward, nn::Architecture::Lstm, nn::Architecture::Gru,
                 nn::Architecture::Transformer}) {
    nn::ModelConfig c;
    c.architecture = a;
    c.window = 5;
    c.hidden_layers = {16, 16, 8};
    c.recurrent_hidden = 16;
    c.embed_dim = 16;
    c.heads = 4;
    c.ffn_dim = 16;
    auto net = nn::make_regressor(c, 13);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    std::normal_distribution<double> g;
    // Move off the initialization so no gate sits in a flat spot.
    for (auto& p : net->params().all()) {
      for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += u(rng);
    }
    nn::Matrix x(3, 5 * 13), y(3, 1);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = g(rng);
    std::vector<nn::Parameter*> params;
    for (auto& p : net->params().all()) params.push_back(p.get());
    const auto r =
        testkit::gradient_check(params, [&](nn::Tape& t) { return t.mse(net->forward(t, x), y); });
    pass = pass && r.max_relative_error < 1e-4;
    detail += std::string(detail.empty() ? "" : ", ") + std::string(nn::to_string(a)) + " " +
              num(r.max_relative_error, 3) + " (" + r.worst + ")";
  }
  return {pass, "max relative error: " + detail};
}

// ---------------------------------------------------------------------------
// Pipeline-backed criteria.

json base_config(std::uint64_t seed, const std::string& preset) {
  json j = {{"schema_version", 1},
            {"seed", seed},
            {"workers", 1},
            {"synth", {{"preset", preset}}},
            {"augment", {{"windows", {10}}}},
            {"train", {{"architectures", {"feedforward", "lstm", "gru", "transformer"}},
                       {"ablation_windows", json::array()},
                       {"model", {{"iterations", 10000}, {"batch_size", 30}, {"learning_rate", 0.00015}}}}}};
  return j;
}

RunPaths run_all(const json& j, const fs::path& root) {
  auto config = RunConfig::from_json(j, root);
  config.output_root = root;
  cmd_all(config);
  return run_paths(config);
}

json read_json(const fs::path& p) { return json::parse(csv::read_file(p)); }

Outcome training_descent(const fs::path& work) {
  const auto paths = run_all(base_config(1, "default"), work / "descent");
  const auto report = read_json(paths.stage("train") / "report.json");
  bool pass = report.at("cells").size() == 4;
  std::string detail;
  for (const auto& c : report.at("cells")) {
    if (!c.at("include_subclass").get<bool>()) continue;
    const double init = c.at("initial_train_mse").get<double>();
    const double fin = c.at("final_train_mse").get<double>();
    const bool ok = std::isfinite(init) && std::isfinite(fin) && fin < 0.5 * init;
    pass = pass && ok;
    detail += std::string(detail.empty() ? "" : ", ") + c.at("architecture").get<std::string>() + " " + num(init) +
              " -> " + num(fin) + " (" + num(100.0 * fin / init, 3) + "%)";
  }
  return {pass, "train MSE initial -> final: " + detail};
}

Outcome ablation_direction(const fs::path& work) {
  bool pass = true;
  std::string detail;
  std::map<std::string, std::vector<double>> diffs;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto j = base_config(seed, "two_speed");
    j["classify"] = {{"label_origin", "ground_truth"}};
    j["train"]["ablation_windows"] = {10};
    const auto paths = run_all(j, work / "ablation");
    const auto ab = read_json(paths.stage("evaluate") / "report.json").at("ablation");
    if (ab.size() != 4) pass = false;
    for (const auto& p : ab) {
      const double d = p.at("difference").get<double>();
      diffs[p.at("architecture").get<std::string>()].push_back(d);
      if (!(d > 0.0)) pass = false;
    }
  }
  for (const auto& [arch, d] : diffs) {
    detail += std::string(detail.empty() ? "" : "; ") + arch + ":";
    for (double v : d) detail += " " + num(v, 3);
  }
  return {pass, "MSE without - with flag per seed (s^2): " + detail};
}

Outcome arrival_fidelity(const fs::path& work) {
  auto j = base_config(1, "zero_noise");
  j["classify"] = {{"label_origin", "ground_truth"}};
  j["train"]["architectures"] = {"gru"};
  const auto paths = run_all(j, work / "fidelity");
  const auto grid = read_json(paths.stage("evaluate") / "report.json").at("grid");
  if (grid.size() != 1) return {false, "unexpected grid size"};
  const double rmse = grid[0].at("rmse").get<double>();
  return {rmse < 1.5, "GRU W=10 held-out RMSE " + num(rmse) + " s over " +
                          std::to_string(grid[0].at("n_test_windows").get<std::size_t>()) + " windows"};
}

Outcome decision_grid() {
  const std::int64_t t0 = 1'000'000;
  const auto timeline = build_phase_timeline(testkit::alternating_spat(t0, 70, 25, 3), testkit::default_phase_map());
  std::size_t cases = 0, wrong = 0;
  for (double buffer : {3.0, 4.0, 5.0}) {
    for (int pi = 0; pi <= 40; ++pi) {
      for (int li = 0; li <= 40; ++li) {
        const double pred = 0.5 * pi, left = 0.5 * li;
        const bool oracle = pred + buffer <= left;
        // Green for crossing 1 runs 25 s from t0, so `left` seconds remain at 25 - left.
        const auto now = t0 + static_cast<std::int64_t>(std::llround((25.0 - left) * 1000.0));
        const auto d = decide_crossing(pred, timeline, Area::Crossing1, now, buffer);
        if ((d.verdict == Verdict::CanCross) != oracle || can_cross(pred, left, buffer) != oracle) ++wrong;
        ++cases;
      }
    }
  }
  return {wrong == 0, std::to_string(cases) + " cases, " + std::to_string(wrong) + " disagreements"};
}

Outcome end_to_end_determinism(const fs::path& work) {
  auto j = base_config(3, "default");
  j["synth"]["anomalies"] = {"waits_for_green_mid_crossing"};
  j["augment"] = {{"windows", {10}}, {"random_m", 40}};
  j["train"]["ablation_windows"] = {10};
  j["train"]["model"]["iterations"] = 300;
  j["train"]["model"]["log_every"] = 50;
  fs::remove_all(work / "determinism");
  const auto a = run_all(j, work / "determinism" / "a");
  j["workers"] = 2;
  const auto b = run_all(j, work / "determinism" / "b");
  std::size_t manifests = 0, files = 0, differing = 0;
  for (auto stage : kStages) {
    const auto ma = csv::read_file(a.stage(stage) / "manifest.json");
    const auto mb = csv::read_file(b.stage(stage) / "manifest.json");
    ++manifests;
    if (ma != mb) ++differing;
    const json manifest = json::parse(ma);
    for (const auto& o : manifest.at("outputs")) {
      const auto rel = o.at("path").get<std::string>();
      ++files;
      if (sha256_file(a.root / rel) != sha256_file(b.root / rel)) ++differing;
    }
  }
  return {differing == 0 && manifests == 7,
          std::to_string(manifests) + " manifests and " + std::to_string(files) +
              " hashed outputs (metrics, checkpoints) compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string work_dir = (fs::temp_directory_path() / "xwalk_acceptance").string();
  std::vector<int> only;
  app.add_option("--work-dir", work_dir, "scratch directory for pipeline runs");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);
  const fs::path work = work_dir;
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"rules and criteria exactness", rules_and_criteria},
      {"window-count oracle", window_counts},
      {"PCA properties", pca_properties},
      {"SVM protocol", svm_protocol},
      {"gradient correctness", gradient_checks},
      {"training descent", [&] { return training_descent(work); }},
      {"ablation direction", [&] { return ablation_direction(work); }},
      {"arrival-target fidelity", [&] { return arrival_fidelity(work); }},
      {"decision logic", decision_grid},
      {"end-to-end determinism", [&] { return end_to_end_determinism(work); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << o.detail
              << " [" << num(secs, 3) << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
