#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

#include "fixtures.hpp"
#include "xwalk/csv.hpp"
#include "xwalk/error.hpp"
#include "xwalk/hashing.hpp"
#include "xwalk/pipeline.hpp"

using namespace xwalk;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no xwalk::Error thrown";
  return ErrorKind::Io;
}

json tiny_config_json() {
  return json::parse(R"({
    "schema_version": 1,
    "seed": 7,
    "output_root": "runs",
    "synth": {"preset": "default", "n_normal": 24, "n_wheelchair": 14, "n_vehicle": 3,
              "n_noise_tracks": 2, "n_non_crossing": 1,
              "anomalies": ["waits_for_green_mid_crossing"]},
    "augment": {"windows": [5], "random_m": 15},
    "train": {"architectures": ["gru", "feedforward"], "ablation_windows": [5],
              "model": {"iterations": 30, "log_every": 10, "hidden_layers": [16, 8], "recurrent_hidden": 8}},
    "decide": {"buffer_s": 4.0}
  })");
}

fs::path write_config(const fs::path& dir, const json& j) {
  const auto p = dir / "config.json";
  csv::write_file(p, j.dump(2));
  return p;
}

// Every manifest under the run root, keyed by stage.
std::map<std::string, json> manifests(const RunPaths& paths) {
  std::map<std::string, json> out;
  for (auto stage : kStages) {
    const auto p = paths.stage(stage) / "manifest.json";
    if (fs::exists(p)) out[std::string(stage)] = json::parse(csv::read_file(p));
  }
  return out;
}

}  // namespace

TEST(Config, ParsesAndResolvesRelativeRoot) {
  const auto dir = testkit::fresh_dir("cfg_parse");
  const auto c = RunConfig::load(write_config(dir, tiny_config_json()));
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.scenario.seed, 7u);
  EXPECT_EQ(c.output_root, dir / "runs");
  EXPECT_EQ(c.scenario.n_normal, 24);
  EXPECT_EQ(c.windows, std::vector<int>{5});
  EXPECT_EQ(c.random_m, std::optional<std::size_t>(15));
  EXPECT_EQ(c.model.iterations, 30);
  EXPECT_EQ(c.buffer_s, 4.0);
  EXPECT_EQ(c.anomalies.size(), 1u);
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(grid_specs(c).size(), 4u);
}

TEST(Config, SnapshotIgnoresWhereAndHowFast) {
  const auto dir = testkit::fresh_dir("cfg_snap");
  auto a = RunConfig::load(write_config(dir, tiny_config_json()));
  auto b = a;
  b.output_root = "/elsewhere";
  b.workers = 3;
  EXPECT_EQ(a.snapshot(), b.snapshot());
  EXPECT_EQ(run_paths(a).root.filename(), run_paths(b).root.filename());
  b.set_seed(8);
  EXPECT_NE(run_paths(a).root.filename(), run_paths(b).root.filename());
  // The snapshot parses back to the same content.
  EXPECT_EQ(RunConfig::from_json(a.snapshot(), dir).snapshot(), a.snapshot());
}

TEST(Config, ValidationErrors) {
  const auto dir = testkit::fresh_dir("cfg_bad");
  auto expect_invalid = [&](const std::function<void(json&)>& edit) {
    auto j = tiny_config_json();
    edit(j);
    EXPECT_EQ(kind_of([&] { RunConfig::load(write_config(dir, j)).validate(); }), ErrorKind::ConfigValidationError)
        << j.dump();
  };
  expect_invalid([](json& j) { j.erase("seed"); });
  expect_invalid([](json& j) { j["schema_version"] = 99; });
  expect_invalid([](json& j) { j["decide"]["buffer_s"] = 6.0; });
  expect_invalid([](json& j) { j["augment"]["windows"] = json::array({1}); });
  expect_invalid([](json& j) { j["train"]["ablation_windows"] = json::array({10}); });
  expect_invalid([](json& j) { j["train"]["architectures"] = json::array({"cnn"}); });
  expect_invalid([](json& j) { j["inputs"] = {{"tracks", "missing.csv"}, {"spat", "missing_spat.csv"}}; });
  expect_invalid([](json& j) { j["workers"] = 0; });
  expect_invalid([](json& j) { j["classify"] = {{"label_origin", "oracle"}}; });
  EXPECT_EQ(kind_of([&] { RunConfig::load(dir / "absent.json"); }), ErrorKind::ConfigValidationError);
}

TEST(Pipeline, StageBeforeUpstreamFails) {
  const auto dir = testkit::fresh_dir("pipe_missing");
  const auto c = RunConfig::load(write_config(dir, tiny_config_json()));
  EXPECT_EQ(kind_of([&] { cmd_train(c); }), ErrorKind::MissingUpstreamArtifact);
  EXPECT_EQ(kind_of([&] { cmd_preprocess(c); }), ErrorKind::MissingUpstreamArtifact);
  cmd_synth(c);
  cmd_preprocess(c);
  cmd_augment(c);
  // Training also needs the flag labels from classify.
  EXPECT_EQ(kind_of([&] { cmd_train(c); }), ErrorKind::MissingUpstreamArtifact);
  EXPECT_EQ(kind_of([&] { cmd_evaluate(c); }), ErrorKind::MissingUpstreamArtifact);
}

TEST(Pipeline, EndToEndIsCompleteAndDeterministic) {
  const auto dir = testkit::fresh_dir("pipe_e2e");
  auto c = RunConfig::load(write_config(dir, tiny_config_json()));
  const auto results = cmd_all(c);
  ASSERT_EQ(results.size(), 7u);
  const auto paths = run_paths(c);
  const auto first = manifests(paths);
  ASSERT_EQ(first.size(), 7u);
  for (const auto& [stage, m] : first) {
    EXPECT_EQ(m.at("stage"), stage);
    EXPECT_EQ(m.at("schema_version"), kSchemaVersion);
    EXPECT_EQ(m.at("seed"), 7);
    EXPECT_EQ(m.at("config"), c.snapshot());
    for (const auto& o : m.at("outputs")) {
      const auto p = paths.root / o.at("path").get<std::string>();
      ASSERT_TRUE(fs::exists(p)) << p;
      EXPECT_EQ(sha256_file(p), o.at("sha256").get<std::string>());
    }
    EXPECT_NO_THROW(require_stage(paths, stage));
  }
  const auto eval = json::parse(csv::read_file(paths.stage("evaluate") / "report.json"));
  EXPECT_TRUE(eval.contains("best"));
  EXPECT_EQ(eval.at("grid").size(), 4u);
  EXPECT_EQ(eval.at("ablation").size(), 2u);

  // Idempotence: re-running one stage rewrites identical content.
  cmd_classify(c);
  EXPECT_EQ(manifests(paths).at("classify"), first.at("classify"));

  // No hidden state: a fresh root reproduces every manifest.
  c.output_root = dir / "again";
  c.workers = 2;
  cmd_all(c);
  EXPECT_EQ(manifests(run_paths(c)), first);
}

TEST(Pipeline, ManifestSchemaVersionIsChecked) {
  const auto dir = testkit::fresh_dir("pipe_schema");
  const auto c = RunConfig::load(write_config(dir, tiny_config_json()));
  cmd_synth(c);
  const auto p = run_paths(c).stage("synth") / "manifest.json";
  auto m = json::parse(csv::read_file(p));
  m["schema_version"] = kSchemaVersion + 1;
  csv::write_file(p, m.dump());
  EXPECT_EQ(kind_of([&] { cmd_preprocess(c); }), ErrorKind::MissingUpstreamArtifact);
}

#ifdef XWALK_CLI
namespace {

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " '" XWALK_CLI "' " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Cli, ExitCodesAndOverrides) {
  const auto dir = testkit::fresh_dir("cli");
  const auto cfg = write_config(dir, tiny_config_json()).string();
  EXPECT_EQ(run_cli("synth --config '" + (dir / "nope.json").string() + "'"), 2);
  EXPECT_EQ(run_cli("train --config '" + cfg + "' --out '" + (dir / "flag").string() + "'"), 1);

  // --out beats the environment, which beats the config.
  EXPECT_EQ(run_cli("synth --config '" + cfg + "' --seed 9 --out '" + (dir / "flag").string() + "'",
                    "XWALK_OUT_ROOT='" + (dir / "env").string() + "'"),
            0);
  EXPECT_EQ(run_cli("synth --config '" + cfg + "' --seed 9", "XWALK_OUT_ROOT='" + (dir / "env").string() + "'"), 0);
  EXPECT_EQ(run_cli("synth --config '" + cfg + "' --seed 9"), 0);
  auto c = RunConfig::load(cfg);
  c.set_seed(9);
  const auto name = run_paths(c).root.filename();
  EXPECT_TRUE(fs::exists(dir / "flag" / name / "synth" / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "env" / name / "synth" / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "runs" / name / "synth" / "manifest.json"));
  // The failed train left a machine-readable report.
  c.set_seed(7);
  c.output_root = dir / "flag";
  const auto err = json::parse(csv::read_file(run_paths(c).root / "error.json"));
  EXPECT_EQ(err.at("kind"), "MissingUpstreamArtifact");
}
#endif
