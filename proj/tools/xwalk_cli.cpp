#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "xwalk/csv.hpp"
#include "xwalk/error.hpp"
#include "xwalk/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
};

// Precedence for the output root: --out, then XWALK_OUT_ROOT, then the config.
xwalk::RunConfig load_config(const Overrides& o) {
  xwalk::RunConfig config = xwalk::RunConfig::load(o.config_path);
  if (o.seed) config.set_seed(*o.seed);
  if (o.workers) config.workers = *o.workers;
  if (o.out) {
    config.output_root = *o.out;
  } else if (const char* env = std::getenv("XWALK_OUT_ROOT"); env != nullptr && *env != '\0') {
    config.output_root = env;
  }
  return config;
}

int report_error(const std::string& command, const std::string& kind, const std::string& message,
                 const std::optional<fs::path>& run_root) {
  json err = {{"status", "error"}, {"command", command}, {"kind", kind}, {"message", message}};
  std::cerr << err.dump() << "\n";
  if (run_root) {
    try {
      fs::create_directories(*run_root);
      xwalk::csv::write_file(*run_root / "error.json", err.dump(2) + "\n");
    } catch (...) {
      // Nothing more to do; stderr already has the report.
    }
  }
  return kind == "ConfigValidationError" || kind == "InvalidConfig" ? 2 : 1;
}

void print_result(const xwalk::StageResult& r) {
  std::cout << json{{"status", "ok"}, {"stage", r.stage}, {"dir", r.dir.string()}, {"summary", r.summary}}.dump()
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crosswalk pedestrian sub-classification and arrival-time prediction pipeline"};
  app.require_subcommand(1);

  Overrides o;
  using Stage = std::function<void(const xwalk::RunConfig&)>;
  const std::map<std::string, std::pair<std::string, Stage>> stages = {
      {"synth", {"generate a synthetic scene", [](const auto& c) { print_result(xwalk::cmd_synth(c)); }}},
      {"preprocess", {"parse, calibrate and filter tracks", [](const auto& c) { print_result(xwalk::cmd_preprocess(c)); }}},
      {"classify", {"sub-classify pedestrians", [](const auto& c) { print_result(xwalk::cmd_classify(c)); }}},
      {"augment", {"extract training windows", [](const auto& c) { print_result(xwalk::cmd_augment(c)); }}},
      {"train", {"train the regressor grid", [](const auto& c) { print_result(xwalk::cmd_train(c)); }}},
      {"evaluate", {"score the grid on held-out trajectories", [](const auto& c) { print_result(xwalk::cmd_evaluate(c)); }}},
      {"decide", {"crossing decisions with the best model", [](const auto& c) { print_result(xwalk::cmd_decide(c)); }}},
      {"all", {"run every stage in order",
               [](const auto& c) {
                 for (const auto& r : xwalk::cmd_all(c)) print_result(r);
               }}},
  };

  std::map<CLI::App*, std::string> names;
  for (const auto& [name, entry] : stages) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", o.config_path, "run config JSON")->required();
    sub->add_option("--seed", o.seed, "override the global seed");
    sub->add_option("--workers", o.workers, "parallel grid cells in train/evaluate")->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "output root (overrides XWALK_OUT_ROOT and the config)");
    names[sub] = name;
  }

  CLI11_PARSE(app, argc, argv);

  std::string command;
  for (auto* sub : app.get_subcommands()) command = names.at(sub);

  std::optional<fs::path> run_root;
  try {
    const xwalk::RunConfig config = load_config(o);
    run_root = xwalk::run_paths(config).root;
    stages.at(command).second(config);
  } catch (const xwalk::Error& e) {
    return report_error(command, std::string(xwalk::to_string(e.kind())), e.what(), run_root);
  } catch (const std::exception& e) {
    return report_error(command, "Internal", e.what(), run_root);
  }
  return 0;
}
