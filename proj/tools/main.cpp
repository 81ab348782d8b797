// red: fit support estimators, score, train agents against the imitation
// reward, run sweeps and render reports.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "red/error.hpp"
#include "red/harness.hpp"

namespace {

using nlohmann::json;

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("red");
  logger->set_pattern("[%H:%M:%S] [%l] %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("RED_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") spdlog::warn("RED_LOG={} not recognised, using info", level);
  }
}

int input_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"kind", kind}, {"message", message}}.dump() << '\n';
  return red::kExitInputError;
}

json read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) red::fail("ConfigNotFound", "config file " + path + " not found");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    red::fail("InvalidConfig", path + ": " + e.what());
  }
}

// Command-line flags take precedence over the file.
void apply_overrides(json& j, const std::optional<std::string>& out,
                     const std::optional<std::uint64_t>& seed) {
  if (!j.is_object()) return;
  if (out) j["out"] = *out;
  if (seed) j["seed"] = *seed;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"Imitation learning with support-estimated rewards"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  int smooth = 1;

  const auto add_common = [&](CLI::App* cmd, bool config_required) {
    auto* opt = cmd->add_option("--config", config_path, "JSON config file");
    if (config_required) opt->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "master seed");
    cmd->add_option("--jobs", jobs, "parallel sweep cells")->check(CLI::PositiveNumber);
  };
  add_common(app.add_subcommand("fit", "fit the support estimator and calibrate the reward"), true);
  add_common(app.add_subcommand("score", "write the reward map of a fitted model"), true);
  add_common(app.add_subcommand("train", "fit, calibrate and train an agent"), true);
  add_common(app.add_subcommand("experiment", "run an estimator x dataset size x seed sweep"), true);
  auto* report = app.add_subcommand("report", "summarise run records into a table and SVG plots");
  add_common(report, false);
  report->add_option("--smooth", smooth, "moving-average window for plotted curves (1 = raw)")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return red::kExitInputError;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    if (command == "report") {
      std::filesystem::path run_dir = "red_out";
      if (!config_path.empty()) {
        json j = read_config(config_path);
        if (j.contains("base")) j = j["base"];
        run_dir = red::parse_run_config(j).out_dir;
      }
      if (out_dir) run_dir = *out_dir;
      spdlog::info("report on {}", run_dir.string());
      return red::cmd_report(run_dir, std::cout, std::cerr, smooth);
    }

    json j = read_config(config_path);
    if (command == "experiment") {
      if (!j.is_object()) red::fail("InvalidConfig", "sweep config must be a JSON object");
      json& base = j["base"];
      if (base.is_null()) base = json::object();
      apply_overrides(base, out_dir, seed);
      const red::SweepConfig sweep = red::parse_sweep_config(j);
      spdlog::info("sweep: {} estimators x {} sizes x {} seeds, {} jobs, out {}",
                   sweep.estimators.size(), sweep.sizes.size(), sweep.seeds, jobs,
                   sweep.base.out_dir.string());
      const int code = red::cmd_experiment(sweep, jobs, std::cerr);
      spdlog::info("sweep finished with exit code {}", code);
      return code;
    }

    apply_overrides(j, out_dir, seed);
    const red::RunConfig config = red::parse_run_config(j);
    spdlog::debug("config: {}", red::run_config_json(config).dump());
    spdlog::info("{}: estimator {}, env {}, seed {}, out {}", command,
                 red::to_string(config.estimator.kind), red::to_string(config.env), config.seed,
                 config.out_dir.string());
    int code = red::kExitOk;
    if (command == "fit") code = red::cmd_fit(config, std::cerr);
    if (command == "score") code = red::cmd_score(config, std::cerr);
    if (command == "train") code = red::cmd_train(config, std::cerr);
    if (code == red::kExitOk) spdlog::info("{} done", command);
    return code;
  } catch (const red::Error& e) {
    if (red::exit_code_for(e.kind()) == red::kExitInputError) return input_error(e.kind(), e.message());
    std::cerr << json{{"kind", e.kind()}, {"message", e.message()}}.dump() << '\n';
    return red::kExitRuntimeError;
  } catch (const json::exception& e) {
    return input_error("InvalidConfig", e.what());
  } catch (const std::exception& e) {
    std::cerr << json{{"kind", "RuntimeFailure"}, {"message", e.what()}}.dump() << '\n';
    return red::kExitRuntimeError;
  }
}
