// dataloop: command-line driver for a project directory.
//
//   dataloop init --project DIR [--config FILE] [--seed N]
//   dataloop curate|extract|bench|synth|eval|diagnose|patch|mix|report --project DIR
//            [--backend live|replay] [--fixture FILE] [--predictions FILE]
//   dataloop status --project DIR
//   dataloop serve --project DIR [--bind HOST:PORT] [--static DIR]
//
// Exit codes: 0 success, 1 stage failure, 2 validation failure.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "dataloop/api_server.hpp"
#include "dataloop/jsonl.hpp"
#include "dataloop/project.hpp"

namespace fs = std::filesystem;
using namespace dataloop;

namespace {

constexpr int kStageFailure = 1;
constexpr int kValidationFailure = 2;

struct Options {
  fs::path project = ".";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string backend = "live";
  std::string fixture;
  std::string predictions;
  std::string bind = "127.0.0.1:8080";
  std::string static_dir;
};

std::unique_ptr<LlmBackend> make_backend(const Options& o, const ProjectConfig& config) {
  if (o.backend == "replay") {
    const fs::path script = o.fixture.empty() ? o.project / "fixtures.json" : fs::path(o.fixture);
    return std::make_unique<ReplayBackend>(FixtureScript::load(script));
  }
  return std::make_unique<HttpBackend>(config.backend);
}

int run_stage(const Options& o, Stage stage) {
  Project project = Project::open(o.project);
  const bool needs_model = stage != Stage::Mix && stage != Stage::Report && !(stage == Stage::Eval && !o.predictions.empty());
  const auto backend = needs_model ? make_backend(o, project.config()) : nullptr;
  RunOptions run;
  run.backend = backend.get();
  if (!o.predictions.empty()) run.predictions = fs::path(o.predictions);
  project.run_stage(stage, run);
  const auto& record = project.manifest().stages.at(stage);
  fmt::print("{}: {} ({} artifacts, round {})\n", to_string(stage), to_string(record.status), record.artifacts.size(),
             record.round);
  return 0;
}

int status(const Options& o) {
  const Project project = Project::open(o.project);
  ordered_json out = to_json(project.manifest());
  out["hash_mismatches"] = project.verify();
  std::cout << out.dump(2) << "\n";
  return 0;
}

ApiServer* g_server = nullptr;

int serve(const Options& o) {
  ServeOptions so;
  const auto colon = o.bind.rfind(':');
  if (colon == std::string::npos) throw ConfigError("--bind expects HOST:PORT");
  so.host = o.bind.substr(0, colon);
  so.port = std::stoi(o.bind.substr(colon + 1));
  if (!o.static_dir.empty()) so.static_dir = fs::path(o.static_dir);
  const Options captured = o;
  ApiServer server(o.project, [captured] {
    return make_backend(captured, Project::open(captured.project).config());
  }, so);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server != nullptr) g_server->stop();
  });
  fmt::print("serving {} on http://{}\n", o.project.string(), o.bind);
  server.run();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop training data engine"};
  app.require_subcommand(1);
  Options o;

  auto add_project = [&](CLI::App* cmd) { cmd->add_option("--project,-p", o.project, "Project directory"); };

  auto* init = app.add_subcommand("init", "Create a project directory");
  add_project(init);
  init->add_option("--config,-c", o.config, "Configuration file to copy into the project")->check(CLI::ExistingFile);
  init->add_option("--seed", o.seed, "Override the configured seed");

  std::vector<std::pair<CLI::App*, Stage>> stage_commands;
  for (const Stage s : kStages) {
    auto* cmd = app.add_subcommand(std::string(to_string(s)), fmt::format("Run the {} stage", to_string(s)));
    add_project(cmd);
    cmd->add_option("--backend", o.backend, "Model backend")->check(CLI::IsMember({"live", "replay"}));
    cmd->add_option("--fixture", o.fixture, "Fixture script for the replay backend");
    cmd->add_option("--config,-c", o.config, "Ignored for stages; the project's own project.conf is used");
    if (s == Stage::Eval) cmd->add_option("--predictions", o.predictions, "Prediction file (jsonl)");
    stage_commands.emplace_back(cmd, s);
  }

  auto* status_cmd = app.add_subcommand("status", "Print the manifest and any stale artifacts");
  add_project(status_cmd);

  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
  add_project(serve_cmd);
  serve_cmd->add_option("--bind", o.bind, "HOST:PORT");
  serve_cmd->add_option("--static", o.static_dir, "Directory of built UI assets");
  serve_cmd->add_option("--backend", o.backend, "Backend for debug cycles")->check(CLI::IsMember({"live", "replay"}));
  serve_cmd->add_option("--fixture", o.fixture, "Fixture script for the replay backend");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*init) {
      const std::string text = o.config.empty() ? std::string() : read_file(o.config);
      const Project p = Project::init(o.project, text, o.seed);
      fmt::print("initialised {} (seed {})\n", p.root().string(), p.manifest().seed);
      return 0;
    }
    for (const auto& [cmd, stage] : stage_commands)
      if (*cmd) return run_stage(o, stage);
    if (*status_cmd) return status(o);
    if (*serve_cmd) return serve(o);
  } catch (const StageFailed& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.validation() ? kValidationFailure : kStageFailure;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationFailure;
  } catch (const SchemaInvalid& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kStageFailure;
  }
  return 0;
}
