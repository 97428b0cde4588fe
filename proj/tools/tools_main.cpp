// Pipeline driver: collect -> filter -> build-dataset -> train -> generate
// -> evaluate -> report, with stage caching.
#include <CLI11.hpp>
#include <iostream>

#include "dfr/pipeline.hpp"

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> sources;
  std::string setup;
  std::string backend;
  std::string work_dir;
  std::uint64_t seed = 0;
  bool have_seed = false;
  bool force = false;
  bool no_filter = false;
};

dfr::PipelineConfig make_config(const Options& opt) {
  dfr::PipelineConfig config = dfr::PipelineConfig::from_file(opt.config_path);
  if (!opt.sources.empty()) {
    std::string joined;
    for (const std::string& s : opt.sources)
      joined += (joined.empty() ? "" : ",") + s;
    config.apply("sources", joined);
  }
  if (!opt.setup.empty()) config.apply("setup", opt.setup);
  if (!opt.backend.empty()) config.apply("backend", opt.backend);
  if (!opt.work_dir.empty()) config.apply("work_dir", opt.work_dir);
  if (opt.have_seed) config.seed = opt.seed;
  if (opt.no_filter) config.no_filter = true;
  config.force = opt.force;
  return config;
}

int run_one(dfr::Stage stage, const Options& opt) {
  dfr::PipelineConfig config = make_config(opt);
  dfr::WarningLog warnings;
  dfr::StageResult result = dfr::run_stage(stage, config, &warnings);
  if (result.cache_hit) {
    std::cout << dfr::to_string(stage) << ": cache hit, outputs up to date\n";
    return 0;
  }
  std::cout << dfr::to_string(stage) << ": done\n";
  for (const std::string& out : result.outputs)
    std::cout << "  wrote " << out << "\n";
  std::cout << "  manifest " << result.manifest_path << "\n";
  for (const std::string& w : warnings.messages())
    std::cerr << "warning: " << w << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"defeasible-rationale pipeline"};
  app.require_subcommand(1);

  Options opt;
  app.add_option("--config", opt.config_path, "configuration file")
      ->required();
  app.add_option("--seed", opt.seed, "override the configured seed")
      ->each([&](const std::string&) { opt.have_seed = true; });
  app.add_flag("--force", opt.force, "recompute even on a cache hit");
  app.add_option("--sources", opt.sources,
                 "comma/space separated source subset")
      ->delimiter(',');
  app.add_flag("--no-filter", opt.no_filter,
               "random per-source pick instead of ranked filtering");
  app.add_option("--setup", opt.setup, "training setup override");
  app.add_option("--backend", opt.backend, "backend family override");
  app.add_option("--work-dir", opt.work_dir, "artifact directory override");

  // fallthrough lets shared options appear after the stage name too
  for (const char* name : {"collect", "filter", "build-dataset", "train",
                           "generate", "evaluate"}) {
    app.add_subcommand(name)->fallthrough();
  }
  app.add_subcommand("report", "consolidated metrics and retention report")
      ->fallthrough();

  CLI11_PARSE(app, argc, argv);
  try {
    CLI::App* sub = app.get_subcommands().front();
    if (sub->get_name() == "report") {
      std::cout << dfr::run_report(make_config(opt));
      return 0;
    }
    return run_one(dfr::stage_from_string(sub->get_name()), opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
