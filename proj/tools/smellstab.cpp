#include <CLI11.hpp>
#include <iostream>

#include "smellstab/pipeline.hpp"
#include "smellstab/util.hpp"

int main(int argc, char** argv) {
  using namespace smellstab;
  CLI::App app{"Smell neighborhood and change stability pipeline"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir;
  std::string manifest;
  unsigned workers = 0;
  std::uint64_t seed = 0;
  app.add_option("-c,--config", config_path, "key=value configuration file (echo lines of any output are accepted)");
  app.add_option("-o,--out", out_dir, "output directory");
  app.add_option("-m,--manifest", manifest, "manifest of candidate repositories (JSON lines)");
  app.add_option("-j,--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("-s,--seed", seed, "seed for randomized residuals");

  struct Stage {
    const char* name;
    const char* help;
  };
  const Stage stages[] = {{"filter", "apply the inclusion criteria to the manifest"},
                          {"analyze", "detect smells and neighborhood measures at each snapshot"},
                          {"mine", "measure change frequency and size over the observation window"},
                          {"join", "join observations and outcomes into dataset.csv"},
                          {"stats", "fit the hypothesis models and write results"},
                          {"report", "write the activity summary, quarantine list and report"},
                          {"all", "run every stage in order"}};
  for (const auto& s : stages) app.add_subcommand(s.name, s.help);

  CLI11_PARSE(app, argc, argv);

  try {
    PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : PipelineConfig::parse(read_file(config_path));
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (!manifest.empty()) cfg.manifest = manifest;
    if (workers > 0) cfg.workers = workers;
    if (seed_opt->count() > 0) cfg.seed = seed;

    Pipeline p(cfg);
    const std::string stage = app.get_subcommands().front()->get_name();
    if (stage == "filter" || stage == "all") {
      const auto r = p.filter();
      std::cerr << "filter: " << r.accepted.size() << " accepted, " << r.rejected.size() << " rejected\n";
      if (stage == "filter") return 0;
    }
    if (stage == "analyze" || stage == "all") p.analyze();
    if (stage == "mine" || stage == "all") p.mine();
    if (stage == "join" || stage == "all") p.join();
    if (stage == "stats" || stage == "all") p.stats();
    if (stage == "report" || stage == "all") p.report();
    const auto q = p.quarantine();
    if (!q.empty()) std::cerr << stage << ": " << q.size() << " project(s) quarantined, see quarantine.csv\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
