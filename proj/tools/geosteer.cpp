#include "CLI11.hpp"
#include "geosteer/pipeline/stages.hpp"

#include <iostream>

using namespace geosteer;
using namespace geosteer::pipeline;

namespace {

constexpr int kConfigError = 2;
constexpr int kStageFailure = 3;

struct Args {
  std::string config;
  std::optional<std::uint64_t> seed;
  RunOptions run;
};

PipelineConfig load(const Args& a) {
  PipelineConfig pc = a.config.empty() ? parse_config(Json::object()) : load_config(a.config);
  if (a.seed) {
    pc.experiment.task.seed = *a.seed;
    pc.experiment.task.split_seed = *a.seed;
  }
  return pc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavior-aware steering geodesics on synthetic activation corpora"};
  app.require_subcommand(1, 1);
  Args a;
  app.add_option("--config", a.config, "JSON config file (defaults apply when omitted)")->check(CLI::ExistingFile);
  app.add_option("--seed", a.seed, "Override the corpus and split seed");
  app.add_option("--out", a.run.out, "Artifact directory")->capture_default_str();
  app.add_option("--jobs", a.run.jobs, "Worker threads for solving and evaluation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("--verbose", a.run.verbose, "Per-step progress on stderr");

  using Stage = std::function<void(const PipelineConfig&, const RunOptions&)>;
  const std::vector<std::tuple<std::string, std::string, Stage>> stages{
      {"gen", "Generate the corpus and behavior head", stage_gen},
      {"dist", "Fit PCA and compute supervision distances", stage_dist},
      {"train", "Train encoders and bridges", stage_train},
      {"solve", "Solve steering paths for every method", stage_solve},
      {"eval", "Score paths and write report.csv", [](const auto& pc, const auto& o) { stage_eval(pc, o); }},
      {"report", "Print the summary table", [](const auto& pc, const auto& o) { std::cout << stage_report(pc, o); }},
      {"sweep", "Train and score the encoder-variant grid",
       [](const auto& pc, const auto& o) {
         stage_gen(pc, o);
         stage_dist(pc, o);
         std::cout << stage_sweep(pc, o);
       }},
      {"run", "Run gen through report", [](const auto& pc, const auto& o) { std::cout << run_pipeline(pc, o); }},
  };
  Stage chosen;
  for (const auto& [name, help, fn] : stages) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->callback([&chosen, fn = fn] { chosen = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    const PipelineConfig pc = load(a);
    std::filesystem::create_directories(a.run.out);
    chosen(pc, a.run);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "stage failed: " << e.what() << "\n";
    return kStageFailure;
  }
  return 0;
}
