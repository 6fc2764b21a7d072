#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "previewflow/error.hpp"
#include "previewflow/harness.hpp"
#include "previewflow/kernels.hpp"

namespace {

struct Flags {
  std::string config;
  std::string seeds;
  int jobs = 0;
  std::string out;
  std::string cost_model;
  bool export_images = false;
  std::string axis;
  std::string study;
  std::vector<std::string> runs;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "experiment config (JSON)");
  sub->add_option("--seeds", f.seeds, "seed list, e.g. 1,2,10-20");
  sub->add_option("--jobs", f.jobs, "worker threads (seed-level)")->check(CLI::NonNegativeNumber);
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--cost-model", f.cost_model, "linear or quadratic")
      ->check(CLI::IsMember({"linear", "quadratic"}));
  sub->add_flag("--export-images", f.export_images, "write PNGs next to the grids");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"preview generation for rectified-flow models"};
  app.require_subcommand(1);
  Flags f;

  auto* train = app.add_subcommand("train", "train the toy velocity network");
  auto* preview = app.add_subcommand("preview", "full-resolution runs, previews and baselines");
  auto* compare = app.add_subcommand("compare", "compare run directories against a reference");
  auto* ablate = app.add_subcommand("ablate", "sweep one axis of the preview settings");
  auto* stats = app.add_subcommand("stats", "commutator-norm study or velocity cosine trace");
  for (auto* sub : {train, preview, compare, ablate, stats}) add_common(sub, f);
  compare->add_option("runs", f.runs, "run directories; the first is the reference");
  ablate->add_option("--axis", f.axis, "selection, cg, m-alpha or k");
  stats->add_option("--study", f.study, "cg or cosine");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    pflow::ExperimentConfig cfg;
    if (!f.config.empty()) cfg = pflow::ExperimentConfig::load(f.config);
    cfg.command = app.get_subcommands().front()->get_name();
    if (!f.seeds.empty()) cfg.seeds = pflow::parse_seed_list(f.seeds);
    if (!f.out.empty()) cfg.out = f.out;
    if (!f.cost_model.empty()) cfg.preview.cost_model = pflow::cost_model_from_string(f.cost_model);
    if (f.export_images) cfg.export_images = true;
    if (!f.axis.empty()) cfg.ablate.axis = f.axis;
    if (!f.study.empty()) {
      cfg.stats.study = f.study;
      cfg.stats = pflow::StatsSpec::from_json(cfg.stats.to_json());
    }
    if (!f.runs.empty()) cfg.runs = f.runs;
    pflow::kernels::configure_threads(f.jobs);

    const auto result = pflow::run_command(cfg);
    for (const auto& p : result.written) std::cout << p.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pflow::exit_code_for(e);
  }
}
