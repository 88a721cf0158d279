// tape: command-line driver for the enrichment / feature / training pipeline.
//
// Exit codes: 0 success, 2 configuration or input error, 3 transport error,
// 4 numeric abort.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "tape/commands.hpp"
#include "tape/config.hpp"
#include "tape/error.hpp"
#include "tape/feature_io.hpp"

namespace {

using namespace tape;

struct RunOptions {
  std::string config_path;
  bool mock = false;
  double mock_accuracy = 0.0;
  std::string seeds;
  std::string out;
  bool dry_run = false;
  std::map<std::string, std::string> overrides;
  std::map<std::string, CLI::Option*> override_opts;
  CLI::Option* mock_accuracy_opt = nullptr;
  CLI::Option* seeds_opt = nullptr;
  CLI::Option* out_opt = nullptr;
};

void add_run_options(CLI::App& sub, RunOptions& o) {
  sub.add_option("--config", o.config_path, "Config file (sectioned key = value)")->check(CLI::ExistingFile);
  sub.add_flag("--mock", o.mock, "Answer prompts with the deterministic mock oracle");
  o.mock_accuracy_opt = sub.add_option("--mock-accuracy", o.mock_accuracy, "Mock top-1 accuracy in [0, 1]");
  o.seeds_opt = sub.add_option("--seed", o.seeds, "Comma-separated seed list; the first seeds feature building");
  o.out_opt = sub.add_option("--out", o.out, "Run directory");
  sub.add_flag("--dry-run", o.dry_run, "Print the resolved config and planned stages, then exit");
  for (const auto& key : RunConfig::keys())
    o.override_opts[key] = sub.add_option("--" + key, o.overrides[key], "Override " + key)->group("Config keys");
}

RunConfig resolve(const RunOptions& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig() : RunConfig::from_file(o.config_path);
  for (const auto& [key, opt] : o.override_opts)
    if (opt->count() > 0) cfg.set_text(key, o.overrides.at(key));
  if (o.mock) cfg.set("mock.enabled", true);
  if (o.mock_accuracy_opt->count() > 0) cfg.set("mock.accuracy", o.mock_accuracy);
  if (o.seeds_opt->count() > 0) cfg.set_text("experiment.seeds", o.seeds);
  if (o.out_opt->count() > 0) cfg.set("experiment.out", o.out);
  cfg.validate();
  return cfg;
}

int run_command(const std::string& name, const RunOptions& o) {
  const RunConfig cfg = resolve(o);
  if (o.dry_run) {
    std::cout << cfg.render() << "\n" << describe_plan(name, cfg);
    return 0;
  }
  if (name == "enrich") {
    const auto r = cmd_enrich(cfg);
    std::printf("enriched %zu nodes: full %zu, partial %zu, fallback %zu (fallback rate %.4f)\n",
                r.summary.total(), r.summary.full, r.summary.partial, r.summary.fallback, r.summary.fallback_rate());
    std::printf("network calls %zu, cache hits %zu\n", r.network_calls, r.cache_hits);
  } else if (name == "build-features") {
    for (const auto& [source, m] : cmd_build_features(cfg))
      std::printf("%s: %zu x %zu\n", source.c_str(), m.rows(), m.cols());
  } else if (name == "train") {
    const auto report = cmd_train(cfg);
    std::cout << render_table({{std::string(to_string(report.arch)), report}});
  } else if (name == "ablate") {
    std::cout << render_ablation(cmd_ablate(cfg));
  } else if (name == "prompt-sweep") {
    std::cout << render_sweep(cmd_prompt_sweep(cfg));
  }
  std::printf("outputs in %s\n", cfg.out_dir().string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-attributed graph pipeline: LLM enrichment, feature building, GNN training"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"enrich", "Prompt the LLM for every node (cached) and parse the answers"},
      {"build-features", "Build the orig, expl and pred feature matrices"},
      {"train", "Train one GNN per feature source over the seed list and ensemble them"},
      {"ablate", "Full run plus one leave-one-out run per feature source"},
      {"prompt-sweep", "Zero-shot top-1 accuracy for each prompt variant of a family"},
  };
  std::map<std::string, RunOptions> options;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    subs[name] = app.add_subcommand(name, help);
    add_run_options(*subs[name], options[name]);
  }

  SyntheticOptions synth;
  std::string synth_out;
  auto* make = app.add_subcommand("make-synthetic", "Generate a synthetic text-attributed graph");
  make->add_option("--out", synth_out, "Dataset directory")->required();
  make->add_option("--nodes", synth.spec.num_nodes, "Number of nodes")->capture_default_str();
  make->add_option("--classes", synth.spec.num_classes, "Number of classes")->capture_default_str();
  make->add_option("--homophily", synth.spec.homophily, "Fraction of same-class edges")->capture_default_str();
  make->add_option("--keyword-noise", synth.spec.keyword_noise, "Chance a planted keyword is off-class")
      ->capture_default_str();
  make->add_option("--keywords-per-class", synth.spec.keywords_per_class, "Keyword vocabulary per class")
      ->capture_default_str();
  make->add_option("--degree", synth.spec.avg_degree, "Average degree")->capture_default_str();
  make->add_option("--seed", synth.spec.seed, "Generator seed")->capture_default_str();
  make->add_option("--k", synth.k, "Ranked answers requested by the saved template")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (make->parsed()) {
      cmd_make_synthetic(synth, synth_out);
      std::printf("wrote synthetic dataset (%zu nodes, %zu classes) to %s\n", synth.spec.num_nodes,
                  synth.spec.num_classes, synth_out.c_str());
      return 0;
    }
    for (const auto& [name, sub] : subs)
      if (sub->parsed()) return run_command(name, options.at(name));
  } catch (const tape::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
