#pragma once

// The pipeline stages behind the CLI subcommands. Each reads its inputs from
// and writes its outputs to the run directory (config.out_dir()):
//
//   run.json, config.toml            config hash, seeds, stage seeds
//   enrich/{cache,enriched,parse_report}.jsonl, enrich/summary.json
//   features/{orig,expl,pred}.tfm (+ .json sidecars)
//   train/report.json, train/table.txt
//   ablate/ablation.json, ablate/ablation.txt
//   prompt_sweep/{cache.jsonl,sweep.json,sweep.txt}
//
// Every file is written atomically, so an interrupted command can be rerun.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tape/config.hpp"
#include "tape/ensemble.hpp"
#include "tape/graph.hpp"
#include "tape/prompting.hpp"
#include "tape/response_parser.hpp"

namespace tape {

// The dataset named by the config. Without splits.json the labeled nodes
// get a 60/20/20 split with a fixed seed.
TextAttributedGraph load_configured_graph(const RunConfig& config);

// dataset.template: a builtin id, a path to a template JSON, or empty for
// <dataset.dir>/template.json.
PromptTemplate resolve_template(const RunConfig& config);

// Ranks kept per node: pred.k, or the template's expected_k when that is 0,
// capped at the number of classes.
std::size_t ranked_k(const RunConfig& config, const PromptTemplate& tmpl, std::size_t num_classes);

// Planned stages and their outputs, one per line; used by --dry-run.
std::string describe_plan(const std::string& command, const RunConfig& config);

struct EnrichResult {
  std::vector<EnrichmentRecord> records;
  ParseSummary summary;
  std::size_t network_calls = 0;
  std::size_t cache_hits = 0;
};

EnrichResult cmd_enrich(const RunConfig& config);

// Requires enrich/enriched.jsonl. Returns orig, expl, pred.
FeatureSet cmd_build_features(const RunConfig& config);

// Requires the feature files of every listed source.
ExperimentReport cmd_train(const RunConfig& config);

std::vector<AblationRow> cmd_ablate(const RunConfig& config);

struct SweepRow {
  std::string template_id;
  std::size_t nodes = 0;
  double top1_accuracy = 0.0;
  double fallback_rate = 0.0;
};

// Zero-shot top-1 accuracy per variant of sweep.family on sweep.sample_size
// labeled nodes.
std::vector<SweepRow> cmd_prompt_sweep(const RunConfig& config);
std::string render_sweep(const std::vector<SweepRow>& rows);

struct SyntheticOptions {
  SyntheticSpec spec;
  std::size_t k = 3;  // expected_k of the saved topic template
};

// Writes the dataset plus template.json to `dir`.
void cmd_make_synthetic(const SyntheticOptions& options, const std::filesystem::path& dir);

}  // namespace tape
