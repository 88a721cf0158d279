#include "tape/commands.hpp"

#include <chrono>
#include <cstdio>
#include <memory>

#include <nlohmann/json.hpp>

#include "tape/error.hpp"
#include "tape/feature_io.hpp"
#include "tape/io.hpp"
#include "tape/llm_client.hpp"
#include "tape/rng.hpp"

namespace tape {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path enriched_path(const RunConfig& c) { return c.out_dir() / "enrich" / "enriched.jsonl"; }
fs::path feature_path(const RunConfig& c, const std::string& source) {
  return c.out_dir() / "features" / (source + ".tfm");
}

std::uint64_t run_seed(const RunConfig& c) { return c.seeds().front(); }

// Records the config and every derived seed next to the outputs.
void write_run_record(const RunConfig& config, const std::string& command) {
  const auto dir = config.out_dir();
  fs::create_directories(dir);
  const std::uint64_t seed = run_seed(config);
  json stages = json::object();
  for (const char* s : {"mock", "sweep", "tfidf/orig", "tfidf/expl", "interpreter/orig", "interpreter/expl", "pred"})
    stages[s] = stage_seed(seed, s);
  const json record = {{"command", command},
                       {"config_hash", config.hash()},
                       {"seeds", config.seeds()},
                       {"run_seed", seed},
                       {"stage_seeds", stages}};
  write_file_atomic(dir / "run.json", record.dump(2) + "\n");
  write_file_atomic(dir / "config.toml", config.render());
}

std::string mock_model_name(double accuracy, std::uint64_t seed) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "mock-p%.6g-s%llu", accuracy, static_cast<unsigned long long>(seed));
  return buf;
}

struct QueryResult {
  std::vector<std::string> responses;
  std::size_t network_calls = 0;
  std::size_t cache_hits = 0;
};

// Prompts `nodes` with `tmpl` through the cache, against the mock oracle
// (seeded with `mock_seed`) or the configured endpoint.
QueryResult query_nodes(const RunConfig& config, const TextAttributedGraph& graph, const PromptTemplate& tmpl,
                        const std::vector<std::size_t>& nodes, std::size_t k, std::uint64_t mock_seed,
                        const fs::path& cache_path) {
  LlmConfig llm = config.llm();
  std::unique_ptr<MockOracle> oracle;
  std::unique_ptr<Transport> inner;
  if (config.mock()) {
    oracle = std::make_unique<MockOracle>(graph, config.mock_accuracy(), k, mock_seed);
    inner = std::make_unique<OracleTransport>(*oracle, graph, tmpl, config.abstract_budget());
    llm.model_name = mock_model_name(config.mock_accuracy(), mock_seed);
    llm.backoff_base = std::chrono::milliseconds(0);
  } else {
    inner = make_http_transport(llm);
  }
  InstrumentedTransport transport(*inner);
  fs::create_directories(cache_path.parent_path());
  ResponseCache cache(cache_path, config.repair_cache());

  std::vector<EnrichmentJob> jobs;
  jobs.reserve(nodes.size());
  for (const auto i : nodes)
    jobs.push_back({graph.texts[i].node_id, build_prompt(graph.texts[i], tmpl, config.abstract_budget())});
  auto run = run_enrichment(jobs, llm, transport, cache);
  return {std::move(run.responses), transport.calls(), run.cache_hits};
}

FeatureSet read_features(const RunConfig& config, const std::vector<std::string>& sources, std::size_t rows) {
  FeatureSet out;
  for (const auto& s : sources) {
    const auto path = feature_path(config, s);
    if (!fs::exists(path))
      throw ConfigError("feature file for source '" + s + "' not found: " + path.string() + " (run build-features)");
    auto fm = read_feature_matrix(path);
    if (fm.values.rows() != rows)
      throw ShapeError(path.string() + ": " + std::to_string(fm.values.rows()) + " rows for " +
                       std::to_string(rows) + " nodes");
    out[s] = std::move(fm.values);
  }
  return out;
}

}  // namespace

TextAttributedGraph load_configured_graph(const RunConfig& config) {
  auto graph = load_tag_dataset(config.dataset_paths());
  // A dataset without splits.json gets one fixed split, independent of the
  // run seeds, so every run on it is evaluated on the same nodes.
  if (graph.splits.empty()) graph.splits = split_nodes(graph, SplitRatios{}, 0);
  return graph;
}

PromptTemplate resolve_template(const RunConfig& config) {
  const std::string spec = config.template_spec();
  if (spec.empty()) {
    const std::string dir = config.get("dataset.dir").get<std::string>();
    if (dir.empty()) throw ConfigError("dataset.template is empty and dataset.dir is not set");
    const auto path = fs::path(dir) / "template.json";
    if (!fs::exists(path)) throw ConfigError("dataset.template is empty and " + path.string() + " does not exist");
    return load_template(path);
  }
  for (const auto& t : builtin_templates())
    if (t.template_id == spec) return t;
  if (!fs::exists(spec)) throw ConfigError("dataset.template '" + spec + "' is neither a builtin id nor a file");
  return load_template(spec);
}

std::size_t ranked_k(const RunConfig& config, const PromptTemplate& tmpl, std::size_t num_classes) {
  std::size_t k = config.get("pred.k").get<std::size_t>();
  if (k == 0) k = tmpl.expected_k;
  return std::min(k, num_classes);
}

std::string describe_plan(const std::string& command, const RunConfig& config) {
  const auto out = config.out_dir();
  std::string plan = "command: " + command + "\nconfig hash: " + config.hash() + "\nrun directory: " + out.string() + "\n";
  const auto step = [&](const std::string& s) { plan += "  - " + s + "\n"; };
  plan += "stages:\n";
  if (command == "enrich") {
    step(std::string("query ") + (config.mock() ? "the mock oracle" : config.llm().endpoint_url) +
         " for every node, cached in " + (out / "enrich/cache.jsonl").string());
    step("parse answers into " + enriched_path(config).string());
    step("write enrich/parse_report.jsonl and enrich/summary.json");
  } else if (command == "build-features") {
    step("fit TF-IDF and train interpreters on node texts and explanations");
    step("encode ranked predictions");
    step("write features/orig.tfm, features/expl.tfm, features/pred.tfm");
  } else if (command == "train") {
    std::string seeds;
    for (const auto s : config.seeds()) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
    step("train one " + std::string(to_string(config.gnn().arch)) + " per source for seeds " + seeds);
    step("write train/report.json and train/table.txt");
  } else if (command == "ablate") {
    step("full run plus one leave-one-out run per source");
    step("write ablate/ablation.json and ablate/ablation.txt");
  } else if (command == "prompt-sweep") {
    for (const auto& t : template_variants(config.sweep_family())) step("query template " + t.template_id);
    step("write prompt_sweep/sweep.json and prompt_sweep/sweep.txt");
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
  return plan;
}

EnrichResult cmd_enrich(const RunConfig& config) {
  config.validate();
  const auto graph = load_configured_graph(config);
  const auto tmpl = resolve_template(config);
  const std::size_t k = ranked_k(config, tmpl, graph.num_classes());
  write_run_record(config, "enrich");
  const auto t0 = Clock::now();

  std::vector<std::size_t> nodes(graph.num_nodes);
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = i;
  const auto dir = config.out_dir() / "enrich";
  auto q = query_nodes(config, graph, tmpl, nodes, k, stage_seed(run_seed(config), "mock"), dir / "cache.jsonl");

  EnrichResult result;
  result.records.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto rec = parse_answer(q.responses[i], graph.label_space, k);
    rec.node_id = graph.texts[i].node_id;
    result.records.push_back(std::move(rec));
  }
  result.summary = summarize(result.records);
  result.network_calls = q.network_calls;
  result.cache_hits = q.cache_hits;

  write_enriched(result.records, graph.label_space, enriched_path(config));
  write_parse_report(result.records, dir / "parse_report.jsonl");
  const json summary = {{"template_id", tmpl.template_id},
                        {"k", k},
                        {"total", result.summary.total()},
                        {"full", result.summary.full},
                        {"partial", result.summary.partial},
                        {"fallback", result.summary.fallback},
                        {"fallback_rate", result.summary.fallback_rate()},
                        {"network_calls", result.network_calls},
                        {"cache_hits", result.cache_hits},
                        {"seconds", seconds_since(t0)}};
  write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
  return result;
}

FeatureSet cmd_build_features(const RunConfig& config) {
  config.validate();
  const auto graph = load_configured_graph(config);
  const auto tmpl = resolve_template(config);
  const auto path = enriched_path(config);
  if (!fs::exists(path)) throw ConfigError("enriched records not found: " + path.string() + " (run enrich)");
  const auto records = read_enriched(path, graph.label_space);
  write_run_record(config, "build-features");

  auto fc = config.features();
  fc.pred.k = ranked_k(config, tmpl, graph.num_classes());
  auto built = build_features(graph, records, fc);
  for (const auto& [source, values] : built.features) {
    FeatureMatrix fm{values, source, stage_seed(fc.seed, source == "pred" ? "pred" : "interpreter/" + source),
                     config.hash()};
    fs::create_directories(feature_path(config, source).parent_path());
    write_feature_matrix(feature_path(config, source), fm);
  }
  write_file_atomic(config.out_dir() / "features" / "timings.json", json(built.timings).dump(2) + "\n");
  return std::move(built.features);
}

ExperimentReport cmd_train(const RunConfig& config) {
  config.validate();
  const auto graph = load_configured_graph(config);
  const auto spec = config.experiment();
  const auto t0 = Clock::now();
  const auto features = read_features(config, spec.sources, graph.num_nodes);
  const double load_seconds = seconds_since(t0);
  write_run_record(config, "train");

  auto report = run_tape_experiment(graph, features, spec);
  report.timings["load_features"] = load_seconds;
  const auto dir = config.out_dir() / "train";
  fs::create_directories(dir);
  write_file_atomic(dir / "report.json", to_json(report).dump(2) + "\n");
  write_file_atomic(dir / "table.txt", render_table({{std::string(to_string(spec.gnn.arch)), report}}));
  return report;
}

std::vector<AblationRow> cmd_ablate(const RunConfig& config) {
  config.validate();
  const auto graph = load_configured_graph(config);
  const auto spec = config.experiment();
  const auto features = read_features(config, spec.sources, graph.num_nodes);
  write_run_record(config, "ablate");

  auto rows = ablation_sweep(graph, features, spec);
  json out = json::array();
  for (const auto& r : rows) out.push_back({{"name", r.name}, {"delta_test", r.delta_test}, {"report", to_json(r.report)}});
  const auto dir = config.out_dir() / "ablate";
  fs::create_directories(dir);
  write_file_atomic(dir / "ablation.json", out.dump(2) + "\n");
  write_file_atomic(dir / "ablation.txt", render_ablation(rows));
  return rows;
}

std::vector<SweepRow> cmd_prompt_sweep(const RunConfig& config) {
  config.validate();
  const auto graph = load_configured_graph(config);
  const auto variants = template_variants(config.sweep_family());
  if (variants.empty()) throw ConfigError("sweep.family '" + config.sweep_family() + "' has no builtin templates");
  write_run_record(config, "prompt-sweep");

  auto nodes = graph.labeled_nodes();
  Rng rng(stage_seed(run_seed(config), "sweep"));
  rng.shuffle(std::span<std::size_t>(nodes));
  nodes.resize(std::min(nodes.size(), config.sweep_sample_size()));
  if (nodes.empty()) throw ConfigError("prompt sweep: dataset has no labeled nodes");

  const auto dir = config.out_dir() / "prompt_sweep";
  std::vector<SweepRow> rows;
  json out = json::array();
  for (const auto& tmpl : variants) {
    const std::size_t k = std::min(tmpl.expected_k, graph.num_classes());
    // Each template gets its own mock stream, as a different prompt would.
    const auto mock_seed = stage_seed(run_seed(config), "mock/" + tmpl.template_id);
    const auto q = query_nodes(config, graph, tmpl, nodes, k, mock_seed, dir / "cache.jsonl");
    std::size_t correct = 0, fallback = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto rec = parse_answer(q.responses[i], graph.label_space, k);
      if (rec.status == ParseStatus::fallback) ++fallback;
      if (!rec.ranked.empty() && static_cast<int>(rec.ranked[0]) == graph.labels[nodes[i]]) ++correct;
    }
    const double n = static_cast<double>(nodes.size());
    rows.push_back({tmpl.template_id, nodes.size(), correct / n, fallback / n});
    out.push_back({{"template_id", tmpl.template_id},
                   {"nodes", nodes.size()},
                   {"top1_accuracy", rows.back().top1_accuracy},
                   {"fallback_rate", rows.back().fallback_rate},
                   {"network_calls", q.network_calls}});
  }
  write_file_atomic(dir / "sweep.json", out.dump(2) + "\n");
  write_file_atomic(dir / "sweep.txt", render_sweep(rows));
  return rows;
}

std::string render_sweep(const std::vector<SweepRow>& rows) {
  std::string out = "template                         nodes   top1     fallback\n";
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-32s %-7zu %.4f   %.4f\n", r.template_id.c_str(), r.nodes, r.top1_accuracy,
                  r.fallback_rate);
    out += buf;
  }
  return out;
}

void cmd_make_synthetic(const SyntheticOptions& options, const fs::path& dir) {
  const auto graph = make_synthetic_tag(options.spec);
  if (options.k < 1) throw ConfigError("make-synthetic: k must be >= 1");
  save_tag_dataset(graph, dir);
  save_template(topic_template(graph.label_space, std::min(options.k, graph.num_classes())), dir / "template.json");
}

}  // namespace tape
