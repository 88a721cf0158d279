#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "tape/commands.hpp"
#include "tape/config.hpp"
#include "tape/error.hpp"
#include "tape/feature_io.hpp"
#include "tape/io.hpp"

using namespace tape;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("tape_pipeline_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// A small synthetic dataset plus a config tuned to train in well under a second.
RunConfig small_run(const TempDir& d, std::size_t nodes = 160) {
  SyntheticOptions o;
  o.spec.num_nodes = nodes;
  o.spec.num_classes = 4;
  o.spec.seed = 3;
  cmd_make_synthetic(o, d.path / "data");
  RunConfig c;
  c.set("dataset.dir", (d.path / "data").string());
  c.set("mock.enabled", true);
  c.set("encoder.min_df", 2);
  c.set("encoder.hidden_dim", 16);
  c.set("encoder.dim", 64);
  c.set("encoder.epochs", 100);
  c.set("pred.d_p", 32);
  c.set("gnn.hidden_dim", 16);
  c.set("gnn.num_layers", 2);
  c.set("gnn.max_epochs", 60);
  c.set("gnn.patience", 15);
  c.set_text("experiment.seeds", "0,1");
  c.set("experiment.out", (d.path / "run").string());
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TAPE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config values") {
  CHECK(parse_config_value("\"a \\\"q\\\" b\"") == "a \"q\" b");
  CHECK(parse_config_value("12") == 12);
  CHECK(parse_config_value("-3").get<std::int64_t>() == -3);
  CHECK(parse_config_value("1_000") == 1000);
  CHECK(parse_config_value("0.25") == 0.25);
  CHECK(parse_config_value("1e-3") == 1e-3);
  CHECK(parse_config_value("true") == true);
  CHECK(parse_config_value("[1, 2, 3,]") == json::array({1, 2, 3}));
  CHECK(parse_config_value("[]") == json::array());
  CHECK(parse_config_value("[\"a\", \"b\"]") == json::array({"a", "b"}));
  for (const char* bad : {"", "\"open", "[1, 2", "1.2.3", "yes", "12 13", "\"\\q\""})
    CHECK_THROWS_AS(parse_config_value(bad), ConfigError);
}

TEST_CASE("config text: sections, comments, errors carry line numbers") {
  const auto t = parse_config_text("# top\n[gnn]\nhidden_dim = 64  # width\n\n[dataset]\ndir = \"a#b\"\n", "x.toml");
  CHECK(t["gnn"]["hidden_dim"] == 64);
  CHECK(t["dataset"]["dir"] == "a#b");
  const auto line_of = [](const std::string& text) {
    try {
      parse_config_text(text, "x.toml");
    } catch (const ParseError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  CHECK(line_of("key = 1\n") == 1);
  CHECK(line_of("[gnn]\n\nno equals sign\n") == 3);
  CHECK(line_of("[gnn]\na = 1\na = 2\n") == 3);
  CHECK(line_of("[gnn\n") == 1);
}

TEST_CASE("RunConfig: typed keys, overrides, render round trip, hash") {
  RunConfig c;
  CHECK(c.gnn() == GnnConfig{});
  CHECK(c.seeds() == std::vector<std::uint64_t>{0, 1, 2, 3});
  CHECK(c.llm().model_name == LlmConfig{}.model_name);
  CHECK_THROWS_AS(c.set("gnn.hiden_dim", 3), ConfigError);
  CHECK_THROWS_AS(c.set("gnn", 3), ConfigError);
  CHECK_THROWS_AS(c.set("gnn.hidden_dim", "wide"), ConfigError);
  CHECK_THROWS_AS(c.set("gnn.hidden_dim", -1), ConfigError);
  CHECK_THROWS_AS(c.set("experiment.seeds", json::array({"a"})), ConfigError);

  c.set("gnn.dropout", 0);  // integer literal accepted for a float key
  CHECK(c.gnn().dropout == 0.0);
  c.set_text("gnn.arch", "sage");
  c.set_text("experiment.seeds", "5, 6");
  c.set_text("experiment.sources", "orig,pred");
  c.set_text("gnn.learning_rate", "0.005");
  CHECK(c.gnn().arch == GnnArch::sage);
  CHECK(c.seeds() == std::vector<std::uint64_t>{5, 6});
  CHECK(c.experiment().sources == std::vector<std::string>{"orig", "pred"});
  c.validate();

  // Rendered text parses back to the same table.
  TempDir d("render");
  write_file_atomic(d.path / "c.toml", c.render());
  const auto back = RunConfig::from_file(d.path / "c.toml");
  CHECK(back.table() == c.table());
  CHECK(back.hash() == c.hash());

  // The output directory does not enter the hash; everything else does.
  auto moved = c;
  moved.set("experiment.out", "elsewhere");
  CHECK(moved.hash() == c.hash());
  moved.set("gnn.hidden_dim", 8);
  CHECK(moved.hash() != c.hash());

  c.set_text("experiment.seeds", "[]");
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("RunConfig::from_file resolves dataset paths against the file") {
  TempDir d("relpath");
  fs::create_directories(d.path / "conf");
  write_file_atomic(d.path / "conf" / "r.toml", "[dataset]\ndir = \"../data\"\ntemplate = \"t.json\"\n");
  const auto c = RunConfig::from_file(d.path / "conf" / "r.toml");
  CHECK(fs::path(c.get("dataset.dir").get<std::string>()) == (d.path / "data").lexically_normal());
  CHECK(fs::path(c.template_spec()) == (d.path / "conf" / "t.json").lexically_normal());
  CHECK_THROWS_AS(c.dataset_paths(), ConfigError);  // files do not exist
}

TEST_CASE("make-synthetic: loadable directory with a template") {
  TempDir d("synth");
  const auto c = small_run(d);
  const auto g = load_configured_graph(c);
  CHECK(g.num_nodes == 160);
  const auto t = resolve_template(c);
  CHECK(t.template_id == "topics");
  CHECK(t.expected_k == 3);
  CHECK(ranked_k(c, t, g.num_classes()) == 3);

  fs::remove(d.path / "data" / "splits.json");
  const auto a = load_configured_graph(c);
  CHECK(a.splits.train.size() == 96);
  CHECK(a.splits.val.size() == 32);
  CHECK(load_configured_graph(c).splits == a.splits);
}

TEST_CASE("pipeline: enrich, rerun, build-features, train, ablate") {
  TempDir d("full");
  auto c = small_run(d);

  CHECK_THROWS_AS(cmd_build_features(c), ConfigError);  // no enrichment yet

  const auto first = cmd_enrich(c);
  CHECK(first.network_calls == 160);
  CHECK(first.summary.total() == 160);
  CHECK(first.summary.fallback == 0);
  const auto second = cmd_enrich(c);
  CHECK(second.network_calls == 0);
  CHECK(second.cache_hits == 160);
  CHECK(second.records == first.records);
  const auto summary = json::parse(read_file(c.out_dir() / "enrich" / "summary.json"));
  CHECK(summary["fallback_rate"] == 0.0);

  const auto run = json::parse(read_file(c.out_dir() / "run.json"));
  CHECK(run["config_hash"] == c.hash());
  CHECK(run["seeds"] == json::array({0, 1}));
  CHECK(run["stage_seeds"].contains("tfidf/orig"));

  const auto features = cmd_build_features(c);
  REQUIRE(features.size() == 3);
  CHECK(features.at("orig").cols() == 16);
  CHECK(features.at("expl").cols() == 16);
  CHECK(features.at("pred").cols() == 32);
  for (const char* s : {"orig", "expl", "pred"}) {
    const auto fm = read_feature_matrix(c.out_dir() / "features" / (std::string(s) + ".tfm"));
    CHECK(fm.source == s);
    CHECK(fm.config_hash == c.hash());
    CHECK(fm.values == features.at(s));
  }
  CHECK(cmd_build_features(c) == features);

  const auto report = cmd_train(c);
  CHECK(report.ensemble.test.values.size() == 2);
  CHECK(report.config_hash == c.hash());
  CHECK(report_from_json(json::parse(read_file(c.out_dir() / "train" / "report.json"))) == report);

  c.set_text("experiment.sources", "orig,pred");
  const auto rows = cmd_ablate(c);
  CHECK(rows.size() == 3);
  CHECK(json::parse(read_file(c.out_dir() / "ablate" / "ablation.json")).size() == 3);

  fs::remove(c.out_dir() / "features" / "pred.tfm");
  try {
    cmd_train(c);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("'pred'") != std::string::npos);
  }
}

TEST_CASE("prompt sweep: one row per arXiv variant; p = 1 gives accuracy 1") {
  TempDir d("sweep");
  auto c = small_run(d);
  c.set("sweep.sample_size", 50);
  const auto rows = cmd_prompt_sweep(c);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].template_id == "ogbn-arxiv");
  CHECK(rows[3].template_id == "ogbn-arxiv/chain-of-thought");
  for (const auto& r : rows) {
    CHECK(r.nodes == 50);
    CHECK(r.top1_accuracy >= 0.0);
    CHECK(r.top1_accuracy <= 1.0);
  }
  c.set("mock.accuracy", 1.0);
  for (const auto& r : cmd_prompt_sweep(c)) CHECK(r.top1_accuracy == 1.0);
  CHECK(render_sweep(rows).find("ogbn-arxiv/focus-on-text") != std::string::npos);
}

TEST_CASE("describe_plan has no side effects") {
  TempDir d("plan");
  auto c = small_run(d);
  for (const char* cmd : {"enrich", "build-features", "train", "ablate", "prompt-sweep"})
    CHECK(describe_plan(cmd, c).find(c.hash()) != std::string::npos);
  CHECK_FALSE(fs::exists(c.out_dir()));
  CHECK_THROWS_AS(describe_plan("deploy", c), ConfigError);
}

TEST_CASE("CLI exit codes and dry run") {
  TempDir d("cli");
  const auto data = (d.path / "data").string();
  const auto out = (d.path / "run").string();
  CHECK(run_cli("make-synthetic --nodes 80 --classes 3 --out " + data) == 0);
  CHECK(fs::exists(d.path / "data" / "template.json"));

  const std::string base = " --dataset.dir " + data + " --out " + out;
  CHECK(run_cli("enrich --mock --dry-run" + base) == 0);
  CHECK_FALSE(fs::exists(out));
  CHECK(run_cli("enrich --mock --seed 7" + base) == 0);
  CHECK(json::parse(read_file(d.path / "run" / "run.json"))["seeds"] == json::array({7}));

  CHECK(run_cli("") == 2);
  CHECK(run_cli("train --gnn.hiden_dim 3" + base) == 2);
  CHECK(run_cli("train --gnn.hidden_dim wide" + base) == 2);
  CHECK(run_cli("enrich --mock --mock-accuracy 1.5" + base) == 2);
  CHECK(run_cli("build-features --dataset.dir " + (d.path / "missing").string()) == 2);
  // Nothing listens on port 9; the connection fails after retries.
  CHECK(run_cli("enrich --llm.endpoint_url http://127.0.0.1:9/v1 --llm.retry_limit 0 --llm.backoff_ms 0 --out " +
                out + "2 --dataset.dir " + data) == 3);
  CHECK(run_cli("--help") == 0);
}
