#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tape/error.hpp"
#include "tape/graph.hpp"
#include "tape/io.hpp"
#include "tape/rng.hpp"

using namespace tape;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("tape_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  void write(const std::string& file, const std::string& content) const {
    std::ofstream(path / file) << content;
  }
};

DatasetPaths two_node_files(const TempDir& d, const std::string& edges) {
  d.write("edges.tsv", edges);
  d.write("texts.jsonl",
          "{\"id\": \"0\", \"title\": \"t0\", \"abstract\": \"a0\"}\n"
          "{\"id\": \"1\", \"title\": \"t1\", \"abstract\": \"\"}\n");
  d.write("labels.csv", "id,label\n0,A\n1,B\n");
  return DatasetPaths::in_directory(d.path);
}

}  // namespace

TEST_CASE("load: two nodes, one edge, symmetrized") {
  TempDir d("two");
  const auto g = load_tag_dataset(two_node_files(d, "0\t1\n"));
  CHECK(g.num_nodes == 2);
  CHECK(g.adjacency.nnz() == 2);
  CHECK(g.num_classes() == 2);
  CHECK(g.labels == std::vector<int>{0, 1});
  CHECK(g.texts[1].abstract.empty());
}

TEST_CASE("load: duplicate edges collapse, comments skipped, self-loops kept") {
  TempDir d("dup");
  auto g = load_tag_dataset(two_node_files(d, "# comment\n0\t1\n0\t1\n1\t0\n"));
  CHECK(g.adjacency.nnz() == 2);
  g = load_tag_dataset(two_node_files(d, "0\t1\n1\t1\n"));
  CHECK(g.adjacency.nnz() == 3);
  CHECK(g.adjacency.contains(1, 1));
}

TEST_CASE("load: errors") {
  TempDir d("err");
  SUBCASE("malformed edge line carries its line number") {
    auto p = two_node_files(d, "0\t1\n0 1 2\n");
    try {
      load_tag_dataset(p);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("edge endpoints without text are listed") {
    auto p = two_node_files(d, "0\t7\n9\t1\n");
    try {
      load_tag_dataset(p);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      const std::string what = e.what();
      CHECK(what.find("7") != std::string::npos);
      CHECK(what.find("9") != std::string::npos);
    }
  }
  SUBCASE("label outside the label space") {
    auto p = two_node_files(d, "0\t1\n");
    d.write("label_space.json", R"([{"name": "A"}, {"name": "C"}])");
    p.label_space = d.path / "label_space.json";
    CHECK_THROWS_AS(load_tag_dataset(p), ConfigError);
  }
  SUBCASE("text line missing a field") {
    auto p = two_node_files(d, "0\t1\n");
    d.write("texts.jsonl", "{\"id\": \"0\", \"title\": \"x\"}\n");
    CHECK_THROWS_AS(load_tag_dataset(p), ParseError);
  }
  SUBCASE("bad label header") {
    auto p = two_node_files(d, "0\t1\n");
    d.write("labels.csv", "node,class\n0,A\n");
    CHECK_THROWS_AS(load_tag_dataset(p), ParseError);
  }
}

TEST_CASE("load: arbitrary string ids get first-seen dense indices; unlabeled allowed") {
  TempDir d("ids");
  d.write("texts.jsonl",
          "{\"id\": \"paper-z\", \"title\": \"\", \"abstract\": \"\"}\n"
          "{\"id\": \"paper-a\", \"title\": \"\", \"abstract\": \"\"}\n"
          "{\"id\": \"paper-m\", \"title\": \"\", \"abstract\": \"\"}\n");
  d.write("edges.tsv", "paper-a\tpaper-z\n");
  d.write("labels.csv", "id,label\npaper-z,Neural Networks\npaper-a,Theory\n");
  d.write("label_space.json",
          R"([{"name":"Neural Networks","match":["neural networks"]},{"name":"Theory","match":["theory"]}])");
  const auto g = load_tag_dataset(DatasetPaths::in_directory(d.path));
  CHECK(g.texts[0].node_id == "paper-z");
  CHECK(g.texts[2].node_id == "paper-m");
  CHECK(g.labels == std::vector<int>{0, 1, kUnlabeled});
  CHECK(g.labeled_nodes() == std::vector<std::size_t>{0, 1});
}

TEST_CASE("split_nodes") {
  SyntheticSpec spec;
  spec.num_nodes = 10;
  spec.num_classes = 2;
  spec.seed = 3;
  const auto g = make_synthetic_tag(spec);
  const auto m = split_nodes(g, {0.6, 0.2, 0.2}, 7);
  CHECK(m.train.size() == 6);
  CHECK(m.val.size() == 2);
  CHECK(m.test.size() == 2);
  CHECK(split_nodes(g, {0.6, 0.2, 0.2}, 7) == m);
  CHECK_FALSE(split_nodes(g, {0.6, 0.2, 0.2}, 8) == m);
  CHECK_THROWS_AS(split_nodes(g, {0.5, 0.5, 0.1}, 7), ConfigError);
  CHECK_THROWS_AS(split_nodes(g, {1.0, 0.0, 0.0}, 7), ConfigError);
}

TEST_CASE("property: splits partition labeled nodes for random seeds and ratios") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    SyntheticSpec spec;
    spec.num_nodes = 3 + rng.below(60);
    spec.num_classes = 2;
    spec.seed = trial;
    auto g = make_synthetic_tag(spec);
    for (std::size_t i = 0; i < g.num_nodes; ++i)
      if (rng.bernoulli(0.2)) g.labels[i] = kUnlabeled;
    if (g.labeled_nodes().size() < 3) continue;
    const double a = 0.1 + 0.8 * rng.uniform();
    const double b = (1.0 - a) * (0.1 + 0.8 * rng.uniform());
    const SplitRatios r{a, b, 1.0 - a - b};
    const auto m = split_nodes(g, r, rng.next());
    std::vector<std::size_t> all;
    for (const auto* part : {&m.train, &m.val, &m.test}) all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end());
    CHECK(all == g.labeled_nodes());
    const double n = static_cast<double>(all.size());
    CHECK(m.val.size() == static_cast<std::size_t>(std::floor(n * r.val + 1e-9)));
    CHECK(m.test.size() == static_cast<std::size_t>(std::floor(n * r.test + 1e-9)));
  }
}

TEST_CASE("symmetrize is idempotent") {
  const auto a = SparseCsr::from_triplets(4, 4, {{0, 1, 1}, {2, 3, 1}, {3, 3, 1}, {1, 2, 1}});
  const auto s1 = symmetrize(a);
  CHECK(s1.is_symmetric_pattern());
  CHECK(symmetrize(s1) == s1);
}

TEST_CASE("synthetic: homophily dial") {
  SyntheticSpec spec;
  spec.num_nodes = 600;
  spec.num_classes = 4;
  spec.homophily = 0.8;
  spec.seed = 1;
  const auto g = make_synthetic_tag(spec);
  const double h = edge_homophily(g);
  CHECK(h >= 0.75);
  CHECK(h <= 0.85);

  spec.homophily = 1.0;
  CHECK(edge_homophily(make_synthetic_tag(spec)) == 1.0);
  spec.homophily = 0.0;
  CHECK(edge_homophily(make_synthetic_tag(spec)) == 0.0);

  spec.homophily = 1.5;
  CHECK_THROWS_AS(make_synthetic_tag(spec), ConfigError);
  spec.homophily = 0.5;
  spec.num_classes = 1;
  CHECK_THROWS_AS(make_synthetic_tag(spec), ConfigError);
}

TEST_CASE("synthetic: identical files for identical args; save/load round trip") {
  TempDir a("synth_a"), b("synth_b");
  SyntheticSpec spec;
  spec.num_nodes = 80;
  spec.num_classes = 3;
  spec.seed = 5;
  const auto g = make_synthetic_tag(spec);
  save_tag_dataset(g, a.path);
  save_tag_dataset(make_synthetic_tag(spec), b.path);
  for (const char* f : {"edges.tsv", "texts.jsonl", "labels.csv", "splits.json", "label_space.json", "manifest.json"})
    CHECK(read_file(a.path / f) == read_file(b.path / f));

  const auto loaded = load_tag_dataset(DatasetPaths::in_directory(a.path));
  CHECK(loaded == g);
  TempDir c("synth_c");
  save_tag_dataset(loaded, c.path);
  CHECK(load_tag_dataset(DatasetPaths::in_directory(c.path)) == g);
}

TEST_CASE("builtin label spaces") {
  CHECK(cora_label_space().size() == 7);
  CHECK(pubmed_label_space().size() == 3);
  CHECK(arxiv_label_space().size() == 40);
  CHECK(arxiv_label_space().index_of("cs.LG").has_value());
  CHECK_THROWS_AS(LabelSpace({{"A", {"x"}}, {"B", {"x"}}}), ConfigError);
  CHECK_THROWS_AS(LabelSpace(std::vector<LabelClass>{{"A", {}}}), ConfigError);
}

TEST_CASE("Cora-shaped dataset loads with 2708 nodes and 7 classes") {
  TempDir d("cora_shape");
  SyntheticSpec spec;
  spec.num_nodes = 2708;
  spec.num_classes = 7;
  spec.seed = 2;
  auto g = make_synthetic_tag(spec);
  g.label_space = cora_label_space();
  save_tag_dataset(g, d.path);
  const auto loaded = load_tag_dataset(DatasetPaths::in_directory(d.path));
  CHECK(loaded.num_nodes == 2708);
  CHECK(loaded.num_classes() == 7);
  CHECK(loaded.label_space[0].name == "Case Based");
  CHECK(loaded.label_space[6].name == "Theory");
}
