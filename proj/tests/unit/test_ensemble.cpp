#include <doctest.h>

#include <cmath>

#include "tape/ensemble.hpp"
#include "tape/error.hpp"
#include "tape/nn.hpp"
#include "tape/rng.hpp"

using namespace tape;

namespace {

DenseMatrix from_rows(std::vector<std::vector<float>> rows) {
  DenseMatrix m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

DenseMatrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  DenseMatrix m(r, c);
  for (float& v : m.data()) v = static_cast<float>((rng.uniform() * 2.0 - 1.0));
  return m;
}

TextAttributedGraph small_graph() {
  SyntheticSpec spec;
  spec.num_nodes = 300;
  spec.num_classes = 3;
  spec.homophily = 0.9;
  spec.seed = 4;
  return make_synthetic_tag(spec);
}

FeatureSet one_hot_features(const TextAttributedGraph& g) {
  FeatureSet fs;
  DenseMatrix exact(g.num_nodes, g.num_classes()), noise(g.num_nodes, 4);
  Rng rng(1);
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    exact(i, static_cast<std::size_t>(g.labels[i])) = 1.0f;
    for (std::size_t c = 0; c < 4; ++c) noise(i, c) = static_cast<float>((rng.uniform() * 2.0 - 1.0));
  }
  fs["orig"] = noise;
  fs["expl"] = exact;
  fs["pred"] = noise;
  return fs;
}

GnnConfig tiny_gnn() {
  GnnConfig c;
  c.num_layers = 2;
  c.hidden_dim = 8;
  c.dropout = 0.0;
  c.max_epochs = 150;
  c.learning_rate = 0.05;
  c.patience = 30;
  return c;
}

}  // namespace

TEST_CASE("ensemble_mean: documented examples") {
  const auto a = from_rows({{2, 0, 0}, {0, 1, 0}});
  const auto b = from_rows({{0, 2, 0}, {0, 0, 3}});
  const std::vector<DenseMatrix> both{a, b};
  const auto m = ensemble_mean(both);
  CHECK(m(0, 0) == 1.0f);
  CHECK(m(0, 1) == 1.0f);
  CHECK(m(1, 1) == 0.5f);
  CHECK(m(1, 2) == 1.5f);

  const std::vector<DenseMatrix> single{a};
  CHECK(ensemble_mean(single) == a);
}

TEST_CASE("ensemble: ties resolve to the lowest class index") {
  const std::vector<DenseMatrix> tie{from_rows({{3, 1}}), from_rows({{1, 3}})};
  const auto m = ensemble_mean(tie);
  const std::vector<int> labels{0};
  const std::vector<std::size_t> mask{0};
  CHECK(accuracy(m, labels, mask) == 1.0);
}

TEST_CASE("ensemble_mean: errors") {
  CHECK_THROWS_AS(ensemble_mean(std::vector<DenseMatrix>{}), ConfigError);
  const std::vector<DenseMatrix> bad{DenseMatrix(2, 3), DenseMatrix(2, 4)};
  CHECK_THROWS_AS(ensemble_mean(bad), ShapeError);
}

TEST_CASE("property: probability mode rows are distributions") {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    std::vector<DenseMatrix> ms;
    for (int k = 0; k < 3; ++k) ms.push_back(random_matrix(rng, 6, 5));
    const auto p = ensemble_mean(ms, EnsembleMode::probabilities);
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double s = 0.0;
      for (const float v : p.row(r)) {
        CHECK(v >= 0.0f);
        s += v;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
    }
  }
}

TEST_CASE("property: ensemble argmax is shift- and permutation-invariant") {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    std::vector<DenseMatrix> ms;
    for (int k = 0; k < 3; ++k) ms.push_back(random_matrix(rng, 8, 4));
    const auto base = ensemble_mean(ms);

    // Adding a per-row constant to every matrix leaves the argmax alone.
    auto shifted = ms;
    for (std::size_t r = 0; r < 8; ++r) {
      const float delta = static_cast<float>((rng.uniform() * 2.0 - 1.0) * 3.0);
      for (auto& m : shifted)
        for (float& v : m.row(r)) v += delta;
    }
    const auto after = ensemble_mean(shifted);
    // Swapping member order changes nothing.
    std::vector<DenseMatrix> perm{ms[2], ms[0], ms[1]};
    const auto swapped = ensemble_mean(perm);
    for (std::size_t r = 0; r < 8; ++r) {
      CHECK(argmax_row(after, r) == argmax_row(base, r));
      CHECK(argmax_row(swapped, r) == argmax_row(base, r));
    }
  }
}

TEST_CASE("MeanStd uses the sample standard deviation") {
  const auto m = MeanStd::of({0.70, 0.72, 0.74});
  CHECK(m.mean == doctest::Approx(0.72));
  CHECK(m.std == doctest::Approx(0.02));
  CHECK(MeanStd::of({0.5}).std == 0.0);
}

TEST_CASE("run_tape_experiment: sources, ensemble, determinism") {
  const auto g = small_graph();
  const auto fs = one_hot_features(g);
  ExperimentSpec spec;
  spec.gnn = tiny_gnn();
  spec.seeds = {0, 1};
  spec.config_hash = "abc";

  const auto r = run_tape_experiment(g, fs, spec);
  CHECK(r.per_source.size() == 3);
  CHECK(r.ensemble.test.values.size() == 2);
  CHECK(r.per_source.at("expl").test.mean > 0.8);
  CHECK(r.per_source.at("expl").test.mean > r.per_source.at("orig").test.mean + 0.2);
  CHECK(run_tape_experiment(g, fs, spec).ensemble == r.ensemble);

  spec.parallel = true;
  const auto p = run_tape_experiment(g, fs, spec);
  CHECK(p.per_source == r.per_source);
  CHECK(p.ensemble == r.ensemble);

  SUBCASE("orig alone: the ensemble equals the single source") {
    spec.sources = {"orig"};
    const auto o = run_tape_experiment(g, fs, spec);
    CHECK(o.per_source.size() == 1);
    CHECK(o.ensemble == o.per_source.at("orig"));
  }
  SUBCASE("missing source is named") {
    spec.sources = {"orig", "llm"};
    try {
      run_tape_experiment(g, fs, spec);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("'llm'") != std::string::npos);
    }
  }
}

TEST_CASE("report JSON round trip is exact") {
  ExperimentReport r;
  r.sources = {"orig", "pred"};
  r.per_source["orig"] = {MeanStd::of({0.1 + 0.2, 1.0 / 3.0}), MeanStd::of({0.7})};
  r.per_source["pred"] = {MeanStd::of({0.8, 0.9}), MeanStd::of({0.81, 0.79})};
  r.ensemble = {MeanStd::of({0.85, 0.86}), MeanStd::of({0.84, 0.83})};
  r.seeds = {0, 18446744073709551615ull};
  r.config_hash = "0123456789abcdef";
  r.arch = GnnArch::sage;
  r.mode = EnsembleMode::probabilities;
  r.timings = {{"train_orig", 1.25}, {"features", 1e-7}};
  const auto text = to_json(r).dump();
  CHECK(report_from_json(nlohmann::json::parse(text)) == r);
  CHECK_THROWS_AS(report_from_json(nlohmann::json::parse("{\"sources\": []}")), ConfigError);
}

TEST_CASE("ablation sweep: full plus leave-one-out") {
  const auto g = small_graph();
  const auto fs = one_hot_features(g);
  ExperimentSpec spec;
  spec.gnn = tiny_gnn();
  spec.seeds = {0};
  const auto rows = ablation_sweep(g, fs, spec);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].name == "full");
  CHECK(rows[0].delta_test == 0.0);
  CHECK(rows[2].name == "without expl");
  CHECK(rows[2].report.sources == std::vector<std::string>{"orig", "pred"});
  CHECK(rows[2].delta_test == doctest::Approx(rows[2].report.ensemble.test.mean -
                                              rows[0].report.ensemble.test.mean));
  CHECK_THROWS_AS(ablate(g, fs, spec, {"orig", "expl", "pred"}), ConfigError);

  const auto table = render_ablation(rows);
  CHECK(table.find("without pred") != std::string::npos);
}

TEST_CASE("render_table columns") {
  ExperimentReport r;
  r.per_source["orig"] = {MeanStd::of({0.5}), MeanStd::of({0.75, 0.77})};
  r.ensemble = {MeanStd::of({0.5}), MeanStd::of({0.8})};
  const auto t = render_table({{"GCN", r}});
  CHECK(t.find("h_orig") != std::string::npos);
  CHECK(t.find("h_TAPE") != std::string::npos);
  CHECK(t.find("0.7600 ± 0.0141") != std::string::npos);
  CHECK(t.find("0.8000 ± 0.0000") != std::string::npos);
}
