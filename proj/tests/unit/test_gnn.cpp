#include <doctest.h>

#include <filesystem>
#include <numeric>

#include "../support/gnn_checks.hpp"
#include "tape/error.hpp"
#include "tape/gnn.hpp"
#include "tape/io.hpp"
#include "tape/nn.hpp"

using namespace tape;

namespace {

constexpr GnnArch kArchs[] = {GnnArch::gcn, GnnArch::sage};

double majority_rate(const TextAttributedGraph& g) {
  std::vector<std::size_t> counts(g.num_classes(), 0);
  for (const auto i : g.splits.train) ++counts[static_cast<std::size_t>(g.labels[i])];
  const auto major = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  std::size_t hits = 0;
  for (const auto i : g.splits.val) hits += g.labels[i] == major;
  return static_cast<double>(hits) / static_cast<double>(g.splits.val.size());
}

TextAttributedGraph synthetic600() {
  SyntheticSpec spec;
  spec.num_nodes = 600;
  spec.num_classes = 4;
  spec.homophily = 0.8;
  spec.seed = 1;
  return make_synthetic_tag(spec);
}

GnnConfig small_config(GnnArch arch) {
  GnnConfig c;
  c.arch = arch;
  c.hidden_dim = 32;
  c.max_epochs = 300;
  c.patience = 30;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("normalize_adjacency: documented cases") {
  const auto one = normalize_adjacency(SparseCsr::from_triplets(1, 1, {}), GnnArch::gcn);
  CHECK(one.to_dense() == DenseMatrix::from_rows({{1.0f}}));
  const auto two = normalize_adjacency(SparseCsr::from_triplets(2, 2, {{0, 1, 1}, {1, 0, 1}}), GnnArch::gcn);
  CHECK(two.to_dense() == DenseMatrix::from_rows({{0.5f, 0.5f}, {0.5f, 0.5f}}));

  const auto a = SparseCsr::from_triplets(4, 4, {{0, 1, 1}, {1, 0, 1}, {1, 2, 1}, {2, 1, 1}});
  const auto s = normalize_adjacency(a, GnnArch::sage);
  for (std::size_t i = 0; i < 3; ++i) {
    double sum = 0;
    for (const float v : s.row_values(i)) sum += v;
    CHECK(sum == doctest::Approx(1.0));
  }
  CHECK(s.row_indices(3).empty());
  CHECK_THROWS_AS(normalize_adjacency(SparseCsr::from_triplets(2, 3, {}), GnnArch::gcn), ShapeError);
}

TEST_CASE("property: normalization matches the dense formulas") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = ref::random_symmetric_graph(2 + rng.below(11), 0.3, rng);
    for (const auto arch : kArchs) {
      const auto got = ref::from(normalize_adjacency(a, arch));
      const auto expect = arch == GnnArch::gcn ? ref::gcn_norm(ref::from(a)) : ref::mean_norm(ref::from(a));
      for (std::size_t i = 0; i < got.v.size(); ++i) CHECK(std::abs(got.v[i] - expect.v[i]) < 1e-7);
    }
  }
}

TEST_CASE("forward matches the dense oracle on 20 random graphs") {
  for (const auto arch : kArchs)
    for (std::uint64_t s = 0; s < 20; ++s) {
      CAPTURE(s);
      CHECK(ref::gnn_forward_gap(arch, 2 + s % 11, 100 + s) < 1e-5);
    }
}

TEST_CASE("forward: one node, identity weights") {
  GnnConfig c;
  c.num_layers = 3;
  c.hidden_dim = 3;
  GnnModel m(c, 3, 3);
  for (auto& l : m.layers()) l.weight.value = DenseMatrix::identity(3);
  const auto adj = normalize_adjacency(SparseCsr::from_triplets(1, 1, {}), GnnArch::gcn);
  const auto x = DenseMatrix::from_rows({{1.0f, -2.0f, 0.5f}});
  CHECK(predict(m, adj, x) == DenseMatrix::from_rows({{1.0f, 0.0f, 0.5f}}));
  m.layers()[0].weight.value = DenseMatrix::from_rows({{-1, 0, 0}, {0, -1, 0}, {0, 0, -1}});
  CHECK(predict(m, adj, x) == DenseMatrix::from_rows({{0.0f, 2.0f, 0.0f}}));
}

TEST_CASE("forward: dropout 0 gives identical train and eval logits") {
  Rng rng(2);
  const auto a = ref::random_symmetric_graph(9, 0.3, rng);
  const auto x = ref::random_dense(9, 4, rng);
  for (const auto arch : kArchs) {
    GnnConfig c;
    c.arch = arch;
    c.hidden_dim = 6;
    c.dropout = 0.0f;
    GnnModel m(c, 4, 3);
    const auto adj = normalize_adjacency(a, arch);
    GradTape t;
    CHECK(t.value(m.forward(t, adj, x, true, 7)) == predict(m, adj, x));
    c.dropout = 0.5f;
    GnnModel md(c, 4, 3);
    GradTape t2;
    CHECK_FALSE(t2.value(md.forward(t2, adj, x, true, 7)) == predict(md, adj, x));
  }
}

TEST_CASE("property: permutation equivariance") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 3 + rng.below(10);
    const auto a = ref::random_symmetric_graph(n, 0.35, rng);
    const auto x = ref::random_dense(n, 5, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<Triplet> pt;
    for (std::size_t i = 0; i < n; ++i)
      for (const auto j : a.row_indices(i)) pt.push_back({perm[i], perm[j], 1.0f});
    const auto pa = SparseCsr::from_triplets(n, n, pt);
    DenseMatrix px(n, 5);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < 5; ++j) px(perm[i], j) = x(i, j);
    for (const auto arch : kArchs) {
      GnnConfig c;
      c.arch = arch;
      c.hidden_dim = 7;
      c.seed = static_cast<std::uint64_t>(trial);
      GnnModel m(c, 5, 3);
      const auto y = predict(m, normalize_adjacency(a, arch), x);
      const auto py = predict(m, normalize_adjacency(pa, arch), px);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(py(perm[i], j) - y(i, j)) <= 1e-6);
    }
  }
}

TEST_CASE("property: an added isolated node leaves other logits unchanged") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + rng.below(10);
    const auto a = ref::random_symmetric_graph(n, 0.4, rng);
    const auto x = ref::random_dense(n, 4, rng);
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < n; ++i)
      for (const auto j : a.row_indices(i)) t.push_back({i, j, 1.0f});
    const auto a2 = SparseCsr::from_triplets(n + 1, n + 1, t);
    DenseMatrix x2(n + 1, 4, 3.0f);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < 4; ++j) x2(i, j) = x(i, j);
    for (const auto arch : kArchs) {
      GnnConfig c;
      c.arch = arch;
      c.hidden_dim = 5;
      GnnModel m(c, 4, 3);
      const auto y = predict(m, normalize_adjacency(a, arch), x);
      const auto y2 = predict(m, normalize_adjacency(a2, arch), x2);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(y2(i, j) - y(i, j)) <= 1e-6);
    }
  }
}

TEST_CASE("full-model gradients match finite differences") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    CHECK(ref::gnn_gradient_error(GnnArch::gcn, 3, 40 + s) < 1e-3);
    CHECK(ref::gnn_gradient_error(GnnArch::sage, 2, 50 + s) < 1e-3);
  }
}

TEST_CASE("train_gnn: informative features beat the majority rate") {
  const auto g = synthetic600();
  Rng rng(4);
  DenseMatrix x(g.num_nodes, 8);
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    for (std::size_t j = 0; j < 8; ++j) x(i, j) = static_cast<float>(rng.uniform() * 2 - 1);
    x(i, static_cast<std::size_t>(g.labels[i])) += 0.8f;
  }
  const auto trained = train_gnn(x, g, small_config(GnnArch::gcn));
  CHECK(trained.history.best_val_accuracy > majority_rate(g) + 0.2);
  CHECK(trained.history.epochs.size() <= 300);
}

TEST_CASE("train_gnn: zero features stay near the majority rate") {
  const auto g = synthetic600();
  const auto trained = train_gnn(DenseMatrix(g.num_nodes, 8), g, small_config(GnnArch::sage));
  GnnModel m = trained.model;
  const double acc = masked_accuracy(predict(m, normalize_adjacency(g.adjacency, GnnArch::sage), DenseMatrix(g.num_nodes, 8)),
                                     g.labels, g.splits.val);
  CHECK(std::abs(acc - majority_rate(g)) <= 0.05);
}

TEST_CASE("train_gnn: determinism, early stop and errors") {
  SyntheticSpec spec;
  spec.num_nodes = 120;
  spec.num_classes = 3;
  spec.seed = 6;
  const auto g = make_synthetic_tag(spec);
  Rng rng(1);
  const auto x = ref::random_dense(g.num_nodes, 6, rng);
  auto c = small_config(GnnArch::gcn);
  c.hidden_dim = 8;
  c.patience = 5;
  const auto a = train_gnn(x, g, c), b = train_gnn(x, g, c);
  CHECK(a.history == b.history);
  CHECK(a.model.layers()[0].weight.value == b.model.layers()[0].weight.value);
  if (a.history.epochs.size() < c.max_epochs) CHECK(a.history.epochs.size() == a.history.best_epoch + c.patience + 2);
  CHECK(a.history.best_val_accuracy == a.history.epochs[a.history.best_epoch].val_accuracy);

  CHECK_THROWS_AS(train_gnn(DenseMatrix(5, 6), g, c), ShapeError);
  auto bad = g;
  bad.splits.val.clear();
  CHECK_THROWS_AS(train_gnn(x, bad, c), ConfigError);
  c.dropout = 1.0f;
  CHECK_THROWS_AS(train_gnn(x, g, c), ConfigError);
  c.dropout = 0.5f;
  c.learning_rate = 1e30f;
  try {
    train_gnn(x, g, c);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("learning rate") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "tape_test_gnn_ckpt";
  std::filesystem::remove_all(dir);
  Rng rng(3);
  const auto a = ref::random_symmetric_graph(8, 0.4, rng);
  const auto x = ref::random_dense(8, 5, rng);
  for (const auto arch : kArchs) {
    GnnConfig c;
    c.arch = arch;
    c.hidden_dim = 6;
    c.dropout = 0.25f;
    c.seed = 77;
    GnnModel m(c, 5, 4);
    for (auto* p : m.parameters()) p->value = ref::random_dense(p->value.rows(), p->value.cols(), rng);
    const auto path = dir / (std::string(to_string(arch)) + ".bin");
    save_checkpoint(m, path, {{"test_accuracy", 0.5}});
    GnnModel loaded = load_checkpoint(path);
    CHECK(loaded.config() == c);
    const auto adj = normalize_adjacency(a, arch);
    CHECK(predict(loaded, adj, x) == predict(m, adj, x));
  }
  write_file_atomic(dir / "bad.bin", "NOTAGNN1xxxxxxxxxxxxxxxx");
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.bin"), ConfigError);
  auto bytes = read_file(dir / "gcn.bin");
  write_file_atomic(dir / "trunc.bin", bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_checkpoint(dir / "trunc.bin"), ConfigError);
  std::filesystem::remove_all(dir);
}
