#include "tape/gnn.hpp"

#include <cmath>

#include "tape/adam.hpp"
#include "tape/error.hpp"
#include "tape/feature_io.hpp"
#include "tape/io.hpp"
#include "tape/nn.hpp"
#include "tape/rng.hpp"

namespace tape {
namespace {

constexpr char kMagic[8] = {'T', 'A', 'P', 'E', 'G', 'N', 'N', '1'};
constexpr std::uint64_t kDropoutStream = 0x64726f70;  // "drop"

std::filesystem::path sidecar(const std::filesystem::path& p) {
  auto s = p;
  s += ".json";
  return s;
}

std::size_t layer_out(const GnnConfig& c, std::size_t layer, std::size_t classes) {
  return layer + 1 == c.num_layers ? classes : c.hidden_dim;
}

}  // namespace

std::string_view to_string(GnnArch arch) noexcept { return arch == GnnArch::gcn ? "gcn" : "sage"; }

GnnArch parse_arch(std::string_view name) {
  if (name == "gcn") return GnnArch::gcn;
  if (name == "sage") return GnnArch::sage;
  throw ConfigError("unknown gnn arch '" + std::string(name) + "' (expected gcn or sage)");
}

void GnnConfig::validate() const {
  if (num_layers < 1) throw ConfigError("gnn.num_layers must be >= 1");
  if (num_layers > 1 && hidden_dim < 1) throw ConfigError("gnn.hidden_dim must be >= 1");
  if (!(dropout >= 0.0f && dropout < 1.0f)) throw ConfigError("gnn.dropout must be in [0, 1)");
  if (!(learning_rate > 0.0f)) throw ConfigError("gnn.learning_rate must be positive");
  if (max_epochs < 1) throw ConfigError("gnn.max_epochs must be >= 1");
}

SparseCsr normalize_adjacency(const SparseCsr& a, GnnArch arch) {
  if (a.rows() != a.cols()) throw ShapeError("normalize_adjacency: adjacency must be square");
  const std::size_t n = a.rows();
  std::vector<Triplet> t;
  if (arch == GnnArch::gcn) {
    std::vector<double> deg(n, 1.0);
    for (std::size_t i = 0; i < n; ++i)
      for (const auto j : a.row_indices(i))
        if (j != i) deg[i] += 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      t.push_back({i, i, static_cast<float>(1.0 / deg[i])});
      for (const auto j : a.row_indices(i))
        if (j != i) t.push_back({i, j, static_cast<float>(1.0 / std::sqrt(deg[i] * deg[j]))});
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const auto cols = a.row_indices(i);
      if (cols.empty()) continue;
      const float w = static_cast<float>(1.0 / static_cast<double>(cols.size()));
      for (const auto j : cols) t.push_back({i, j, w});
    }
  }
  return SparseCsr::from_triplets(n, n, std::move(t));
}

GnnModel::GnnModel(const GnnConfig& config, std::size_t input_dim, std::size_t num_classes)
    : config_(config), input_dim_(input_dim), num_classes_(num_classes) {
  config.validate();
  if (input_dim < 1 || num_classes < 1) throw ConfigError("gnn: input and output widths must be >= 1");
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    const std::size_t out = layer_out(config, l, num_classes);
    GnnLayer layer;
    const std::string tag = "layer" + std::to_string(l);
    layer.weight = Parameter(tag + ".weight", glorot_uniform(in, out, mix_key(config.seed, l, 0)));
    if (config.arch == GnnArch::sage) {
      layer.neighbor_weight = Parameter(tag + ".neighbor_weight", glorot_uniform(in, out, mix_key(config.seed, l, 1)));
      layer.bias = Parameter(tag + ".bias", DenseMatrix(1, out));
    }
    layers_.push_back(std::move(layer));
    in = out;
  }
}

std::vector<Parameter*> GnnModel::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_) {
    out.push_back(&l.weight);
    if (config_.arch == GnnArch::sage) {
      out.push_back(&l.neighbor_weight);
      out.push_back(&l.bias);
    }
  }
  return out;
}

Var GnnModel::forward(GradTape& tape, const SparseCsr& norm_adj, const DenseMatrix& features, bool train,
                      std::size_t epoch) {
  if (features.cols() != input_dim_)
    throw ShapeError("gnn forward: expected feature width " + std::to_string(input_dim_) + ", got " +
                     std::to_string(features.cols()));
  if (norm_adj.rows() != features.rows() || norm_adj.cols() != features.rows())
    throw ShapeError("gnn forward: adjacency does not match the feature rows");
  Var h = tape.constant_view(features);
  const std::uint64_t dropout_seed = mix_key(config_.seed, kDropoutStream);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& layer = layers_[l];
    const Var x = tape.dropout(h, config_.dropout, {dropout_seed, epoch, l}, train);
    Var z;
    if (config_.arch == GnnArch::gcn) {
      z = tape.spmm(norm_adj, tape.matmul(x, tape.parameter(layer.weight)));
    } else {
      const Var self = tape.add_bias(tape.matmul(x, tape.parameter(layer.weight)), tape.parameter(layer.bias));
      z = tape.add(self, tape.spmm(norm_adj, tape.matmul(x, tape.parameter(layer.neighbor_weight))));
    }
    h = l + 1 == layers_.size() ? z : tape.relu(z);
  }
  return h;
}

DenseMatrix predict(GnnModel& model, const SparseCsr& norm_adj, const DenseMatrix& features) {
  GradTape tape;
  return tape.value(model.forward(tape, norm_adj, features, false, 0));
}

TrainedGnn train_gnn(const DenseMatrix& features, const TextAttributedGraph& graph, const GnnConfig& config) {
  config.validate();
  const auto& split = graph.splits;
  if (split.train.empty() || split.val.empty()) throw ConfigError("train_gnn: graph needs train and val splits");
  if (features.rows() != graph.num_nodes)
    throw ShapeError("train_gnn: " + std::to_string(features.rows()) + " feature rows for " +
                     std::to_string(graph.num_nodes) + " nodes");
  require_finite(features, "gnn features");

  const SparseCsr adj = normalize_adjacency(graph.adjacency, config.arch);
  TrainedGnn out{GnnModel(config, features.cols(), graph.num_classes()), {}};
  GnnModel& model = out.model;
  const auto params = model.parameters();
  Adam adam(params, {config.learning_rate});
  EarlyStopper stopper(config.patience, true);
  std::vector<DenseMatrix> best;
  for (const auto* p : params) best.push_back(p->value);

  auto diagnose = [&](std::size_t epoch, const std::string& what) {
    return NumericError("gnn epoch " + std::to_string(epoch) + " (learning rate " +
                        std::to_string(config.learning_rate) + "): " + what);
  };

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    double loss = 0.0;
    try {
      GradTape tape;
      const Var logits = model.forward(tape, adj, features, true, epoch);
      const Var l = tape.nll_loss(tape.log_softmax(logits), graph.labels, split.train);
      loss = tape.value(l)(0, 0);
      tape.backward(l);
    } catch (const NumericError& e) {
      throw diagnose(epoch, e.what());
    }
    adam.step();
    DenseMatrix eval;
    try {
      eval = predict(model, adj, features);
    } catch (const NumericError& e) {
      throw diagnose(epoch, e.what());
    }
    const double val_acc = masked_accuracy(eval, graph.labels, split.val);
    out.history.epochs.push_back({loss, val_acc});
    if (stopper.observe(epoch, val_acc))
      for (std::size_t i = 0; i < params.size(); ++i) best[i] = params[i]->value;
    if (stopper.should_stop(epoch)) break;
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  out.history.best_epoch = stopper.best_epoch();
  out.history.best_val_accuracy = stopper.best_score();
  return out;
}

nlohmann::json to_json(const GnnConfig& c) {
  return {{"arch", to_string(c.arch)},     {"num_layers", c.num_layers}, {"hidden_dim", c.hidden_dim},
          {"dropout", c.dropout},          {"learning_rate", c.learning_rate},
          {"max_epochs", c.max_epochs},    {"patience", c.patience},     {"seed", c.seed}};
}

GnnConfig gnn_config_from_json(const nlohmann::json& j) {
  GnnConfig c;
  try {
    c.arch = parse_arch(j.at("arch").get<std::string>());
    c.num_layers = j.at("num_layers").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.dropout = j.at("dropout").get<float>();
    c.learning_rate = j.at("learning_rate").get<float>();
    c.max_epochs = j.at("max_epochs").get<std::size_t>();
    c.patience = j.at("patience").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("gnn config: ") + e.what());
  }
  c.validate();
  return c;
}

void save_checkpoint(const GnnModel& model, const std::filesystem::path& path, const nlohmann::json& metrics) {
  const auto& c = model.config();
  std::string out(kMagic, sizeof(kMagic));
  put_u32_le(out, c.arch == GnnArch::gcn ? 0u : 1u);
  put_u64_le(out, c.num_layers);
  put_u64_le(out, model.input_dim());
  put_u64_le(out, c.hidden_dim);
  put_u64_le(out, model.num_classes());
  auto put = [&](const DenseMatrix& m) {
    put_u64_le(out, m.rows());
    put_u64_le(out, m.cols());
    for (const float v : m.data()) put_f32_le(out, v);
  };
  for (const auto& l : model.layers()) {
    put(l.weight.value);
    if (c.arch == GnnArch::sage) {
      put(l.neighbor_weight.value);
      put(l.bias.value);
    }
  }
  write_file_atomic(path, out);
  const nlohmann::json meta = {{"config", to_json(c)},
                               {"input_dim", model.input_dim()},
                               {"num_classes", model.num_classes()},
                               {"metrics", metrics}};
  write_file_atomic(sidecar(path), meta.dump(2) + "\n");
}

GnnModel load_checkpoint(const std::filesystem::path& path) {
  ByteReader in(read_file(path), path.string());
  if (in.raw(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    throw ConfigError(path.string() + ": not a TAPEGNN1 checkpoint");
  const std::uint32_t arch = in.u32();
  const std::uint64_t layers = in.u64(), input_dim = in.u64(), hidden = in.u64(), classes = in.u64();
  if (arch > 1) throw ConfigError(path.string() + ": unknown arch tag");

  GnnConfig c;
  const auto side = sidecar(path);
  if (std::filesystem::exists(side)) {
    try {
      c = gnn_config_from_json(nlohmann::json::parse(read_file(side)).at("config"));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(side.string() + ": " + e.what());
    }
  }
  c.arch = arch == 0 ? GnnArch::gcn : GnnArch::sage;
  c.num_layers = layers;
  c.hidden_dim = hidden;
  GnnModel model(c, input_dim, classes);
  auto read = [&](Parameter& p) {
    const std::uint64_t r = in.u64(), cols = in.u64();
    if (r != p.value.rows() || cols != p.value.cols())
      throw ConfigError(path.string() + ": parameter " + p.name + " has the wrong shape");
    for (float& v : p.value.data()) v = in.f32();
  };
  for (auto& l : model.layers()) {
    read(l.weight);
    if (c.arch == GnnArch::sage) {
      read(l.neighbor_weight);
      read(l.bias);
    }
  }
  if (!in.at_end()) throw ConfigError(path.string() + ": trailing bytes after the last parameter");
  return model;
}

}  // namespace tape
