#include "tape/text_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <unordered_map>

#include "tape/adam.hpp"
#include "tape/error.hpp"
#include "tape/hash.hpp"
#include "tape/nn.hpp"
#include "tape/ops.hpp"
#include "tape/rng.hpp"

namespace tape {
namespace {

bool is_alnum(char c) noexcept {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

constexpr std::uint64_t kProjectionStream = 0x70726f6a;  // "proj"

}  // namespace

std::vector<std::string> tokenize(std::string_view text, std::size_t min_token_length) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= min_token_length && !cur.empty()) out.push_back(cur);
    cur.clear();
  };
  for (const char c : text) {
    if (is_alnum(c)) {
      cur += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
    } else {
      flush();
    }
  }
  flush();
  return out;
}

TfidfModel TfidfModel::fit(const std::vector<std::string>& corpus, const TfidfConfig& config) {
  if (corpus.empty()) throw ConfigError("tfidf: empty corpus");
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& doc : corpus) {
    auto tokens = tokenize(doc, config.min_token_length);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    for (auto& t : tokens) ++df[std::move(t)];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [term, count] : df)
    if (count >= config.min_df) kept.emplace_back(term, count);
  if (kept.size() > config.max_features) {
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    kept.resize(config.max_features);
  }
  if (kept.empty()) throw ConfigError("tfidf: vocabulary is empty after min_df/max_features filtering");
  std::sort(kept.begin(), kept.end());

  TfidfModel m;
  m.config_ = config;
  const double n_docs = static_cast<double>(corpus.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    m.vocabulary_.emplace(kept[i].first, i);
    m.idf_.push_back(std::log((1.0 + n_docs) / (1.0 + static_cast<double>(kept[i].second))) + 1.0);
  }
  if (config.dim > 0) {
    m.projection_ = DenseMatrix(kept.size(), config.dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(config.dim));
    for (std::size_t i = 0; i < kept.size(); ++i) {
      // Keyed by the term, so a term's row does not depend on its neighbours.
      const std::uint64_t key = mix_key(config.seed, kProjectionStream, fnv1a64(kept[i].first));
      auto row = m.projection_.row(i);
      for (std::size_t j = 0; j < config.dim; ++j) row[j] = static_cast<float>(counter_normal(key, j) * scale);
    }
  }
  return m;
}

std::vector<std::pair<std::size_t, double>> TfidfModel::weights(std::string_view text) const {
  std::map<std::size_t, double> tf;
  for (const auto& t : tokenize(text, config_.min_token_length))
    if (const auto it = vocabulary_.find(t); it != vocabulary_.end()) tf[it->second] += 1.0;
  std::vector<std::pair<std::size_t, double>> out;
  double norm2 = 0.0;
  for (const auto& [col, count] : tf) {
    const double w = count * idf_[col];
    out.emplace_back(col, w);
    norm2 += w * w;
  }
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& p : out) p.second *= inv;
  }
  return out;
}

std::size_t TfidfModel::output_dim() const noexcept {
  return config_.dim > 0 ? config_.dim : vocabulary_.size();
}

std::vector<float> TfidfModel::encode(std::string_view text) const {
  const auto w = weights(text);
  std::vector<float> out(output_dim(), 0.0f);
  if (config_.dim == 0) {
    for (const auto& [col, v] : w) out[col] = static_cast<float>(v);
    return out;
  }
  std::vector<double> acc(config_.dim, 0.0);
  for (const auto& [col, v] : w) {
    const auto row = projection_.row(col);
    for (std::size_t j = 0; j < config_.dim; ++j) acc[j] += v * static_cast<double>(row[j]);
  }
  for (std::size_t j = 0; j < config_.dim; ++j) out[j] = static_cast<float>(acc[j]);
  return out;
}

DenseMatrix TfidfModel::encode_all(const std::vector<std::string>& texts) const {
  DenseMatrix out(texts.size(), output_dim());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto v = encode(texts[i]);
    std::copy(v.begin(), v.end(), out.row(i).begin());
  }
  return out;
}

InterpreterModel InterpreterModel::init(std::size_t input_dim, std::size_t hidden_dim,
                                        std::size_t num_classes, std::uint64_t seed) {
  InterpreterModel m;
  m.w1 = Parameter("w1", glorot_uniform(input_dim, hidden_dim, mix_key(seed, 1)));
  m.b1 = Parameter("b1", DenseMatrix(1, hidden_dim));
  m.w2 = Parameter("w2", glorot_uniform(hidden_dim, num_classes, mix_key(seed, 2)));
  m.b2 = Parameter("b2", DenseMatrix(1, num_classes));
  return m;
}

namespace {

Var mlp_forward(GradTape& tape, InterpreterModel& m, Var x, float dropout, std::uint64_t seed,
                std::size_t epoch, bool train) {
  const Var h = tape.relu(tape.add_bias(tape.matmul(x, tape.parameter(m.w1)), tape.parameter(m.b1)));
  const Var hd = tape.dropout(h, dropout, {seed, epoch, 1}, train);
  return tape.add_bias(tape.matmul(hd, tape.parameter(m.w2)), tape.parameter(m.b2));
}

DenseMatrix affine(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& b) {
  DenseMatrix y = matmul(x, w);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < y.cols(); ++c) row[c] += b(0, c);
  }
  return y;
}

}  // namespace

DenseMatrix InterpreterModel::logits(const DenseMatrix& features) const {
  return affine(extract_features(*this, features), w2.value, b2.value);
}

DenseMatrix extract_features(const InterpreterModel& model, const DenseMatrix& features) {
  if (features.cols() != model.input_dim())
    throw ShapeError("extract_features: expected width " + std::to_string(model.input_dim()) + ", got " +
                     std::to_string(features.cols()));
  DenseMatrix h = affine(features, model.w1.value, model.b1.value);
  for (float& v : h.data()) v = std::max(v, 0.0f);
  return h;
}

InterpreterModel train_interpreter(const DenseMatrix& features, std::span<const int> labels,
                                   std::span<const std::size_t> train,
                                   std::span<const std::size_t> val,
                                   const InterpreterConfig& config, InterpreterHistory* history) {
  if (train.empty()) throw ConfigError("train_interpreter: empty train mask");
  if (labels.size() != features.rows()) throw ShapeError("train_interpreter: labels/features row mismatch");
  require_finite(features, "interpreter features");
  int max_label = -1;
  for (const int y : labels) max_label = std::max(max_label, y);
  for (const auto i : train)
    if (labels[i] < 0) throw ConfigError("train_interpreter: train node " + std::to_string(i) + " is unlabeled");
  const std::size_t num_classes = std::max<std::size_t>(static_cast<std::size_t>(max_label) + 1, 2);

  // Only train rows enter the loss, so the forward pass runs on them alone.
  const DenseMatrix x_train = gather_rows(features, train);
  std::vector<int> y_train;
  std::vector<std::size_t> rows(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    y_train.push_back(labels[train[i]]);
    rows[i] = i;
  }
  const std::span<const std::size_t> monitor = val.empty() ? train : val;

  InterpreterModel model = InterpreterModel::init(features.cols(), config.hidden_dim, num_classes, config.seed);
  std::vector<Parameter*> params{&model.w1, &model.b1, &model.w2, &model.b2};
  Adam adam(params, {config.learning_rate});
  EarlyStopper stopper(config.patience, false);
  InterpreterModel best = model;
  InterpreterHistory hist;

  const DenseMatrix x_monitor = gather_rows(features, monitor);
  std::vector<int> y_monitor;
  std::vector<std::size_t> monitor_rows(monitor.size());
  for (std::size_t i = 0; i < monitor.size(); ++i) {
    y_monitor.push_back(labels[monitor[i]]);
    monitor_rows[i] = i;
  }

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss = 0.0;
    try {
      GradTape tape;
      const Var logits = mlp_forward(tape, model, tape.constant_view(x_train), config.dropout, config.seed, epoch, true);
      const Var l = tape.nll_loss(tape.log_softmax(logits), y_train, rows);
      loss = tape.value(l)(0, 0);
      tape.backward(l);
    } catch (const NumericError& e) {
      throw NumericError("interpreter epoch " + std::to_string(epoch) + " (learning rate " +
                         std::to_string(config.learning_rate) + "): " + e.what());
    }
    adam.step();
    const double val_loss = masked_cross_entropy(model.logits(x_monitor), y_monitor, monitor_rows);
    if (!std::isfinite(val_loss))
      throw NumericError("interpreter epoch " + std::to_string(epoch) + " (learning rate " +
                         std::to_string(config.learning_rate) + "): validation loss is not finite");
    hist.train_loss.push_back(loss);
    hist.val_loss.push_back(val_loss);
    if (stopper.observe(epoch, val_loss)) best = model;
    if (stopper.should_stop(epoch)) break;
  }
  hist.best_epoch = stopper.best_epoch();
  if (history != nullptr) *history = std::move(hist);
  return best;
}

DenseMatrix embed_remote(const std::vector<std::string>& texts, const EmbeddingConfig& embedding,
                         const LlmConfig& retry, Transport& transport, ResponseCache& cache) {
  using json = nlohmann::json;
  if (embedding.batch_size < 1) throw ConfigError("embedding batch_size must be >= 1");
  std::vector<std::vector<float>> rows(texts.size());
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (const auto hit = cache.lookup("embed", hash_hex(texts[i]), embedding.model_name))
      rows[i] = json::parse(*hit).get<std::vector<float>>();
    else
      missing.push_back(i);
  }
  for (std::size_t start = 0; start < missing.size(); start += embedding.batch_size) {
    const std::size_t end = std::min(missing.size(), start + embedding.batch_size);
    json input = json::array();
    for (std::size_t j = start; j < end; ++j) input.push_back(texts[missing[j]]);
    const std::string body =
        json{{"model", embedding.model_name}, {"input", std::move(input)}}.dump(-1, ' ', false, json::error_handler_t::replace);
    HttpResponse res;
    for (std::size_t attempt = 0;; ++attempt) {
      try {
        res = transport.post(body);
      } catch (const TransportError&) {
        if (attempt >= retry.retry_limit) throw;
        continue;
      }
      if (res.status >= 200 && res.status < 300) break;
      if (attempt >= retry.retry_limit || !is_transient_status(res.status)) throw StatusError(res.status, res.body);
    }
    try {
      const json doc = json::parse(res.body);
      const auto& data = doc.at("data");
      if (data.size() != end - start) throw FormatError("embedding response has the wrong number of rows");
      for (std::size_t j = start; j < end; ++j) {
        const auto& e = data.at(j - start).at("embedding");
        rows[missing[j]] = e.get<std::vector<float>>();
        cache.append({"embed", hash_hex(texts[missing[j]]), e.dump(), embedding.model_name, 0});
      }
    } catch (const json::exception& e) {
      throw FormatError(std::string("unexpected embedding response: ") + e.what());
    }
  }
  const std::size_t dim = rows.empty() ? 0 : rows[0].size();
  DenseMatrix out(texts.size(), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim) throw FormatError("embedding widths differ across texts");
    std::copy(rows[i].begin(), rows[i].end(), out.row(i).begin());
  }
  require_finite(out, "remote embeddings");
  return out;
}

}  // namespace tape
