#include "tape/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>

#include "tape/error.hpp"
#include "tape/hash.hpp"
#include "tape/io.hpp"

namespace tape {
namespace {

using json = nlohmann::json;

const json& defaults() {
  static const json d = [] {
    const LlmConfig llm;
    const TfidfConfig tfidf;
    const InterpreterConfig interp;
    const PredFeatureConfig pred;
    const GnnConfig gnn;
    json t;
    t["dataset"] = {{"dir", ""},
                    {"edges", ""},
                    {"texts", ""},
                    {"labels", ""},
                    {"splits", ""},
                    {"label_space", ""},
                    {"template", ""},
                    {"abstract_budget", 6000}};
    t["llm"] = {{"endpoint_url", llm.endpoint_url},
                {"model_name", llm.model_name},
                {"temperature", llm.temperature},
                {"max_output_tokens", llm.max_output_tokens},
                {"max_in_flight", llm.max_in_flight},
                {"retry_limit", llm.retry_limit},
                {"timeout_ms", llm.timeout.count()},
                {"backoff_ms", llm.backoff_base.count()},
                {"api_key_env", llm.api_key_env},
                {"repair_cache", false}};
    t["mock"] = {{"enabled", false}, {"accuracy", 0.735}};
    t["encoder"] = {{"max_features", tfidf.max_features},
                    {"min_df", tfidf.min_df},
                    {"min_token_length", tfidf.min_token_length},
                    {"dim", tfidf.dim},
                    {"hidden_dim", interp.hidden_dim},
                    {"learning_rate", static_cast<double>(interp.learning_rate)},
                    {"epochs", interp.epochs},
                    {"patience", interp.patience},
                    {"dropout", static_cast<double>(interp.dropout)}};
    // k = 0 takes the template's expected_k.
    t["pred"] = {{"k", 0}, {"d_p", pred.d_p}, {"projection", "gaussian"}};
    t["gnn"] = {{"arch", std::string(to_string(gnn.arch))},
                {"num_layers", gnn.num_layers},
                {"hidden_dim", gnn.hidden_dim},
                {"dropout", gnn.dropout},
                {"learning_rate", gnn.learning_rate},
                {"max_epochs", gnn.max_epochs},
                {"patience", gnn.patience}};
    t["experiment"] = {{"seeds", json::array({0, 1, 2, 3})},
                       {"sources", json::array({"orig", "expl", "pred"})},
                       {"ensemble", "logits"},
                       {"parallel", true},
                       {"out", "runs/default"}};
    t["sweep"] = {{"family", "ogbn-arxiv"}, {"sample_size", 200}};
    return t;
  }();
  return d;
}

const std::vector<std::string>& section_order() {
  static const std::vector<std::string> order{"dataset", "llm", "mock", "encoder", "pred", "gnn", "experiment", "sweep"};
  return order;
}

std::pair<std::string, std::string> split_key(const std::string& dotted) {
  const auto dot = dotted.find('.');
  if (dot == std::string::npos || dotted.find('.', dot + 1) != std::string::npos)
    throw ConfigError("config key '" + dotted + "' must have the form section.key");
  return {dotted.substr(0, dot), dotted.substr(dot + 1)};
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number_float()) return b.is_number();
  if (a.is_number_integer()) return b.is_number_unsigned() || (b.is_number_integer() && b.get<std::int64_t>() >= 0);
  if (a.is_array()) {
    if (!b.is_array()) return false;
    for (const auto& v : b)
      if (!a.empty() && !same_kind(a[0], v)) return false;
    return true;
  }
  return a.type() == b.type();
}

std::string kind_name(const json& v) {
  if (v.is_number_float()) return "number";
  if (v.is_number()) return "non-negative integer";
  if (v.is_array()) return "array";
  return v.type_name();
}

class ValueParser {
 public:
  explicit ValueParser(std::string_view s) : s_(s) {}

  json parse_all() {
    json v = value();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("bad config value '" + std::string(s_) + "': " + what);
  }
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  json value() {
    skip_ws();
    if (pos_ == s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return string();
    if (c == '[') return array();
    if (s_.substr(pos_, 4) == "true") return pos_ += 4, json(true);
    if (s_.substr(pos_, 5) == "false") return pos_ += 5, json(false);
    return number();
  }
  json string() {
    std::string out;
    for (++pos_; pos_ < s_.size(); ++pos_) {
      const char c = s_[pos_];
      if (c == '"') return ++pos_, json(out);
      if (c != '\\') {
        out += c;
        continue;
      }
      if (++pos_ == s_.size()) break;
      switch (s_[pos_]) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: fail("unknown escape");
      }
    }
    fail("unterminated string");
  }
  json array() {
    json out = json::array();
    ++pos_;
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') return ++pos_, out;
    while (true) {
      out.push_back(value());
      skip_ws();
      if (pos_ == s_.size()) fail("unterminated array");
      if (s_[pos_] == ']') return ++pos_, out;
      if (s_[pos_] != ',') fail("expected ',' in array");
      ++pos_;
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ']') return ++pos_, out;  // trailing comma
    }
  }
  json number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                                s_[pos_] == '-' || s_[pos_] == '+' || s_[pos_] == '_'))
      ++pos_;
    std::string tok(s_.substr(start, pos_ - start));
    std::erase(tok, '_');
    if (tok.empty()) fail("expected a value");
    const bool is_float = tok.find_first_of(".eE") != std::string::npos;
    const char* b = tok.data();
    const char* e = b + tok.size();
    if (!is_float) {
      if (tok[0] == '-') {
        std::int64_t v = 0;
        if (std::from_chars(b, e, v).ptr == e) return v;
      } else {
        std::uint64_t v = 0;
        if (std::from_chars(b + (tok[0] == '+'), e, v).ptr == e) return v;
      }
      fail("not a number");
    }
    double v = 0.0;
    if (std::from_chars(b + (tok[0] == '+'), e, v).ptr != e) fail("not a number");
    return v;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

std::string render_value(const json& v) {
  if (v.is_string()) return v.dump();
  if (v.is_number_float()) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v.get<double>());
    std::string s = buf;
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
  }
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + render_value(v[i]);
    return out + "]";
  }
  return v.dump();
}

std::string strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && in_string) {
      ++i;
      continue;
    }
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

}  // namespace

json parse_config_value(std::string_view text) { return ValueParser(trim(text)).parse_all(); }

json parse_config_text(std::string_view text, const std::string& name) {
  json table = json::object();
  std::string section;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line(trim(strip_comment(lines[i])));
    if (line.empty()) continue;
    try {
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("unterminated section header");
        section = std::string(trim(std::string_view(line).substr(1, line.size() - 2)));
        if (section.empty()) throw ConfigError("empty section name");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("expected key = value");
      if (section.empty()) throw ConfigError("key outside any [section]");
      const std::string key(trim(std::string_view(line).substr(0, eq)));
      if (key.empty()) throw ConfigError("empty key");
      if (table[section].contains(key)) throw ConfigError("duplicate key '" + section + "." + key + "'");
      table[section][key] = parse_config_value(std::string_view(line).substr(eq + 1));
    } catch (const ParseError&) {
      throw;
    } catch (const ConfigError& e) {
      throw ParseError(name, i + 1, e.what());
    }
  }
  return table;
}

std::string render_config(const json& table) {
  std::string out;
  std::vector<std::string> sections = section_order();
  for (const auto& [name, _] : table.items())
    if (std::find(sections.begin(), sections.end(), name) == sections.end()) sections.push_back(name);
  for (const auto& s : sections) {
    if (!table.contains(s)) continue;
    out += (out.empty() ? "[" : "\n[") + s + "]\n";
    for (const auto& [k, v] : table.at(s).items()) out += k + " = " + render_value(v) + "\n";
  }
  return out;
}

RunConfig::RunConfig() : table_(defaults()) {}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  RunConfig cfg;
  const json file = parse_config_text(read_file(path), path.string());
  for (const auto& [section, entries] : file.items())
    for (const auto& [key, value] : entries.items()) cfg.set(section + "." + key, value);
  // Relative dataset paths resolve against the config file's directory.
  const auto base = path.parent_path();
  for (const char* k : {"dir", "edges", "texts", "labels", "splits", "label_space"}) {
    auto& v = cfg.table_["dataset"][k];
    const std::string p = v.get<std::string>();
    if (!p.empty() && std::filesystem::path(p).is_relative()) v = (base / p).lexically_normal().string();
  }
  const std::string tmpl = cfg.template_spec();
  if (tmpl.ends_with(".json") && std::filesystem::path(tmpl).is_relative())
    cfg.table_["dataset"]["template"] = (base / tmpl).lexically_normal().string();
  return cfg;
}

void RunConfig::set(const std::string& dotted_key, const json& value) {
  const auto [section, key] = split_key(dotted_key);
  const auto& d = defaults();
  if (!d.contains(section) || !d.at(section).contains(key))
    throw ConfigError("unknown config key '" + dotted_key + "'");
  const json& proto = d.at(section).at(key);
  if (!same_kind(proto, value))
    throw ConfigError("config key '" + dotted_key + "' expects " + kind_name(proto) + ", got " + value.dump());
  json v = value;
  if (proto.is_number_float()) v = value.get<double>();
  table_[section][key] = std::move(v);
}

void RunConfig::set_text(const std::string& dotted_key, std::string_view text) {
  const auto [section, key] = split_key(dotted_key);
  const auto& d = defaults();
  const bool wants_string = d.contains(section) && d.at(section).contains(key) && d.at(section).at(key).is_string();
  const auto t = trim(text);
  if (wants_string && !t.starts_with('"')) return set(dotted_key, json(std::string(t)));
  // Bare comma lists are accepted for arrays: --seed 0,1,2.
  if (d.contains(section) && d.at(section).contains(key) && d.at(section).at(key).is_array() && !t.starts_with('[')) {
    const bool strings = d.at(section).at(key).at(0).is_string();
    json arr = json::array();
    std::size_t start = 0;
    while (start <= t.size()) {
      const auto comma = t.find(',', start);
      const auto item = trim(t.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (item.empty()) throw ConfigError("config key '" + dotted_key + "': empty list item");
      arr.push_back(strings ? json(std::string(item)) : parse_config_value(item));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return set(dotted_key, arr);
  }
  set(dotted_key, parse_config_value(t));
}

const json& RunConfig::get(const std::string& dotted_key) const {
  const auto [section, key] = split_key(dotted_key);
  if (!table_.contains(section) || !table_.at(section).contains(key))
    throw ConfigError("unknown config key '" + dotted_key + "'");
  return table_.at(section).at(key);
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& s : section_order())
    for (const auto& [k, _] : defaults().at(s).items()) out.push_back(s + "." + k);
  return out;
}

std::string RunConfig::hash() const {
  json t = table_;
  t["experiment"].erase("out");
  return hash_hex(t.dump());
}

DatasetPaths RunConfig::dataset_paths() const {
  const auto str = [&](const char* k) { return get(std::string("dataset.") + k).get<std::string>(); };
  DatasetPaths p;
  if (!str("dir").empty()) p = DatasetPaths::in_directory(str("dir"));
  if (!str("edges").empty()) p.edges = str("edges");
  if (!str("texts").empty()) p.texts = str("texts");
  if (!str("labels").empty()) p.labels = str("labels");
  if (!str("splits").empty()) p.splits = str("splits");
  if (!str("label_space").empty()) p.label_space = str("label_space");
  if (p.edges.empty() || p.texts.empty() || p.labels.empty())
    throw ConfigError("dataset: set dataset.dir or all of dataset.edges, dataset.texts, dataset.labels");
  for (const auto* f : {&p.edges, &p.texts, &p.labels})
    if (!std::filesystem::exists(*f)) throw ConfigError("dataset file not found: " + f->string());
  for (const auto* f : {&p.splits, &p.label_space})
    if (f->has_value() && !std::filesystem::exists(**f)) throw ConfigError("dataset file not found: " + (*f)->string());
  return p;
}

LlmConfig RunConfig::llm() const {
  LlmConfig c;
  c.endpoint_url = get("llm.endpoint_url").get<std::string>();
  c.model_name = get("llm.model_name").get<std::string>();
  c.temperature = get("llm.temperature").get<double>();
  c.max_output_tokens = get("llm.max_output_tokens").get<std::size_t>();
  c.max_in_flight = get("llm.max_in_flight").get<std::size_t>();
  c.retry_limit = get("llm.retry_limit").get<std::size_t>();
  c.timeout = std::chrono::milliseconds(get("llm.timeout_ms").get<std::int64_t>());
  c.backoff_base = std::chrono::milliseconds(get("llm.backoff_ms").get<std::int64_t>());
  c.api_key_env = get("llm.api_key_env").get<std::string>();
  return c;
}

FeatureBuildConfig RunConfig::features() const {
  FeatureBuildConfig f;
  f.tfidf.max_features = get("encoder.max_features").get<std::size_t>();
  f.tfidf.min_df = get("encoder.min_df").get<std::size_t>();
  f.tfidf.min_token_length = get("encoder.min_token_length").get<std::size_t>();
  f.tfidf.dim = get("encoder.dim").get<std::size_t>();
  f.interpreter.hidden_dim = get("encoder.hidden_dim").get<std::size_t>();
  f.interpreter.learning_rate = get("encoder.learning_rate").get<float>();
  f.interpreter.epochs = get("encoder.epochs").get<std::size_t>();
  f.interpreter.patience = get("encoder.patience").get<std::size_t>();
  f.interpreter.dropout = get("encoder.dropout").get<float>();
  f.pred.k = get("pred.k").get<std::size_t>();
  f.pred.d_p = get("pred.d_p").get<std::size_t>();
  const auto proj = get("pred.projection").get<std::string>();
  if (proj == "gaussian") f.pred.projection = PredProjection::gaussian;
  else if (proj == "identity") f.pred.projection = PredProjection::identity;
  else if (proj == "learnable") f.pred.projection = PredProjection::learnable;
  else throw ConfigError("pred.projection must be gaussian, identity or learnable, got '" + proj + "'");
  f.seed = seeds().front();
  f.parallel = get("experiment.parallel").get<bool>();
  return f;
}

GnnConfig RunConfig::gnn() const {
  GnnConfig g;
  g.arch = parse_arch(get("gnn.arch").get<std::string>());
  g.num_layers = get("gnn.num_layers").get<std::size_t>();
  g.hidden_dim = get("gnn.hidden_dim").get<std::size_t>();
  g.dropout = get("gnn.dropout").get<double>();
  g.learning_rate = get("gnn.learning_rate").get<double>();
  g.max_epochs = get("gnn.max_epochs").get<std::size_t>();
  g.patience = get("gnn.patience").get<std::size_t>();
  return g;
}

std::vector<std::uint64_t> RunConfig::seeds() const {
  auto s = get("experiment.seeds").get<std::vector<std::uint64_t>>();
  if (s.empty()) throw ConfigError("experiment.seeds must not be empty");
  return s;
}

ExperimentSpec RunConfig::experiment() const {
  ExperimentSpec e;
  e.gnn = gnn();
  e.seeds = seeds();
  e.sources = get("experiment.sources").get<std::vector<std::string>>();
  e.mode = parse_ensemble_mode(get("experiment.ensemble").get<std::string>());
  e.parallel = get("experiment.parallel").get<bool>();
  e.config_hash = hash();
  return e;
}

void RunConfig::validate() const {
  llm().validate();
  gnn().validate();
  (void)features();
  const auto e = experiment();
  if (e.sources.empty()) throw ConfigError("experiment.sources must not be empty");
  for (const auto& s : e.sources)
    if (s != "orig" && s != "expl" && s != "pred")
      throw ConfigError("experiment.sources: unknown source '" + s + "' (expected orig, expl, pred)");
  const double p = mock_accuracy();
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("mock.accuracy must be in [0, 1]");
  if (out_dir().empty()) throw ConfigError("experiment.out must not be empty");
}

}  // namespace tape
