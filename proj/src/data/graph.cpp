#include "tape/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "tape/error.hpp"
#include "tape/io.hpp"
#include "tape/rng.hpp"

namespace tape {

using nlohmann::json;

LabelSpace::LabelSpace(std::vector<LabelClass> classes) : classes_(std::move(classes)) {
  if (classes_.size() < 2) throw ConfigError("label space needs at least 2 classes");
  std::set<std::string> names;
  std::map<std::string, std::size_t> forms;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    auto& cls = classes_[i];
    if (!names.insert(cls.name).second) throw ConfigError("duplicate class name: " + cls.name);
    if (cls.match.empty()) cls.match.push_back(to_lower_ascii(cls.name));
    for (auto& form : cls.match) {
      form = to_lower_ascii(form);
      const auto [it, inserted] = forms.emplace(form, i);
      if (!inserted && it->second != i)
        throw ConfigError("match form '" + form + "' used by two classes");
    }
  }
}

LabelSpace LabelSpace::from_names(const std::vector<std::string>& names) {
  std::vector<LabelClass> classes;
  classes.reserve(names.size());
  for (const auto& n : names) classes.push_back({n, {to_lower_ascii(n)}});
  return LabelSpace(std::move(classes));
}

std::optional<std::size_t> LabelSpace::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < classes_.size(); ++i)
    if (classes_[i].name == name) return i;
  return std::nullopt;
}

LabelSpace cora_label_space() {
  return LabelSpace({
      {"Case Based", {"case based", "case_based", "case-based"}},
      {"Genetic Algorithms", {"genetic algorithms", "genetic_algorithms", "genetic algorithm"}},
      {"Neural Networks", {"neural networks", "neural_networks", "neural network"}},
      {"Probabilistic Methods",
       {"probabilistic methods", "probabilistic_methods", "probabilistic method"}},
      {"Reinforcement Learning", {"reinforcement learning", "reinforcement_learning"}},
      {"Rule Learning", {"rule learning", "rule_learning"}},
      {"Theory", {"theory"}},
  });
}

LabelSpace pubmed_label_space() {
  return LabelSpace({
      {"Experimentally induced diabetes",
       {"experimentally induced diabetes", "experimental induced diabetes"}},
      {"Type 1 diabetes", {"type 1 diabetes"}},
      {"Type 2 diabetes", {"type 2 diabetes"}},
  });
}

LabelSpace arxiv_label_space() {
  static const char* const kCodes[] = {
      "AI", "AR", "CC", "CE", "CG", "CL", "CR", "CV", "CY", "DB", "DC", "DL", "DM", "DS",
      "ET", "FL", "GL", "GR", "GT", "HC", "IR", "IT", "LG", "LO", "MA", "MM", "MS", "NA",
      "NE", "NI", "OH", "OS", "PF", "PL", "RO", "SC", "SD", "SE", "SI", "SY"};
  std::vector<LabelClass> classes;
  for (const char* code : kCodes) {
    const std::string name = std::string("cs.") + code;
    classes.push_back({name, {to_lower_ascii(name)}});
  }
  return LabelSpace(std::move(classes));
}

std::vector<std::size_t> TextAttributedGraph::labeled_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != kUnlabeled) out.push_back(i);
  return out;
}

void TextAttributedGraph::validate() const {
  if (adjacency.rows() != num_nodes || adjacency.cols() != num_nodes)
    throw ConfigError("graph: adjacency shape does not match num_nodes");
  adjacency.validate();
  if (!adjacency.is_symmetric_pattern()) throw ConfigError("graph: adjacency is not symmetric");
  if (texts.size() != num_nodes) throw ConfigError("graph: text count != num_nodes");
  if (labels.size() != num_nodes) throw ConfigError("graph: label count != num_nodes");
  std::unordered_set<std::string> ids;
  for (const auto& t : texts)
    if (!ids.insert(t.node_id).second) throw ConfigError("graph: duplicate node id " + t.node_id);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    const int y = labels[i];
    if (y != kUnlabeled && (y < 0 || static_cast<std::size_t>(y) >= num_classes()))
      throw ConfigError("graph: node " + std::to_string(i) + " has label out of range");
  }
  std::vector<int> owner(num_nodes, -1);
  const std::vector<std::size_t>* parts[] = {&splits.train, &splits.val, &splits.test};
  for (int p = 0; p < 3; ++p) {
    for (const std::size_t i : *parts[p]) {
      if (i >= num_nodes) throw ConfigError("graph: split index out of range");
      if (owner[i] != -1) throw ConfigError("graph: splits overlap at node " + texts[i].node_id);
      if (labels[i] == kUnlabeled)
        throw ConfigError("graph: unlabeled node " + texts[i].node_id + " in a split");
      owner[i] = p;
    }
  }
}

SparseCsr symmetrize_edges(std::size_t num_nodes,
                           const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<Triplet> t;
  t.reserve(edges.size() * 2);
  for (const auto& [u, v] : edges) {
    t.push_back({u, v, 1.0f});
    if (u != v) t.push_back({v, u, 1.0f});
  }
  std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  t.erase(std::unique(t.begin(), t.end(),
                      [](const Triplet& a, const Triplet& b) { return a.row == b.row && a.col == b.col; }),
          t.end());
  return SparseCsr::from_triplets(num_nodes, num_nodes, std::move(t));
}

SparseCsr symmetrize(const SparseCsr& a) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (const auto c : a.row_indices(r)) edges.emplace_back(r, c);
  return symmetrize_edges(a.rows(), edges);
}

DatasetPaths DatasetPaths::in_directory(const std::filesystem::path& dir) {
  DatasetPaths p;
  p.edges = dir / "edges.tsv";
  p.texts = dir / "texts.jsonl";
  p.labels = dir / "labels.csv";
  if (std::filesystem::exists(dir / "splits.json")) p.splits = dir / "splits.json";
  if (std::filesystem::exists(dir / "label_space.json")) p.label_space = dir / "label_space.json";
  return p;
}

LabelSpace load_label_space(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw ConfigError(path.string() + ": expected a JSON list of classes");
  std::vector<LabelClass> classes;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("name") || !item["name"].is_string())
      throw ConfigError(path.string() + ": every class needs a string \"name\"");
    LabelClass cls{item["name"].get<std::string>(), {}};
    if (item.contains("match")) cls.match = item["match"].get<std::vector<std::string>>();
    classes.push_back(std::move(cls));
  }
  return LabelSpace(std::move(classes));
}

namespace {

std::string json_string_field(const json& obj, const char* key, const std::string& file,
                              std::size_t line) {
  if (!obj.contains(key)) throw ParseError(file, line, std::string("missing field \"") + key + "\"");
  const auto& v = obj[key];
  if (v.is_string()) return v.get<std::string>();
  if (std::string(key) == "id" && v.is_number_integer()) return std::to_string(v.get<long long>());
  throw ParseError(file, line, std::string("field \"") + key + "\" must be a string");
}

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == '\t' || line[i] == ' ')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != '\t' && line[j] != ' ') ++j;
    out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      out.push_back(s[i]);
      if (s[i] == '"' && s[i + 1] == '"') ++i;
    }
    return out;
  }
  return std::string(s);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

TextAttributedGraph load_tag_dataset(const DatasetPaths& paths) {
  TextAttributedGraph g;
  std::unordered_map<std::string, std::size_t> index;

  {
    const std::string file = paths.texts.string();
    const auto lines = split_lines(read_file(paths.texts));
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      if (trim(lines[ln]).empty()) continue;
      json obj;
      try {
        obj = json::parse(lines[ln]);
      } catch (const json::parse_error& e) {
        throw ParseError(file, ln + 1, std::string("invalid JSON: ") + e.what());
      }
      if (!obj.is_object()) throw ParseError(file, ln + 1, "expected a JSON object");
      NodeText t{json_string_field(obj, "id", file, ln + 1),
                 json_string_field(obj, "title", file, ln + 1),
                 json_string_field(obj, "abstract", file, ln + 1)};
      if (!index.emplace(t.node_id, g.texts.size()).second)
        throw ParseError(file, ln + 1, "duplicate node id " + t.node_id);
      g.texts.push_back(std::move(t));
    }
  }
  g.num_nodes = g.texts.size();

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  {
    const std::string file = paths.edges.string();
    const auto lines = split_lines(read_file(paths.edges));
    std::set<std::string> missing;
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      const std::string_view line = trim(lines[ln]);
      if (line.empty() || line.front() == '#') continue;
      const auto fields = split_fields(line);
      if (fields.size() != 2) throw ParseError(file, ln + 1, "expected 'src<TAB>dst'");
      const auto u = index.find(fields[0]);
      const auto v = index.find(fields[1]);
      if (u == index.end()) missing.insert(fields[0]);
      if (v == index.end()) missing.insert(fields[1]);
      if (u != index.end() && v != index.end()) edges.emplace_back(u->second, v->second);
    }
    if (!missing.empty()) {
      std::string list;
      for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
      throw ConfigError(file + ": node ids referenced in edges but missing text: " + list);
    }
  }
  g.adjacency = symmetrize_edges(g.num_nodes, edges);

  std::vector<std::pair<std::size_t, std::string>> raw_labels;
  {
    const std::string file = paths.labels.string();
    const auto lines = split_lines(read_file(paths.labels));
    std::size_t ln = 0;
    while (ln < lines.size() && trim(lines[ln]).empty()) ++ln;
    if (ln == lines.size() || trim(lines[ln]) != "id,label")
      throw ParseError(file, ln + 1, "expected header 'id,label'");
    for (++ln; ln < lines.size(); ++ln) {
      const std::string_view line = trim(lines[ln]);
      if (line.empty()) continue;
      const std::size_t comma = line.find(',');
      if (comma == std::string_view::npos) throw ParseError(file, ln + 1, "expected 'id,label'");
      const std::string id = unquote(line.substr(0, comma));
      const auto it = index.find(id);
      if (it == index.end()) throw ParseError(file, ln + 1, "unknown node id " + id);
      raw_labels.emplace_back(it->second, unquote(line.substr(comma + 1)));
    }
  }

  if (paths.label_space) {
    g.label_space = load_label_space(*paths.label_space);
  } else {
    std::set<std::string> names;
    for (const auto& [_, name] : raw_labels)
      if (!name.empty()) names.insert(name);
    g.label_space = LabelSpace::from_names({names.begin(), names.end()});
  }

  g.labels.assign(g.num_nodes, kUnlabeled);
  for (const auto& [node, name] : raw_labels) {
    if (name.empty()) continue;
    const auto cls = g.label_space.index_of(name);
    if (!cls) throw ConfigError(paths.labels.string() + ": label '" + name + "' is not in the label space");
    g.labels[node] = static_cast<int>(*cls);
  }

  if (paths.splits) {
    json doc;
    try {
      doc = json::parse(read_file(*paths.splits));
    } catch (const json::parse_error& e) {
      throw ConfigError(paths.splits->string() + ": " + e.what());
    }
    const auto resolve = [&](const char* key) {
      std::vector<std::size_t> out;
      if (!doc.contains(key)) return out;
      for (const auto& v : doc[key]) {
        const std::string id = v.is_string() ? v.get<std::string>() : v.dump();
        const auto it = index.find(id);
        if (it == index.end())
          throw ConfigError(paths.splits->string() + ": unknown node id " + id);
        out.push_back(it->second);
      }
      std::sort(out.begin(), out.end());
      return out;
    };
    g.splits = {resolve("train"), resolve("val"), resolve("test")};
  }

  g.validate();
  return g;
}

void save_tag_dataset(const TextAttributedGraph& g, const std::filesystem::path& dir) {
  g.validate();
  std::filesystem::create_directories(dir);

  std::string edges = "# src\tdst (undirected, each pair listed once)\n";
  for (std::size_t r = 0; r < g.num_nodes; ++r)
    for (const auto c : g.adjacency.row_indices(r))
      if (c >= r) edges += g.texts[r].node_id + "\t" + g.texts[c].node_id + "\n";
  write_file_atomic(dir / "edges.tsv", edges);

  std::string texts;
  for (const auto& t : g.texts)
    texts += json{{"id", t.node_id}, {"title", t.title}, {"abstract", t.abstract}}.dump() + "\n";
  write_file_atomic(dir / "texts.jsonl", texts);

  std::string labels = "id,label\n";
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    if (g.labels[i] == kUnlabeled) continue;
    labels += csv_field(g.texts[i].node_id) + "," +
              csv_field(g.label_space[static_cast<std::size_t>(g.labels[i])].name) + "\n";
  }
  write_file_atomic(dir / "labels.csv", labels);

  json space = json::array();
  for (const auto& cls : g.label_space.classes()) space.push_back({{"name", cls.name}, {"match", cls.match}});
  write_file_atomic(dir / "label_space.json", space.dump(2) + "\n");

  if (!g.splits.empty()) {
    const auto ids = [&](const std::vector<std::size_t>& idx) {
      json arr = json::array();
      for (const auto i : idx) arr.push_back(g.texts[i].node_id);
      return arr;
    };
    write_file_atomic(dir / "splits.json",
                      json{{"train", ids(g.splits.train)}, {"val", ids(g.splits.val)}, {"test", ids(g.splits.test)}}
                              .dump() +
                          "\n");
  }

  json id_map = json::array();
  for (const auto& t : g.texts) id_map.push_back(t.node_id);
  const json manifest = {{"num_nodes", g.num_nodes},
                         {"num_classes", g.num_classes()},
                         {"nnz", g.adjacency.nnz()},
                         {"node_ids", id_map}};
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

SplitMask split_nodes(const TextAttributedGraph& g, SplitRatios ratios, std::uint64_t seed) {
  if (!(ratios.train > 0 && ratios.val > 0 && ratios.test > 0))
    throw ConfigError("split ratios must all be positive");
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw ConfigError("split ratios must sum to 1");
  std::vector<std::size_t> nodes = g.labeled_nodes();
  if (nodes.size() < 3) throw ConfigError("need at least 3 labeled nodes to split");
  Rng rng(mix_key(seed, 0x5b117ULL));
  rng.shuffle(nodes);
  const double n = static_cast<double>(nodes.size());
  const auto n_val = static_cast<std::size_t>(std::floor(n * ratios.val + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(n * ratios.test + 1e-9));
  const std::size_t n_train = nodes.size() - n_val - n_test;
  SplitMask m;
  m.train.assign(nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(n_train));
  m.val.assign(nodes.begin() + static_cast<std::ptrdiff_t>(n_train),
               nodes.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  m.test.assign(nodes.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), nodes.end());
  std::sort(m.train.begin(), m.train.end());
  std::sort(m.val.begin(), m.val.end());
  std::sort(m.test.begin(), m.test.end());
  return m;
}

double edge_homophily(const TextAttributedGraph& g) {
  std::size_t same = 0;
  std::size_t total = 0;
  for (std::size_t r = 0; r < g.num_nodes; ++r) {
    for (const auto c : g.adjacency.row_indices(r)) {
      if (c <= r || g.labels[r] == kUnlabeled || g.labels[c] == kUnlabeled) continue;
      ++total;
      if (g.labels[r] == g.labels[c]) ++same;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(same) / static_cast<double>(total);
}

namespace {

// Bijective pseudo-word for an integer: four consonant-vowel syllables.
std::string pseudo_word(std::size_t id) {
  static const char* const kSyllables[] = {"ka", "lo", "mi", "nu", "re", "si", "to", "va",
                                           "ze", "po", "du", "fe", "gi", "ha", "jo", "bu"};
  std::string w;
  for (int i = 0; i < 4; ++i) {
    w += kSyllables[id % 16];
    id /= 16;
  }
  return w;
}

std::string class_name(std::size_t c) {
  static const char* const kNames[] = {
      "Alpha", "Bravo", "Charlie", "Delta", "Echo", "Foxtrot", "Golf", "Hotel", "India",
      "Juliett", "Kilo", "Lima", "Mike", "November", "Oscar", "Papa", "Quebec", "Romeo",
      "Sierra", "Tango", "Uniform", "Victor", "Whiskey", "Xray", "Yankee", "Zulu"};
  std::string name = kNames[c % 26];
  if (c >= 26) name += "x" + std::to_string(c / 26);
  return name;
}

}  // namespace

TextAttributedGraph make_synthetic_tag(const SyntheticSpec& spec) {
  if (spec.num_classes < 2 || spec.num_nodes < spec.num_classes)
    throw ConfigError("make_synthetic_tag: need num_nodes >= num_classes >= 2");
  if (!(spec.homophily >= 0.0 && spec.homophily <= 1.0))
    throw ConfigError("make_synthetic_tag: homophily must be in [0,1]");
  if (spec.keywords_per_class == 0) throw ConfigError("make_synthetic_tag: keywords_per_class must be >= 1");
  const std::size_t n = spec.num_nodes;
  const std::size_t c = spec.num_classes;
  constexpr std::size_t kFillerVocab = 300;
  if (c * spec.keywords_per_class + kFillerVocab > 65536)
    throw ConfigError("make_synthetic_tag: vocabulary too large");

  Rng rng(mix_key(spec.seed, 0x7a6ULL));
  TextAttributedGraph g;
  g.num_nodes = n;

  std::vector<std::string> names;
  for (std::size_t k = 0; k < c; ++k) names.push_back(class_name(k));
  g.label_space = LabelSpace::from_names(names);

  g.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.labels[i] = static_cast<int>(i % c);
  rng.shuffle(g.labels);

  // Word ids: keywords occupy [0, c*K); filler words follow. A seeded
  // permutation of the id space decouples spelling from class.
  std::vector<std::size_t> word_ids(c * spec.keywords_per_class + kFillerVocab);
  for (std::size_t i = 0; i < word_ids.size(); ++i) word_ids[i] = i;
  rng.shuffle(word_ids);
  const auto keyword = [&](std::size_t cls, std::size_t j) {
    return pseudo_word(word_ids[cls * spec.keywords_per_class + j]);
  };
  const auto filler = [&](std::size_t j) {
    return pseudo_word(word_ids[c * spec.keywords_per_class + j]);
  };
  const auto planted = [&](std::size_t own) {
    const std::size_t cls = rng.bernoulli(spec.keyword_noise) ? rng.below(c) : own;
    return keyword(cls, rng.below(spec.keywords_per_class));
  };

  g.texts.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto own = static_cast<std::size_t>(g.labels[i]);
    std::string title;
    for (std::size_t w = 0; w < spec.title_keywords; ++w) title += (w ? " " : "") + planted(own);
    std::vector<std::string> words;
    for (std::size_t w = 0; w < spec.abstract_keywords; ++w) words.push_back(planted(own));
    for (std::size_t w = 0; w < spec.abstract_filler; ++w) words.push_back(filler(rng.below(kFillerVocab)));
    rng.shuffle(words);
    std::string abstract;
    for (std::size_t w = 0; w < words.size(); ++w) abstract += (w ? " " : "") + words[w];
    g.texts[i] = {std::to_string(i), std::move(title), std::move(abstract)};
  }

  std::vector<std::vector<std::size_t>> members(c);
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(g.labels[i])].push_back(i);

  const std::size_t target = n * spec.avg_degree / 2;
  std::set<std::pair<std::size_t, std::size_t>> edge_set;
  const std::size_t max_attempts = target * 50 + 1000;
  for (std::size_t attempt = 0; edge_set.size() < target && attempt < max_attempts; ++attempt) {
    const std::size_t u = rng.below(n);
    const auto cu = static_cast<std::size_t>(g.labels[u]);
    std::size_t v;
    if (rng.bernoulli(spec.homophily)) {
      const auto& same = members[cu];
      if (same.size() < 2) continue;
      v = same[rng.below(same.size())];
    } else {
      std::size_t other = rng.below(c - 1);
      if (other >= cu) ++other;
      const auto& pool = members[other];
      if (pool.empty()) continue;
      v = pool[rng.below(pool.size())];
    }
    if (u == v) continue;
    edge_set.emplace(std::min(u, v), std::max(u, v));
  }
  g.adjacency = symmetrize_edges(n, {edge_set.begin(), edge_set.end()});
  g.splits = split_nodes(g, SplitRatios{}, spec.seed);
  g.validate();
  return g;
}

}  // namespace tape
