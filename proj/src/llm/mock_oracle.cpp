#include <nlohmann/json.hpp>

#include "tape/error.hpp"
#include "tape/hash.hpp"
#include "tape/llm_client.hpp"
#include "tape/rng.hpp"

namespace tape {
namespace {

constexpr std::uint64_t kRankStream = 0x6d6f636b;  // "mock"
constexpr std::uint64_t kWordStream = 0x776f7264;  // "word"

std::vector<std::string> words_of(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

MockOracle::MockOracle(const TextAttributedGraph& graph, double top1_accuracy, std::size_t k,
                       std::uint64_t seed)
    : graph_(graph), top1_accuracy_(top1_accuracy), k_(k), seed_(seed) {
  if (!(top1_accuracy >= 0.0 && top1_accuracy <= 1.0)) throw ConfigError("mock top1_accuracy must be in [0, 1]");
  if (k < 1 || k > graph.num_classes())
    throw ConfigError("mock k must be in [1, C], got " + std::to_string(k));
}

std::vector<std::size_t> MockOracle::ranked(std::size_t node) const {
  const std::size_t c = graph_.num_classes();
  Rng rng(mix_key(seed_, kRankStream, node));
  const int label = graph_.labels.at(node);
  std::size_t first;
  if (label == kUnlabeled) {
    first = rng.below(c);
  } else if (rng.uniform() < top1_accuracy_) {
    first = static_cast<std::size_t>(label);
  } else {
    first = rng.below(c - 1);
    if (first >= static_cast<std::size_t>(label)) ++first;
  }
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < c; ++i)
    if (i != first) rest.push_back(i);
  rng.shuffle(rest);
  std::vector<std::size_t> out{first};
  out.insert(out.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(k_ - 1));
  return out;
}

std::string MockOracle::answer(std::size_t node) const {
  const auto r = ranked(node);
  std::string out;
  for (std::size_t i = 0; i < r.size(); ++i) out += (i ? ", " : "") + graph_.label_space[r[i]].name;
  const auto& text = graph_.texts.at(node);
  auto words = words_of(text.title);
  if (words.empty()) words = words_of(text.abstract);
  Rng rng(mix_key(seed_, kWordStream, node));
  const std::string topic = words.empty() ? std::string("its subject matter") : words[rng.below(words.size())];
  out += "\n\nThe paper most closely matches " + graph_.label_space[r[0]].name + " because it discusses " +
         topic + ".";
  return out;
}

OracleTransport::OracleTransport(const MockOracle& oracle, const TextAttributedGraph& graph,
                                 const PromptTemplate& tmpl, std::size_t abstract_budget)
    : oracle_(oracle) {
  for (std::size_t i = 0; i < graph.num_nodes; ++i)
    node_by_prompt_.emplace(hash_hex(build_prompt(graph.texts[i], tmpl, abstract_budget)), i);
}

HttpResponse OracleTransport::post(const std::string& json_body) {
  using json = nlohmann::json;
  std::string prompt;
  try {
    prompt = json::parse(json_body).at("messages").at(0).at("content").get<std::string>();
  } catch (const json::exception&) {
    return {400, std::string("{\"error\": \"bad request\"}")};
  }
  const auto it = node_by_prompt_.find(hash_hex(prompt));
  if (it == node_by_prompt_.end()) return {404, "{\"error\": \"unknown prompt\"}"};
  const json reply = {{"choices", json::array({{{"index", 0},
                                                {"message", {{"role", "assistant"}, {"content", oracle_.answer(it->second)}}},
                                                {"finish_reason", "stop"}}})}};
  return {200, reply.dump()};
}

}  // namespace tape
