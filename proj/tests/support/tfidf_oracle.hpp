#pragma once

// Direct re-statement of the tf-idf formulas, written without sharing code
// with the library: per-document term counts via stringstream, df by
// brute-force membership tests, weights normalized at the end.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace ref {

inline std::vector<std::string> words(const std::string& text, std::size_t min_len) {
  std::string cleaned = text;
  for (auto& c : cleaned) {
    const auto u = static_cast<unsigned char>(c);
    c = (u < 128 && std::isalnum(u)) ? static_cast<char>(std::tolower(u)) : ' ';
  }
  std::istringstream in(cleaned);
  std::vector<std::string> out;
  for (std::string w; in >> w;)
    if (w.size() >= min_len) out.push_back(w);
  return out;
}

struct TfidfOracle {
  std::vector<std::string> terms;  // column order
  std::vector<double> idf;

  TfidfOracle(const std::vector<std::string>& corpus, std::size_t min_df, std::size_t max_features,
              std::size_t min_len) {
    std::set<std::string> all;
    std::vector<std::set<std::string>> docs;
    for (const auto& d : corpus) {
      const auto w = words(d, min_len);
      docs.emplace_back(w.begin(), w.end());
      all.insert(w.begin(), w.end());
    }
    std::vector<std::pair<double, std::string>> ranked;  // (-df, term)
    for (const auto& t : all) {
      std::size_t df = 0;
      for (const auto& d : docs) df += d.count(t);
      if (df >= min_df) ranked.emplace_back(-static_cast<double>(df), t);
    }
    std::sort(ranked.begin(), ranked.end());
    if (ranked.size() > max_features) ranked.resize(max_features);
    for (const auto& [neg_df, t] : ranked) terms.push_back(t);
    std::sort(terms.begin(), terms.end());
    for (const auto& t : terms) {
      std::size_t df = 0;
      for (const auto& d : docs) df += d.count(t);
      idf.push_back(std::log((1.0 + static_cast<double>(docs.size())) / (1.0 + static_cast<double>(df))) + 1.0);
    }
  }

  // Dense weight vector over `terms`.
  std::vector<double> weights(const std::string& text, std::size_t min_len) const {
    std::vector<double> v(terms.size(), 0.0);
    for (const auto& w : words(text, min_len)) {
      const auto it = std::lower_bound(terms.begin(), terms.end(), w);
      if (it != terms.end() && *it == w) v[static_cast<std::size_t>(it - terms.begin())] += 1.0;
    }
    double n2 = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] *= idf[i];
      n2 += v[i] * v[i];
    }
    if (n2 > 0)
      for (auto& x : v) x /= std::sqrt(n2);
    return v;
  }
};

// Random corpus over a small vocabulary so df values collide.
template <typename RngT>
std::vector<std::string> random_corpus(RngT& rng, std::size_t docs) {
  static const char* const kWords[] = {"graph", "node", "Edge", "text", "LLM", "gnn", "a", "b", "x1",
                                       "deep", "net", "prompt", "TAPE", "z", "rank", "feature", "42"};
  std::vector<std::string> corpus;
  for (std::size_t d = 0; d < docs; ++d) {
    std::string doc;
    const std::size_t len = rng.below(15);
    for (std::size_t i = 0; i < len; ++i) {
      doc += kWords[rng.below(std::size(kWords))];
      doc += (rng.below(4) == 0) ? ", " : " ";
    }
    corpus.push_back(doc);
  }
  return corpus;
}

}  // namespace ref
