#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "tape/graph.hpp"
#include "tape/prompting.hpp"

namespace tape {

struct LlmConfig {
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  std::string model_name = "gpt-3.5-turbo";
  double temperature = 0.0;
  std::size_t max_output_tokens = 512;
  std::size_t max_in_flight = 4;
  std::size_t retry_limit = 3;
  std::chrono::milliseconds timeout{60000};
  // First retry waits backoff_base, doubling per attempt, with up to +25% jitter.
  std::chrono::milliseconds backoff_base{1000};
  // Name of the environment variable holding the bearer token.
  std::string api_key_env = "TAPE_API_KEY";

  // Throws ConfigError.
  void validate() const;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// One POST endpoint. Implementations must be safe to call from many threads
// and throw TransportError when no response arrives at all.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& json_body) = 0;
};

// httplib client for config.endpoint_url. The API key is read from the
// environment once, here; an unset variable sends no Authorization header.
std::unique_ptr<Transport> make_http_transport(const LlmConfig& config);
std::unique_ptr<Transport> make_http_transport(const std::string& url, const LlmConfig& config);

// Decorator recording call counts and the peak number of concurrent calls.
class InstrumentedTransport final : public Transport {
 public:
  explicit InstrumentedTransport(Transport& inner) : inner_(inner) {}
  HttpResponse post(const std::string& json_body) override;

  std::size_t calls() const noexcept { return calls_.load(); }
  std::size_t peak_in_flight() const noexcept { return peak_.load(); }

 private:
  Transport& inner_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> peak_{0};
};

// {"model", "temperature", "max_tokens", "messages": [{"role": "user", "content": prompt}]}
std::string build_request_body(const std::string& prompt, const LlmConfig& config);
// choices[0].message.content; throws FormatError if missing or empty.
std::string extract_content(const std::string& response_body);

bool is_transient_status(int status) noexcept;

// Sends the prompt, retrying transport failures and transient statuses
// (408, 429, 5xx) up to config.retry_limit times. `attempts`, if given,
// receives the number of posts made.
std::string query(const std::string& prompt, const LlmConfig& config, Transport& transport,
                  std::size_t* attempts = nullptr);

struct CacheEntry {
  std::string node_id;
  std::string prompt_hash;
  std::string raw_response;
  std::string model_name;
  std::int64_t timestamp = 0;

  friend bool operator==(const CacheEntry&, const CacheEntry&) = default;
};

// Append-only JSON Lines store keyed by (node_id, prompt_hash, model_name).
// Lookups take a shared lock; appends take an exclusive lock and land as a
// single write() of one complete line.
class ResponseCache {
 public:
  // Loads `file` if it exists. A malformed line raises ParseError naming it,
  // unless `repair` is set, in which case bad lines are skipped and counted.
  explicit ResponseCache(std::filesystem::path file, bool repair = false);

  std::optional<std::string> lookup(const std::string& node_id, const std::string& prompt_hash,
                                    const std::string& model_name) const;
  // A second entry for an existing key is ignored.
  void append(CacheEntry entry);

  std::size_t size() const;
  std::size_t skipped_lines() const noexcept { return skipped_; }
  const std::filesystem::path& path() const noexcept { return file_; }

 private:
  static std::string key(const std::string& node_id, const std::string& prompt_hash,
                         const std::string& model_name);

  std::filesystem::path file_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, std::string> entries_;
  std::size_t skipped_ = 0;
};

struct CachedResponse {
  std::string text;
  bool cache_hit = false;
};

CachedResponse query_cached(const std::string& node_id, const std::string& prompt,
                            const LlmConfig& config, Transport& transport, ResponseCache& cache);

// Deterministic stand-in for the LLM. Per node: with probability
// top1_accuracy the true class is ranked first, otherwise a uniformly random
// wrong class; the other k-1 ranks are distinct random classes. Unlabeled
// nodes get a uniformly random first class.
class MockOracle {
 public:
  MockOracle(const TextAttributedGraph& graph, double top1_accuracy, std::size_t k,
             std::uint64_t seed);

  std::vector<std::size_t> ranked(std::size_t node) const;
  // "{ranked names, comma-separated}\n\n{one sentence naming the top class
  // and a word from the node's text}"
  std::string answer(std::size_t node) const;

  std::size_t k() const noexcept { return k_; }

 private:
  const TextAttributedGraph& graph_;
  double top1_accuracy_;
  std::size_t k_;
  std::uint64_t seed_;
};

// Chat-completions server emulated in-process: maps each node's prompt (built
// with `tmpl`) to the oracle's answer. Unknown prompts get HTTP 404.
class OracleTransport final : public Transport {
 public:
  OracleTransport(const MockOracle& oracle, const TextAttributedGraph& graph,
                  const PromptTemplate& tmpl, std::size_t abstract_budget = kDefaultAbstractBudget);
  HttpResponse post(const std::string& json_body) override;

 private:
  const MockOracle& oracle_;
  std::unordered_map<std::string, std::size_t> node_by_prompt_;
};

struct EnrichmentJob {
  std::string node_id;
  std::string prompt;
};

struct EnrichmentRun {
  std::vector<std::string> responses;  // aligned with the job list
  std::size_t cache_hits = 0;
};

// Runs every job through query_cached on up to config.max_in_flight worker
// threads. The first error stops the remaining work and is rethrown.
EnrichmentRun run_enrichment(const std::vector<EnrichmentJob>& jobs, const LlmConfig& config,
                             Transport& transport, ResponseCache& cache);

}  // namespace tape
