#include "tape/llm_client.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <ctime>
#include <exception>
#include <nlohmann/json.hpp>
#include <thread>

#include "tape/error.hpp"
#include "tape/hash.hpp"
#include "tape/io.hpp"
#include "tape/rng.hpp"

namespace tape {
namespace {

using json = nlohmann::json;

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

void sleep_before_retry(const LlmConfig& config, std::size_t retry, const std::string& prompt) {
  if (config.backoff_base.count() <= 0) return;
  const double jitter = 1.0 + 0.25 * counter_uniform(fnv1a64(prompt), retry);
  const double ms = static_cast<double>(config.backoff_base.count()) * std::ldexp(1.0, static_cast<int>(retry)) * jitter;
  std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

void append_line(const std::filesystem::path& file, const std::string& line) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  const int fd = ::open(file.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw ConfigError("cannot open cache " + file.string() + ": " + std::strerror(errno));
  const ssize_t n = ::write(fd, line.data(), line.size());
  const int err = errno;
  ::close(fd);
  if (n != static_cast<ssize_t>(line.size()))
    throw ConfigError("short write to cache " + file.string() + ": " + std::strerror(err));
}

}  // namespace

void LlmConfig::validate() const {
  if (max_in_flight < 1) throw ConfigError("llm.max_in_flight must be >= 1");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw ConfigError("llm.temperature must be >= 0");
  if (max_output_tokens < 1) throw ConfigError("llm.max_output_tokens must be >= 1");
  if (model_name.empty()) throw ConfigError("llm.model_name is empty");
  if (timeout.count() <= 0) throw ConfigError("llm.timeout must be positive");
  if (backoff_base.count() < 0) throw ConfigError("llm.backoff_base must be >= 0");
}

HttpResponse InstrumentedTransport::post(const std::string& json_body) {
  calls_.fetch_add(1);
  const std::size_t now = in_flight_.fetch_add(1) + 1;
  std::size_t peak = peak_.load();
  while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
  }
  struct Leave {
    std::atomic<std::size_t>& n;
    ~Leave() { n.fetch_sub(1); }
  } leave{in_flight_};
  return inner_.post(json_body);
}

std::string build_request_body(const std::string& prompt, const LlmConfig& config) {
  return dump({{"model", config.model_name},
               {"temperature", config.temperature},
               {"max_tokens", config.max_output_tokens},
               {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}});
}

std::string extract_content(const std::string& response_body) {
  std::string content;
  try {
    const json doc = json::parse(response_body);
    const auto& msg = doc.at("choices").at(0).at("message").at("content");
    if (msg.is_string()) content = msg.get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("unexpected response shape: ") + e.what());
  }
  if (content.empty()) throw FormatError("response has no message content");
  return content;
}

bool is_transient_status(int status) noexcept {
  return status == 408 || status == 429 || (status >= 500 && status <= 599);
}

std::string query(const std::string& prompt, const LlmConfig& config, Transport& transport,
                  std::size_t* attempts) {
  const std::string body = build_request_body(prompt, config);
  std::size_t made = 0;
  for (std::size_t attempt = 0;; ++attempt) {
    if (attempt > 0) sleep_before_retry(config, attempt - 1, prompt);
    const bool last = attempt == config.retry_limit;
    HttpResponse res;
    try {
      ++made;
      if (attempts != nullptr) *attempts = made;
      res = transport.post(body);
    } catch (const TransportError&) {
      if (last) throw;
      continue;
    }
    if (res.status >= 200 && res.status < 300) return extract_content(res.body);
    if (last || !is_transient_status(res.status)) throw StatusError(res.status, res.body);
  }
}

ResponseCache::ResponseCache(std::filesystem::path file, bool repair) : file_(std::move(file)) {
  if (!std::filesystem::exists(file_)) return;
  const auto lines = split_lines(read_file(file_));
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (trim(lines[n]).empty()) continue;
    try {
      const json j = json::parse(lines[n]);
      entries_.emplace(key(j.at("node_id").get<std::string>(), j.at("prompt_hash").get<std::string>(),
                           j.at("model_name").get<std::string>()),
                       j.at("raw_response").get<std::string>());
    } catch (const json::exception& e) {
      if (!repair) throw ParseError(file_.string(), n + 1, std::string("corrupt cache entry: ") + e.what());
      ++skipped_;
    }
  }
}

std::string ResponseCache::key(const std::string& node_id, const std::string& prompt_hash,
                               const std::string& model_name) {
  return node_id + '\x1f' + prompt_hash + '\x1f' + model_name;
}

std::optional<std::string> ResponseCache::lookup(const std::string& node_id,
                                                 const std::string& prompt_hash,
                                                 const std::string& model_name) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find(key(node_id, prompt_hash, model_name));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::append(CacheEntry entry) {
  const std::string line = dump({{"node_id", entry.node_id},
                                 {"prompt_hash", entry.prompt_hash},
                                 {"raw_response", entry.raw_response},
                                 {"model_name", entry.model_name},
                                 {"timestamp", entry.timestamp}}) +
                           "\n";
  std::unique_lock lock(mutex_);
  auto [it, inserted] = entries_.emplace(key(entry.node_id, entry.prompt_hash, entry.model_name),
                                         std::move(entry.raw_response));
  if (!inserted) return;
  try {
    append_line(file_, line);
  } catch (...) {
    entries_.erase(it);
    throw;
  }
}

std::size_t ResponseCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

CachedResponse query_cached(const std::string& node_id, const std::string& prompt,
                            const LlmConfig& config, Transport& transport, ResponseCache& cache) {
  const std::string prompt_hash = hash_hex(prompt);
  if (auto hit = cache.lookup(node_id, prompt_hash, config.model_name)) return {std::move(*hit), true};
  std::string text = query(prompt, config, transport);
  cache.append({node_id, prompt_hash, text, config.model_name, static_cast<std::int64_t>(std::time(nullptr))});
  return {std::move(text), false};
}

EnrichmentRun run_enrichment(const std::vector<EnrichmentJob>& jobs, const LlmConfig& config,
                             Transport& transport, ResponseCache& cache) {
  config.validate();
  EnrichmentRun run;
  run.responses.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> hits{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        auto r = query_cached(jobs[i].node_id, jobs[i].prompt, config, transport, cache);
        if (r.cache_hit) hits.fetch_add(1);
        run.responses[i] = std::move(r.text);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
      }
    }
  };
  const std::size_t n_threads = std::min(config.max_in_flight, std::max<std::size_t>(jobs.size(), 1));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
  run.cache_hits = hits.load();
  return run;
}

}  // namespace tape
