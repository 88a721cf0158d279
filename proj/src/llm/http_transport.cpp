#include <cstdlib>

#include <httplib.h>

#include "tape/error.hpp"
#include "tape/llm_client.hpp"

namespace tape {
namespace {

class HttpTransport final : public Transport {
 public:
  HttpTransport(const std::string& url, const LlmConfig& config) : timeout_(config.timeout) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint url needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    origin_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw ConfigError("unsupported url scheme: " + scheme);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (scheme == "https") throw ConfigError("built without TLS support; cannot reach " + url);
#endif
    if (const char* key = std::getenv(config.api_key_env.c_str()); key != nullptr && *key != '\0')
      headers_.emplace("Authorization", std::string("Bearer ") + key);
  }

  HttpResponse post(const std::string& json_body) override {
    // httplib clients are not thread-safe; one per call keeps post() reentrant.
    httplib::Client client(origin_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    auto res = client.Post(path_, headers_, json_body, "application/json");
    if (!res) throw TransportError("request to " + origin_ + path_ + " failed: " + httplib::to_string(res.error()));
    return {res->status, res->body};
  }

 private:
  std::string origin_;
  std::string path_;
  httplib::Headers headers_;
  std::chrono::milliseconds timeout_;
};

}  // namespace

std::unique_ptr<Transport> make_http_transport(const std::string& url, const LlmConfig& config) {
  return std::make_unique<HttpTransport>(url, config);
}

std::unique_ptr<Transport> make_http_transport(const LlmConfig& config) {
  return make_http_transport(config.endpoint_url, config);
}

}  // namespace tape
