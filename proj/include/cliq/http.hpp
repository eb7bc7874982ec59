#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cliq {

using Seconds = std::chrono::duration<double>;

struct HttpResponse {
  // 0 means the request never produced an HTTP status (connect/read failure,
  // timeout); `error` then describes the transport failure.
  int status = 0;
  std::string body;
  std::string error;

  bool ok() const noexcept { return status >= 200 && status < 300; }
};

// Minimal JSON-over-HTTP POST interface. Implementations must be safe to
// call from several threads at once.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  // `path` is relative to the transport's base URL, e.g. "/chat/completions".
  virtual HttpResponse post_json(const std::string& path, const std::string& body) = 0;
};

// cpp-httplib backed transport for OpenAI-compatible endpoints.
class HttplibTransport final : public HttpTransport {
 public:
  HttplibTransport(std::string base_url, std::optional<std::string> api_key, Seconds timeout);

  HttpResponse post_json(const std::string& path, const std::string& body) override;

 private:
  std::string origin_;       // scheme://host[:port]
  std::string path_prefix_;  // e.g. "/v1"
  std::optional<std::string> api_key_;
  Seconds timeout_;
};

// Splits "http://host:8000/v1" into origin and path prefix.
std::pair<std::string, std::string> split_base_url(const std::string& base_url);

// Reads an API key from the named environment variable, if set and nonempty.
std::optional<std::string> api_key_from_env(const std::string& variable);

struct RetryPolicy {
  int max_attempts = 5;
  Seconds backoff_base{1.0};
  // Full jitter: each delay is drawn uniformly from [0, nominal delay).
  bool jitter = false;
  std::uint64_t jitter_seed = 0;
};

// Waits between attempts; tests substitute a virtual clock.
using Sleeper = std::function<void(Seconds)>;
Sleeper real_sleeper();

// Nominal delay after failed attempt `attempt` (1-based): base * 2^(attempt-1).
Seconds backoff_delay(const RetryPolicy& policy, int attempt);

// 429, 5xx and transport failures are retried; other statuses are final.
bool is_retryable(const HttpResponse& response);

struct RetryOutcome {
  HttpResponse response;
  int attempts = 0;
  std::vector<Seconds> delays;
};

// POSTs until success or until max_attempts requests have been made.
// Throws UpstreamError on exhaustion or a non-retryable status.
RetryOutcome post_with_retry(HttpTransport& transport, const std::string& path,
                             const std::string& body, const RetryPolicy& policy,
                             const Sleeper& sleep);

}  // namespace cliq
