#include "cliq/http.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "cliq/error.hpp"
#include "cliq/random.hpp"

namespace cliq {

std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw InputError("config", "base URL must include a scheme: \"" + base_url + "\"");
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

std::optional<std::string> api_key_from_env(const std::string& variable) {
  if (variable.empty()) return std::nullopt;
  const char* value = std::getenv(variable.c_str());
  if (value == nullptr || *value == '\0') return std::nullopt;
  return std::string(value);
}

HttplibTransport::HttplibTransport(std::string base_url, std::optional<std::string> api_key,
                                   Seconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
  std::tie(origin_, path_prefix_) = split_base_url(base_url);
}

HttpResponse HttplibTransport::post_json(const std::string& path, const std::string& body) {
  // One client per request: httplib::Client is not safe for concurrent use.
  httplib::Client client(origin_);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout_);
  const auto secs = static_cast<time_t>(micros.count() / 1000000);
  const auto usecs = static_cast<time_t>(micros.count() % 1000000);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);

  HttpResponse out;
  auto res = client.Post(path_prefix_ + path, headers, body, "application/json");
  if (!res) {
    out.error = httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  return out;
}

Sleeper real_sleeper() {
  return [](Seconds d) { std::this_thread::sleep_for(d); };
}

Seconds backoff_delay(const RetryPolicy& policy, int attempt) {
  return policy.backoff_base * std::ldexp(1.0, attempt - 1);
}

bool is_retryable(const HttpResponse& response) {
  return response.status == 0 || response.status == 429 || response.status >= 500;
}

namespace {

std::string describe(const HttpResponse& r) {
  if (r.status == 0) return "transport failure: " + r.error;
  std::string snippet = r.body.substr(0, 200);
  return "HTTP " + std::to_string(r.status) + (snippet.empty() ? "" : ": " + snippet);
}

}  // namespace

RetryOutcome post_with_retry(HttpTransport& transport, const std::string& path,
                             const std::string& body, const RetryPolicy& policy,
                             const Sleeper& sleep) {
  if (policy.max_attempts < 1) throw InputError("config", "max_attempts must be >= 1");
  Rng jitter_rng(derive_seed(policy.jitter_seed, fnv1a64(body)));
  RetryOutcome outcome;
  for (int attempt = 1;; ++attempt) {
    outcome.response = transport.post_json(path, body);
    outcome.attempts = attempt;
    if (outcome.response.ok()) return outcome;
    if (!is_retryable(outcome.response)) {
      throw UpstreamError("non-retryable response from " + path + ": " +
                              describe(outcome.response),
                          attempt, outcome.response.status);
    }
    if (attempt >= policy.max_attempts) {
      throw UpstreamError("gave up on " + path + " after " + std::to_string(attempt) +
                              " attempts; last failure: " + describe(outcome.response),
                          attempt, outcome.response.status);
    }
    Seconds delay = backoff_delay(policy, attempt);
    if (policy.jitter) delay *= jitter_rng.uniform();
    outcome.delays.push_back(delay);
    sleep(delay);
  }
}

}  // namespace cliq
