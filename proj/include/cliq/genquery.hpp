#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cliq/cluster.hpp"
#include "cliq/corpus.hpp"
#include "cliq/error.hpp"
#include "cliq/http.hpp"

namespace cliq {

struct TeacherEndpointConfig {
  std::string base_url = "http://localhost:8000/v1";
  std::string model_name = "Qwen/Qwen3-30B-A3B-Instruct-2507";
  double temperature = 0.7;
  std::size_t max_tokens = 16384;
  Seconds timeout{300.0};
  int max_attempts = 5;
  Seconds backoff_base{1.0};
  bool jitter = false;
  std::size_t max_concurrency = 4;

  void validate() const;
  RetryPolicy retry_policy(std::uint64_t jitter_seed = 0) const;
};

inline constexpr std::string_view kPromptTemplateVersion = "cliq-prompt-v1";

// Hex digest of the prompt template text; changes whenever the wording does.
std::string prompt_template_hash();

// The literal output contract every rendered prompt carries.
inline constexpr std::string_view kOutputContract =
    "a JSON array of objects with fields instruction and input";

struct ClusterPrompt {
  int cluster_id = 0;
  std::vector<std::string> example_texts;
  std::size_t requested_count = 0;
  std::string rendered;
};

// Samples min(M, |cluster|) examples uniformly without replacement (seeded)
// and renders the generation prompt asking for exactly m new instructions.
ClusterPrompt build_cluster_prompt(std::span<const std::string> cluster_queries,
                                   std::size_t max_examples, std::size_t requested,
                                   std::uint64_t seed, int cluster_id = 0);

std::string chat_request_body(const TeacherEndpointConfig& config, const std::string& prompt);

struct ChatResult {
  std::string content;
  int attempts = 0;
  std::vector<Seconds> delays;
};

// One chat completion with retry/backoff. Returns choices[0].message.content.
ChatResult chat_complete(const TeacherEndpointConfig& config, const std::string& prompt,
                         HttpTransport& transport, const Sleeper& sleep);

struct GeneratedQuery {
  std::string instruction;
  std::string input;
  int cluster_id = -1;

  friend bool operator==(const GeneratedQuery&, const GeneratedQuery&) = default;
};

// Extracts generated queries from free-form teacher output. Handles markdown
// fences, prose around the array and truncated replies (cut back to the last
// complete object, then the array is closed). Elements without a nonempty
// "instruction" are dropped. Throws ParseError when nothing usable is found.
std::vector<GeneratedQuery> parse_generated_queries(std::string_view raw);

// Canonical JSON array form of parsed queries.
std::string serialize_generated_queries(const std::vector<GeneratedQuery>& queries);

struct GenerationParams {
  std::size_t examples_per_cluster = 1000;  // M
  std::size_t queries_per_cluster = 10;     // m
  std::uint64_t seed = 42;
  bool deterministic_backend = false;  // recorded in the report
};

struct ClusterOutcome {
  int cluster_id = 0;
  std::size_t examples = 0;
  std::size_t requested = 0;
  std::size_t received = 0;
  std::size_t kept = 0;
  std::size_t shortfall = 0;
  int attempts = 0;
  std::string status;  // "ok" | "shortfall" | "failed"
  std::string error;
};

struct GenerationReport {
  std::string template_version;
  std::string template_hash;
  std::string model;
  double temperature = 0.0;
  std::size_t max_tokens = 0;
  std::size_t examples_per_cluster = 0;
  std::size_t queries_per_cluster = 0;
  std::uint64_t seed = 0;
  bool deterministic = false;
  std::vector<ClusterOutcome> clusters;

  std::size_t total_kept() const;
  std::size_t failed_clusters() const;
  nlohmann::ordered_json to_json() const;
};

// Every cluster failed; carries the per-cluster report for diagnostics.
class GenerationFailedError : public UpstreamError {
 public:
  GenerationFailedError(const std::string& message, GenerationReport report)
      : UpstreamError(message), report_(std::move(report)) {}

  const GenerationReport& report() const noexcept { return report_; }

 private:
  GenerationReport report_;
};

struct GenerationResult {
  QueryPool queries;
  GenerationReport report;
};

// Prompts the teacher once per retained cluster (up to max_concurrency in
// flight), keeps at most m parsed queries per cluster and unions them in
// cluster-id order. Per-cluster failures are recorded; throws UpstreamError
// only if every cluster fails.
GenerationResult generate_query_set(const RetainedClustering& retained,
                                    const TeacherEndpointConfig& config,
                                    const GenerationParams& params, HttpTransport& transport,
                                    const Sleeper& sleep);

}  // namespace cliq
