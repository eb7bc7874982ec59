#include "cliq/genquery.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <optional>
#include <thread>

#include "cliq/error.hpp"
#include "cliq/random.hpp"

namespace cliq {

using nlohmann::json;
using nlohmann::ordered_json;

void TeacherEndpointConfig::validate() const {
  if (base_url.empty()) throw InputError("config", "teacher base URL is empty");
  if (model_name.empty()) throw InputError("config", "teacher model name is empty");
  if (!(temperature >= 0.0)) throw InputError("config", "temperature must be >= 0");
  if (max_tokens < 1) throw InputError("config", "max_tokens must be positive");
  if (max_attempts < 1) throw InputError("config", "max_attempts must be >= 1");
  if (timeout.count() <= 0.0) throw InputError("config", "timeout must be positive");
  if (backoff_base.count() < 0.0) throw InputError("config", "backoff base must be >= 0");
  if (max_concurrency < 1) throw InputError("config", "max_concurrency must be >= 1");
}

RetryPolicy TeacherEndpointConfig::retry_policy(std::uint64_t jitter_seed) const {
  RetryPolicy p;
  p.max_attempts = max_attempts;
  p.backoff_base = backoff_base;
  p.jitter = jitter;
  p.jitter_seed = jitter_seed;
  return p;
}

namespace {

// Placeholders: {EXAMPLE_COUNT}, {EXAMPLES}, {COUNT}, {CONTRACT}.
constexpr std::string_view kTemplate =
    "You are helping expand an instruction dataset. The examples below were drawn from one "
    "semantic cluster of user instructions and share a common theme and style.\n"
    "\n"
    "Examples from this cluster ({EXAMPLE_COUNT} shown):\n"
    "{EXAMPLES}"
    "\n"
    "Task: write exactly {COUNT} new instructions that belong to the same theme as the "
    "examples.\n"
    "Requirements:\n"
    "- Vary the surface form: wording, sentence structure and framing should differ from the "
    "examples and from each other.\n"
    "- Length: keep each instruction under 80 words. Put any supporting material in \"input\" "
    "and leave \"input\" empty when none is needed.\n"
    "- Complexity: stay at the complexity level of the examples; a good answer should fit in "
    "a few paragraphs.\n"
    "- Reasoning depth: require at most a few reasoning steps; no multi-part projects.\n"
    "- Do not copy or lightly paraphrase any example.\n"
    "\n"
    "Output format: respond with {CONTRACT}, and nothing else. Produce exactly {COUNT} "
    "objects, for example:\n"
    "[{\"instruction\": \"...\", \"input\": \"\"}]\n";

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos;
       pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

std::string prompt_template_hash() {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(kTemplate)));
  return buf;
}

ClusterPrompt build_cluster_prompt(std::span<const std::string> cluster_queries,
                                   std::size_t max_examples, std::size_t requested,
                                   std::uint64_t seed, int cluster_id) {
  if (cluster_queries.empty()) {
    throw InputError("empty_cluster", "cluster " + std::to_string(cluster_id) + " has no queries");
  }
  if (max_examples < 1 || requested < 1) {
    throw InputError("config", "M and m must be positive");
  }
  Rng rng(seed);
  auto picks = rng.sample_without_replacement(cluster_queries.size(),
                                              std::min(max_examples, cluster_queries.size()));
  std::sort(picks.begin(), picks.end());

  ClusterPrompt prompt;
  prompt.cluster_id = cluster_id;
  prompt.requested_count = requested;
  std::string examples;
  for (std::size_t i = 0; i < picks.size(); ++i) {
    const std::string& text = cluster_queries[picks[i]];
    prompt.example_texts.push_back(text);
    std::string line = text;
    replace_all(line, "\n", "\n    ");
    examples += "[" + std::to_string(i + 1) + "] " + line + "\n";
  }

  std::string rendered(kTemplate);
  replace_all(rendered, "{EXAMPLE_COUNT}", std::to_string(picks.size()));
  replace_all(rendered, "{COUNT}", std::to_string(requested));
  replace_all(rendered, "{CONTRACT}", kOutputContract);
  // Examples last: their text may itself contain brace placeholders.
  replace_all(rendered, "{EXAMPLES}", examples);
  prompt.rendered = std::move(rendered);
  return prompt;
}

std::string chat_request_body(const TeacherEndpointConfig& config, const std::string& prompt) {
  ordered_json body;
  body["model"] = config.model_name;
  body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = config.temperature;
  body["max_tokens"] = config.max_tokens;
  return body.dump();
}

ChatResult chat_complete(const TeacherEndpointConfig& config, const std::string& prompt,
                         HttpTransport& transport, const Sleeper& sleep) {
  const auto outcome =
      post_with_retry(transport, "/chat/completions", chat_request_body(config, prompt),
                      config.retry_policy(fnv1a64(prompt)), sleep);
  ChatResult result;
  result.attempts = outcome.attempts;
  result.delays = outcome.delays;
  try {
    const auto reply = json::parse(outcome.response.body);
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw UpstreamError("message content is not a string");
    result.content = content.get<std::string>();
  } catch (const json::exception& e) {
    throw UpstreamError(std::string("non-conforming chat completion body: ") + e.what(),
                        outcome.attempts, outcome.response.status);
  }
  return result;
}

namespace {

// Interior of the first ``` fence; an unterminated fence runs to the end.
std::optional<std::string_view> fenced_interior(std::string_view raw) {
  const auto open = raw.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  auto body_start = raw.find('\n', open + 3);
  if (body_start == std::string_view::npos) return std::string_view{};
  ++body_start;
  const auto close = raw.find("```", body_start);
  if (close == std::string_view::npos) return raw.substr(body_start);
  return raw.substr(body_start, close - body_start);
}

struct ArrayScan {
  bool closed = false;
  std::size_t end = 0;  // one past the closing ']' when closed
  // One past the '}' of the last complete top-level object, if any.
  std::optional<std::size_t> last_object_end;
};

// String/escape-aware bracket matching starting at s[start] == '['.
ArrayScan scan_array(std::string_view s, std::size_t start) {
  ArrayScan scan;
  std::vector<char> stack;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_string = true;
        break;
      case '[':
      case '{':
        stack.push_back(c);
        break;
      case ']':
      case '}': {
        const char want = c == ']' ? '[' : '{';
        if (stack.empty() || stack.back() != want) return scan;  // malformed nesting
        stack.pop_back();
        if (stack.empty()) {
          scan.closed = true;
          scan.end = i + 1;
          return scan;
        }
        if (c == '}' && stack.size() == 1) scan.last_object_end = i + 1;
        break;
      }
      default:
        break;
    }
  }
  return scan;
}

std::optional<json> try_parse(std::string_view text) {
  json j = json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_array()) return std::nullopt;
  return j;
}

std::vector<GeneratedQuery> extract_queries(const json& array) {
  std::vector<GeneratedQuery> out;
  for (const auto& el : array) {
    if (!el.is_object()) continue;
    const auto ins = el.find("instruction");
    if (ins == el.end() || !ins->is_string()) continue;
    GeneratedQuery q;
    q.instruction = trim(ins->get<std::string>());
    if (q.instruction.empty()) continue;
    if (const auto in = el.find("input"); in != el.end() && !in->is_null()) {
      q.input = in->is_string() ? in->get<std::string>() : in->dump();
    }
    out.push_back(std::move(q));
  }
  return out;
}

// Tries every '[' in order; returns the first array yielding a valid query.
std::optional<std::vector<GeneratedQuery>> parse_region(std::string_view s, bool* saw_array) {
  for (std::size_t pos = s.find('['); pos != std::string_view::npos; pos = s.find('[', pos + 1)) {
    const ArrayScan scan = scan_array(s, pos);
    std::optional<json> parsed;
    if (scan.closed) parsed = try_parse(s.substr(pos, scan.end - pos));
    if (!parsed && scan.last_object_end) {
      std::string repaired(s.substr(pos, *scan.last_object_end - pos));
      repaired += ']';
      parsed = try_parse(repaired);
    }
    if (!parsed) continue;
    *saw_array = true;
    auto queries = extract_queries(*parsed);
    if (!queries.empty()) return queries;
  }
  return std::nullopt;
}

}  // namespace

std::vector<GeneratedQuery> parse_generated_queries(std::string_view raw) {
  bool saw_array = false;
  if (const auto fenced = fenced_interior(raw)) {
    if (auto q = parse_region(*fenced, &saw_array)) return *q;
  }
  if (auto q = parse_region(raw, &saw_array)) return *q;
  if (saw_array) throw ParseError("no_valid_objects", "array contained no usable instruction");
  throw ParseError("no_array", "no JSON array found in teacher output");
}

std::string serialize_generated_queries(const std::vector<GeneratedQuery>& queries) {
  ordered_json arr = ordered_json::array();
  for (const auto& q : queries) {
    arr.push_back({{"instruction", q.instruction}, {"input", q.input}});
  }
  return arr.dump();
}

std::size_t GenerationReport::total_kept() const {
  std::size_t total = 0;
  for (const auto& c : clusters) total += c.kept;
  return total;
}

std::size_t GenerationReport::failed_clusters() const {
  return static_cast<std::size_t>(
      std::count_if(clusters.begin(), clusters.end(),
                    [](const ClusterOutcome& c) { return c.status == "failed"; }));
}

ordered_json GenerationReport::to_json() const {
  ordered_json j;
  j["template_version"] = template_version;
  j["template_hash"] = template_hash;
  j["model"] = model;
  j["temperature"] = temperature;
  j["max_tokens"] = max_tokens;
  j["examples_per_cluster"] = examples_per_cluster;
  j["queries_per_cluster"] = queries_per_cluster;
  j["seed"] = seed;
  j["deterministic"] = deterministic;
  j["total_requested"] = clusters.size() * queries_per_cluster;
  j["total_kept"] = total_kept();
  j["failed_clusters"] = failed_clusters();
  j["clusters"] = ordered_json::array();
  for (const auto& c : clusters) {
    ordered_json row;
    row["cluster_id"] = c.cluster_id;
    row["examples"] = c.examples;
    row["requested"] = c.requested;
    row["received"] = c.received;
    row["kept"] = c.kept;
    row["shortfall"] = c.shortfall;
    row["attempts"] = c.attempts;
    row["status"] = c.status;
    if (!c.error.empty()) row["error"] = c.error;
    j["clusters"].push_back(std::move(row));
  }
  return j;
}

GenerationResult generate_query_set(const RetainedClustering& retained,
                                    const TeacherEndpointConfig& config,
                                    const GenerationParams& params, HttpTransport& transport,
                                    const Sleeper& sleep) {
  config.validate();
  if (retained.retained_k == 0) throw InputError("empty_clustering", "no retained clusters");
  const std::size_t m = params.queries_per_cluster;

  std::vector<std::vector<std::string>> members(retained.retained_k);
  for (std::size_t i = 0; i < retained.pool.size(); ++i) {
    members[static_cast<std::size_t>(retained.assignments[i])].push_back(retained.pool[i].text);
  }

  const std::size_t k = retained.retained_k;
  std::vector<ClusterOutcome> outcomes(k);
  std::vector<std::vector<GeneratedQuery>> kept(k);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t c = next.fetch_add(1); c < k; c = next.fetch_add(1)) {
      ClusterOutcome& out = outcomes[c];
      out.cluster_id = static_cast<int>(c);
      out.requested = m;
      try {
        const auto prompt =
            build_cluster_prompt(members[c], params.examples_per_cluster, m,
                                 derive_seed(params.seed, c), static_cast<int>(c));
        out.examples = prompt.example_texts.size();
        const auto reply = chat_complete(config, prompt.rendered, transport, sleep);
        out.attempts = reply.attempts;
        auto parsed = parse_generated_queries(reply.content);
        out.received = parsed.size();
        if (parsed.size() > m) parsed.resize(m);
        for (auto& q : parsed) q.cluster_id = static_cast<int>(c);
        out.kept = parsed.size();
        out.shortfall = m - out.kept;
        out.status = out.shortfall == 0 ? "ok" : "shortfall";
        kept[c] = std::move(parsed);
      } catch (const UpstreamError& e) {
        out.attempts = e.attempts();
        out.status = "failed";
        out.error = e.what();
        out.shortfall = m;
      } catch (const Error& e) {
        out.status = "failed";
        out.error = e.what();
        out.shortfall = m;
      }
    }
  };

  const std::size_t threads = std::min(config.max_concurrency, k);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  GenerationResult result;
  auto& report = result.report;
  report.template_version = std::string(kPromptTemplateVersion);
  report.template_hash = prompt_template_hash();
  report.model = config.model_name;
  report.temperature = config.temperature;
  report.max_tokens = config.max_tokens;
  report.examples_per_cluster = params.examples_per_cluster;
  report.queries_per_cluster = m;
  report.seed = params.seed;
  report.deterministic = params.deterministic_backend;
  report.clusters = std::move(outcomes);

  if (report.failed_clusters() == k) {
    throw GenerationFailedError(
        "query generation failed for every cluster; first error: " + report.clusters.front().error,
        report);
  }

  std::size_t id = 0;
  for (std::size_t c = 0; c < k; ++c) {
    for (auto& g : kept[c]) {
      Query q;
      q.id = id++;
      q.instruction = std::move(g.instruction);
      q.input = std::move(g.input);
      q.text = compose_query_text(q.instruction, q.input);
      q.source = QuerySource::kGenerated;
      q.cluster_id = static_cast<int>(c);
      result.queries.push_back(std::move(q));
    }
  }
  return result;
}

}  // namespace cliq
