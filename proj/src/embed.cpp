#include "cliq/embed.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include <nlohmann/json.hpp>

#include "cliq/error.hpp"
#include "cliq/random.hpp"

namespace cliq {

std::string_view to_string(EmbeddingBackendKind kind) {
  return kind == EmbeddingBackendKind::kLocalHash ? "local_hash" : "remote_api";
}

EmbeddingBackendKind parse_embedding_backend(std::string_view name) {
  if (name == "local_hash") return EmbeddingBackendKind::kLocalHash;
  if (name == "remote_api") return EmbeddingBackendKind::kRemoteApi;
  throw InputError("config", "unknown embedding backend \"" + std::string(name) + "\"");
}

void EmbeddingBackendConfig::validate() const {
  if (dim < 2) throw InputError("config", "embedding dim must be >= 2");
  if (batch_size < 1) throw InputError("config", "embedding batch size must be >= 1");
  if (max_text_length < 1) throw InputError("config", "max_text_length must be >= 1");
  if (max_in_flight < 1) throw InputError("config", "max_in_flight must be >= 1");
  if (kind == EmbeddingBackendKind::kRemoteApi && base_url.empty()) {
    throw InputError("config", "remote embedding backend needs a base URL");
  }
}

namespace {

// Byte length of the UTF-8 sequence starting with `lead` (1 for invalid bytes).
std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;
}

std::vector<std::string_view> split_code_points(std::string_view s) {
  std::vector<std::string_view> cps;
  for (std::size_t i = 0; i < s.size();) {
    const std::size_t len = std::min(utf8_length(static_cast<unsigned char>(s[i])), s.size() - i);
    cps.push_back(s.substr(i, len));
    i += len;
  }
  return cps;
}

bool is_word_byte(unsigned char c) {
  return c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z');
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace

std::vector<std::string> hash_features(std::string_view text) {
  const std::string lower = ascii_lower(text);
  std::vector<std::string> features;

  std::string word;
  for (unsigned char c : lower) {
    if (is_word_byte(c)) {
      word.push_back(static_cast<char>(c));
    } else if (!word.empty()) {
      features.push_back("w:" + word);
      word.clear();
    }
  }
  if (!word.empty()) features.push_back("w:" + word);

  // Trigrams over the text with whitespace runs collapsed to one space.
  std::string collapsed;
  for (char c : lower) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (space) {
      if (!collapsed.empty() && collapsed.back() != ' ') collapsed.push_back(' ');
    } else {
      collapsed.push_back(c);
    }
  }
  if (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();
  const auto cps = split_code_points(collapsed);
  for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
    std::string tri = "c:";
    for (std::size_t k = 0; k < 3; ++k) tri.append(cps[i + k]);
    features.push_back(std::move(tri));
  }
  return features;
}

EmbeddingMatrix embed_local(std::span<const std::string> texts, std::size_t dim,
                            std::uint64_t seed) {
  if (texts.empty()) throw InputError("empty_input", "embed_local needs at least one text");
  if (dim < 2) throw InputError("config", "embedding dim must be >= 2");
  const std::uint64_t basis = splitmix64(seed ^ 0xcbf29ce484222325ULL);
  EmbeddingMatrix out(texts.size(), dim);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto row = out.row(i);
    const auto features = hash_features(texts[i]);
    for (const auto& f : features) {
      const std::uint64_t h = fnv1a64(f, basis);
      const std::size_t bucket = static_cast<std::size_t>(h % dim);
      const double sign = (splitmix64(h) >> 63) != 0 ? -1.0 : 1.0;
      row[bucket] += sign;
    }
    if (!features.empty()) {
      const double count = static_cast<double>(features.size());
      for (double& x : row) x /= count;
    }
    normalize_or_e1(row);
  }
  return out;
}

namespace {

struct BatchResult {
  std::vector<std::vector<double>> rows;
};

BatchResult parse_embedding_reply(const std::string& body, std::size_t expected) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw UpstreamError(std::string("embedding reply is not JSON: ") + e.what());
  }
  if (!j.contains("data") || !j["data"].is_array()) {
    throw UpstreamError("embedding reply has no \"data\" array");
  }
  const auto& data = j["data"];
  std::vector<std::optional<std::vector<double>>> slots(expected);
  for (std::size_t pos = 0; pos < data.size(); ++pos) {
    const auto& item = data[pos];
    std::size_t index = pos;
    if (item.contains("index")) {
      if (!item["index"].is_number_integer()) throw UpstreamError("non-integer embedding index");
      const auto raw = item["index"].get<long long>();
      if (raw < 0) throw UpstreamError("negative embedding index");
      index = static_cast<std::size_t>(raw);
    }
    if (index >= expected) {
      throw UpstreamError("embedding index " + std::to_string(index) + " out of range");
    }
    if (!item.contains("embedding") || !item["embedding"].is_array()) {
      throw UpstreamError("embedding entry " + std::to_string(index) + " has no vector");
    }
    std::vector<double> v;
    v.reserve(item["embedding"].size());
    for (const auto& x : item["embedding"]) {
      if (!x.is_number()) throw UpstreamError("non-numeric embedding component");
      v.push_back(x.get<double>());
    }
    slots[index] = std::move(v);
  }
  BatchResult out;
  out.rows.reserve(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    if (!slots[i]) throw UpstreamError("missing embedding for index " + std::to_string(i));
    out.rows.push_back(std::move(*slots[i]));
  }
  return out;
}

}  // namespace

RemoteEmbedding embed_remote(std::span<const std::string> texts,
                             const EmbeddingBackendConfig& config, HttpTransport& transport,
                             const Sleeper& sleep) {
  if (texts.empty()) throw InputError("empty_input", "embed_remote needs at least one text");
  if (config.batch_size < 1) throw InputError("config", "embedding batch size must be >= 1");

  const std::size_t n = texts.size();
  const std::size_t batches = (n + config.batch_size - 1) / config.batch_size;
  std::vector<BatchResult> results(batches);
  std::vector<std::exception_ptr> errors(batches);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t b = next.fetch_add(1); b < batches; b = next.fetch_add(1)) {
      try {
        const std::size_t begin = b * config.batch_size;
        const std::size_t end = std::min(n, begin + config.batch_size);
        nlohmann::json body;
        body["model"] = config.model;
        body["input"] = nlohmann::json::array();
        for (std::size_t i = begin; i < end; ++i) {
          body["input"].push_back(truncate_utf8(texts[i], config.max_text_length));
        }
        const auto outcome =
            post_with_retry(transport, "/embeddings", body.dump(), config.retry, sleep);
        results[b] = parse_embedding_reply(outcome.response.body, end - begin);
      } catch (...) {
        errors[b] = std::current_exception();
      }
    }
  };

  const std::size_t threads = std::min(std::max<std::size_t>(config.max_in_flight, 1), batches);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const std::size_t dim = results.front().rows.front().size();
  if (dim == 0) throw UpstreamError("server returned empty embedding vectors");
  RemoteEmbedding out;
  out.matrix = EmbeddingMatrix(n, dim);
  out.requests = batches;
  std::size_t row = 0;
  for (auto& batch : results) {
    for (auto& v : batch.rows) {
      if (v.size() != dim) {
        throw UpstreamError("embedding dimension mismatch: expected " + std::to_string(dim) +
                            ", got " + std::to_string(v.size()) + " at row " +
                            std::to_string(row));
      }
      auto dst = out.matrix.row(row);
      std::copy(v.begin(), v.end(), dst.begin());
      if (!normalize_or_e1(dst)) out.zero_rows.push_back(row);
      ++row;
    }
  }
  return out;
}

EmbeddingMatrix embed_texts(std::span<const std::string> texts,
                            const EmbeddingBackendConfig& config, HttpTransport* transport,
                            const Sleeper& sleep, std::vector<std::string>* warnings) {
  config.validate();
  std::vector<std::string> clipped;
  clipped.reserve(texts.size());
  for (const auto& t : texts) clipped.push_back(truncate_utf8(t, config.max_text_length));

  if (config.kind == EmbeddingBackendKind::kLocalHash) {
    return embed_local(clipped, config.dim, config.seed);
  }
  if (transport == nullptr) throw InputError("config", "remote embedding needs a transport");
  auto remote = embed_remote(clipped, config, *transport, sleep);
  if (warnings) {
    for (std::size_t r : remote.zero_rows) {
      warnings->push_back("server returned an all-zero embedding for row " + std::to_string(r) +
                          "; replaced by e1");
    }
  }
  return std::move(remote.matrix);
}

std::string truncate_utf8(std::string_view text, std::size_t max_chars) {
  std::size_t pos = 0;
  for (std::size_t count = 0; pos < text.size() && count < max_chars; ++count) {
    pos += utf8_length(static_cast<unsigned char>(text[pos]));
  }
  return std::string(text.substr(0, std::min(pos, text.size())));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InputError("dimension_mismatch", "cosine_similarity: " + std::to_string(a.size()) +
                                               " vs " + std::to_string(b.size()));
  }
  return std::clamp(dot(a, b), -1.0, 1.0);
}

}  // namespace cliq
