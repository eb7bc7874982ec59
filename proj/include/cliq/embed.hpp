#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cliq/http.hpp"
#include "cliq/matrix.hpp"

namespace cliq {

enum class EmbeddingBackendKind { kLocalHash, kRemoteApi };

std::string_view to_string(EmbeddingBackendKind kind);
EmbeddingBackendKind parse_embedding_backend(std::string_view name);

struct EmbeddingBackendConfig {
  EmbeddingBackendKind kind = EmbeddingBackendKind::kLocalHash;
  std::size_t dim = 256;  // local backend only
  std::uint64_t seed = 0;
  std::string base_url;
  std::string model = "sentence-transformers/all-MiniLM-L6-v2";
  std::size_t batch_size = 64;
  // Character stand-in for a 512-token encoder limit.
  std::size_t max_text_length = 2000;
  std::size_t max_in_flight = 4;
  RetryPolicy retry;

  void validate() const;
};

// Lowercased word unigrams and character trigrams, tagged so the two
// families never collide. Exposed for testing.
std::vector<std::string> hash_features(std::string_view text);

// Deterministic hashed-feature embedding: each feature adds +-1 to a seeded
// bucket, the sum is divided by the feature count and l2-normalized. A text
// without features (or whose buckets cancel) maps to e1.
EmbeddingMatrix embed_local(std::span<const std::string> texts, std::size_t dim,
                            std::uint64_t seed);

struct RemoteEmbedding {
  EmbeddingMatrix matrix;
  // Rows the server returned as all-zero; they were replaced by e1.
  std::vector<std::size_t> zero_rows;
  std::size_t requests = 0;
};

// POST {base}/embeddings in batches of config.batch_size with up to
// config.max_in_flight batches concurrently. Row order always follows input
// order. Throws UpstreamError on transport failure or malformed replies.
RemoteEmbedding embed_remote(std::span<const std::string> texts,
                             const EmbeddingBackendConfig& config, HttpTransport& transport,
                             const Sleeper& sleep);

// Dispatches on config.kind after truncating each text to max_text_length.
// `transport` may be null for the local backend.
EmbeddingMatrix embed_texts(std::span<const std::string> texts,
                            const EmbeddingBackendConfig& config, HttpTransport* transport,
                            const Sleeper& sleep, std::vector<std::string>* warnings = nullptr);

// Keeps at most max_chars UTF-8 code points.
std::string truncate_utf8(std::string_view text, std::size_t max_chars);

// Dot product of two unit vectors, clamped to [-1, 1].
double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace cliq
