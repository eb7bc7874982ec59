#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "cliq/corpus.hpp"
#include "cliq/matrix.hpp"

namespace cliq {

struct ClusteringConfig {
  std::size_t k = 100;
  std::uint64_t seed = 42;
  // 0 selects min(1000, n/10), clamped to [1, n].
  std::size_t minibatch_size = 0;
  std::size_t max_iterations = 100;
  std::size_t min_cluster_size = 5;
  // Early stop once no centroid moves further than this in one step.
  double tolerance = 1e-6;
};

// Batch size actually used for a pool of n points.
std::size_t effective_minibatch_size(const ClusteringConfig& config, std::size_t n);

struct ClusterModel {
  std::size_t k = 0;
  Matrix centroids;               // k x d
  std::vector<int> assignments;   // length n, each in [0, k)
  std::vector<std::size_t> sizes; // length k
  double inertia = 0.0;
  std::size_t iterations_run = 0;
  std::size_t minibatch_size = 0;
};

// Mini-batch k-means (per-centroid learning rate 1/count) seeded with
// k-means++ over a sample, finished by one full nearest-centroid pass.
// Single-threaded and deterministic for a given (X, config).
ClusterModel minibatch_kmeans(const Matrix& X, const ClusteringConfig& config);

// Nearest centroid by squared Euclidean distance, lowest index on ties.
std::vector<int> assign(const Matrix& X, const Matrix& centroids);

// Sum of squared distances from each point to its assigned centroid.
double inertia(const Matrix& X, const Matrix& centroids, const std::vector<int>& labels);

struct RetainedClustering {
  std::size_t min_size = 0;
  std::size_t original_k = 0;
  std::size_t retained_k = 0;
  // Indexed by original cluster id; nullopt for dropped clusters.
  std::vector<std::optional<int>> old_to_new;
  // Indexed by retained id.
  std::vector<int> new_to_old;
  std::vector<std::size_t> sizes;
  // Surviving queries in ascending original id order, with their new labels.
  std::vector<std::size_t> query_ids;
  std::vector<int> assignments;
  QueryPool pool;  // surviving sub-pool; cluster_id set to the retained id
  std::size_t dropped_queries = 0;
};

// Drops clusters with fewer than min_size members (and their queries) and
// re-indexes survivors contiguously in ascending original-id order.
// Throws AllClustersDroppedError when nothing survives.
RetainedClustering filter_small_clusters(const ClusterModel& model, const QueryPool& pool,
                                         std::size_t min_size);

// Rows of X for the retained queries, in RetainedClustering::query_ids order.
Matrix select_rows(const Matrix& X, const std::vector<std::size_t>& rows);

}  // namespace cliq
