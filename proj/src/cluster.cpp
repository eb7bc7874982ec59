#include "cliq/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cliq/error.hpp"
#include "cliq/random.hpp"

namespace cliq {

std::size_t effective_minibatch_size(const ClusteringConfig& config, std::size_t n) {
  std::size_t b = config.minibatch_size;
  if (b == 0) b = std::min<std::size_t>(1000, n / 10);
  return std::clamp<std::size_t>(b, 1, std::max<std::size_t>(n, 1));
}

namespace {

int nearest(std::span<const double> x, const Matrix& centroids, double* best_out = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(x, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (best_out) *best_out = best_d;
  return best;
}

// Greedy k-means++ over the rows listed in `sample`: each step draws
// 2 + floor(ln k) D^2-weighted candidates and keeps the one that lowers the
// potential most (first candidate wins ties).
Matrix kmeanspp(const Matrix& X, const std::vector<std::size_t>& sample, std::size_t k, Rng& rng) {
  Matrix centroids(k, X.cols());
  const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
  std::vector<double> d2(sample.size(), std::numeric_limits<double>::infinity());
  std::vector<double> candidate_d2(sample.size());
  std::vector<double> best_d2(sample.size());

  auto place = [&](std::size_t c, std::size_t pick) {
    const auto src = X.row(sample[pick]);
    std::copy(src.begin(), src.end(), centroids.row(c).begin());
  };

  const auto first = static_cast<std::size_t>(rng.below(sample.size()));
  place(0, first);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    d2[i] = squared_distance(X.row(sample[i]), X.row(sample[first]));
  }
  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t best_pick = 0;
    double best_potential = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trials; ++t) {
      // With zero potential every sample point duplicates a centroid.
      const std::size_t pick = total > 0.0 ? rng.weighted(d2, total)
                                           : static_cast<std::size_t>(rng.below(sample.size()));
      double potential = 0.0;
      for (std::size_t i = 0; i < sample.size(); ++i) {
        candidate_d2[i] =
            std::min(d2[i], squared_distance(X.row(sample[i]), X.row(sample[pick])));
        potential += candidate_d2[i];
      }
      if (potential < best_potential) {
        best_potential = potential;
        best_pick = pick;
        best_d2.swap(candidate_d2);
      }
    }
    place(c, best_pick);
    d2.swap(best_d2);
  }
  return centroids;
}

}  // namespace

ClusterModel minibatch_kmeans(const Matrix& X, const ClusteringConfig& config) {
  const std::size_t n = X.rows();
  if (config.k == 0) throw InputError("config", "k must be positive");
  if (n < config.k) {
    throw InputError("too_few_points", "minibatch_kmeans: n=" + std::to_string(n) + " < K=" +
                                           std::to_string(config.k));
  }
  if (!all_finite(X)) throw InputError("non_finite", "minibatch_kmeans: non-finite input");

  Rng rng(config.seed);
  const std::size_t batch = effective_minibatch_size(config, n);
  const std::size_t init_size = std::min(n, std::max(3 * batch, 3 * config.k));
  auto init_sample = rng.sample_without_replacement(n, init_size);
  std::sort(init_sample.begin(), init_sample.end());

  ClusterModel model;
  model.k = config.k;
  model.minibatch_size = batch;
  model.centroids = kmeanspp(X, init_sample, config.k, rng);

  std::vector<double> counts(config.k, 0.0);
  std::vector<int> batch_labels(batch);
  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    const auto idx = rng.sample_without_replacement(n, batch);
    for (std::size_t b = 0; b < batch; ++b) {
      batch_labels[b] = nearest(X.row(idx[b]), model.centroids);
    }
    const Matrix before = model.centroids;
    for (std::size_t b = 0; b < batch; ++b) {
      const auto c = static_cast<std::size_t>(batch_labels[b]);
      counts[c] += 1.0;
      const double eta = 1.0 / counts[c];
      auto centroid = model.centroids.row(c);
      const auto x = X.row(idx[b]);
      for (std::size_t j = 0; j < centroid.size(); ++j) {
        centroid[j] = (1.0 - eta) * centroid[j] + eta * x[j];
      }
    }
    model.iterations_run = it + 1;
    double max_shift = 0.0;
    for (std::size_t c = 0; c < config.k; ++c) {
      max_shift = std::max(max_shift, squared_distance(before.row(c), model.centroids.row(c)));
    }
    if (std::sqrt(max_shift) < config.tolerance) break;
  }

  model.assignments = assign(X, model.centroids);
  model.sizes.assign(config.k, 0);
  for (int a : model.assignments) ++model.sizes[static_cast<std::size_t>(a)];
  model.inertia = inertia(X, model.centroids, model.assignments);
  return model;
}

std::vector<int> assign(const Matrix& X, const Matrix& centroids) {
  if (centroids.rows() == 0) throw InputError("empty_centroids", "assign: no centroids");
  if (X.cols() != centroids.cols()) {
    throw InputError("dimension_mismatch", "assign: points have dim " + std::to_string(X.cols()) +
                                               ", centroids " + std::to_string(centroids.cols()));
  }
  std::vector<int> labels(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) labels[i] = nearest(X.row(i), centroids);
  return labels;
}

double inertia(const Matrix& X, const Matrix& centroids, const std::vector<int>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    total += squared_distance(X.row(i), centroids.row(static_cast<std::size_t>(labels[i])));
  }
  return total;
}

RetainedClustering filter_small_clusters(const ClusterModel& model, const QueryPool& pool,
                                         std::size_t min_size) {
  if (min_size == 0) throw InputError("config", "min_cluster_size must be positive");
  if (model.assignments.size() != pool.size()) {
    throw InputError("misaligned", "cluster assignments cover " +
                                       std::to_string(model.assignments.size()) +
                                       " queries but the pool has " + std::to_string(pool.size()));
  }
  RetainedClustering out;
  out.min_size = min_size;
  out.original_k = model.sizes.size();
  out.old_to_new.assign(model.sizes.size(), std::nullopt);
  for (std::size_t c = 0; c < model.sizes.size(); ++c) {
    if (model.sizes[c] >= min_size) {
      out.old_to_new[c] = static_cast<int>(out.new_to_old.size());
      out.new_to_old.push_back(static_cast<int>(c));
      out.sizes.push_back(model.sizes[c]);
    }
  }
  out.retained_k = out.new_to_old.size();
  if (out.retained_k == 0) {
    throw AllClustersDroppedError("every cluster has fewer than " + std::to_string(min_size) +
                                  " members");
  }

  // Queries are visited in ascending pool position; pool ids are in ingestion order.
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto old = static_cast<std::size_t>(model.assignments[i]);
    const auto mapped = out.old_to_new.at(old);
    if (!mapped) {
      ++out.dropped_queries;
      continue;
    }
    out.query_ids.push_back(i);
    out.assignments.push_back(*mapped);
    Query q = pool[i];
    q.cluster_id = *mapped;
    out.pool.push_back(std::move(q));
  }
  return out;
}

Matrix select_rows(const Matrix& X, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = X.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace cliq
