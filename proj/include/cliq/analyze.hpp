#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cliq/corpus.hpp"
#include "cliq/matrix.hpp"

namespace cliq {

enum class SelectionStrategy { kRandomUniform, kCliqRoundRobin };

std::string_view to_string(SelectionStrategy s);
SelectionStrategy parse_selection_strategy(std::string_view name);

struct HitRateCurve {
  SelectionStrategy strategy = SelectionStrategy::kRandomUniform;
  std::vector<std::size_t> budgets;
  std::vector<double> mean_covered;
  std::vector<double> std_covered;  // sample stddev over trials; 0 for one trial
  std::size_t total_clusters = 0;
  // per_trial[t][b]: clusters covered in trial t at budgets[b].
  std::vector<std::vector<std::size_t>> per_trial;
};

// One query per cluster in ascending cluster-id order, cycling, skipping
// exhausted clusters. Returns pool indices; within a cluster, members are
// taken in ascending index order.
std::vector<std::size_t> round_robin_selection(std::span<const int> labels, std::size_t budget);

// Clusters covered by at least one query as the budget grows. random_uniform
// draws one permutation per trial (per-trial derived seeds) and reads every
// budget off its prefix, so coverage is monotone within each trial.
HitRateCurve hit_rate_curve(std::span<const int> labels, SelectionStrategy strategy,
                            std::span<const std::size_t> budgets, std::size_t trials,
                            std::uint64_t seed);

struct RedundancyOptions {
  std::size_t exact_threshold = 2000;
  std::size_t sample_pairs = 10000;
  std::uint64_t seed = 0;
};

struct RedundancyReport {
  std::map<int, double> per_cluster;
  std::map<int, std::size_t> sizes;
  // Unweighted mean of per_cluster; empty when no cluster has two members.
  std::optional<double> pooled_mean;
  std::vector<int> excluded;  // clusters with fewer than two members
};

// Mean pairwise cosine similarity within each cluster: exact over all
// unordered pairs up to exact_threshold members, seeded pair sampling above.
// Rows with a negative label are ignored.
RedundancyReport intra_cluster_redundancy(const Matrix& X, std::span<const int> labels,
                                          const RedundancyOptions& options = {});

struct CentroidDistance {
  std::size_t query_index = 0;
  int cluster_id = 0;
  double distance = 0.0;  // 1 - cos(x, centroid)
};

struct CentroidDistanceResult {
  std::vector<CentroidDistance> distances;
  std::vector<std::size_t> skipped;  // queries whose centroid has zero norm
};

CentroidDistanceResult centroid_distance_distribution(const Matrix& X, std::span<const int> labels,
                                                      const Matrix& centroids);

struct AllocationHistogram {
  std::map<int, std::size_t> counts;
  std::size_t total = 0;
  // Population stddev / mean of the counts; 0 for an empty histogram.
  double coefficient_of_variation = 0.0;
};

// When num_clusters is given, clusters 0..num_clusters-1 are all present
// (zero counts included) so the CV reflects clusters that were never hit.
AllocationHistogram allocation_histogram(const QueryPool& selected,
                                         std::optional<std::size_t> num_clusters = std::nullopt);
AllocationHistogram allocation_histogram(std::span<const int> labels,
                                         std::optional<std::size_t> num_clusters = std::nullopt);

struct Projection2D {
  Matrix coords;  // n x 2
  Matrix axes;    // 2 x d, unit rows (a zero row when rank-deficient)
  std::vector<double> mean;
  std::array<double, 2> variances{0.0, 0.0};
  std::array<std::size_t, 2> iterations{0, 0};
  bool rank_deficient = false;
};

// Top-2 principal directions by seeded power iteration with deflation
// (tolerance 1e-9, at most 1000 iterations). Each axis is signed so its
// first nonzero loading is positive.
Projection2D pca_project_2d(const Matrix& X, std::uint64_t seed = 0);

}  // namespace cliq
