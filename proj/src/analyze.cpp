#include "cliq/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cliq/embed.hpp"
#include "cliq/error.hpp"
#include "cliq/random.hpp"

namespace cliq {

std::string_view to_string(SelectionStrategy s) {
  return s == SelectionStrategy::kRandomUniform ? "random_uniform" : "cliq_round_robin";
}

SelectionStrategy parse_selection_strategy(std::string_view name) {
  if (name == "random_uniform") return SelectionStrategy::kRandomUniform;
  if (name == "cliq_round_robin") return SelectionStrategy::kCliqRoundRobin;
  throw InputError("config", "unknown selection strategy \"" + std::string(name) + "\"");
}

namespace {

std::map<int, std::vector<std::size_t>> members_by_cluster(std::span<const int> labels) {
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) members[labels[i]].push_back(i);
  }
  return members;
}

}  // namespace

std::vector<std::size_t> round_robin_selection(std::span<const int> labels, std::size_t budget) {
  const auto members = members_by_cluster(labels);
  std::vector<std::size_t> picked;
  picked.reserve(budget);
  for (std::size_t round = 0; picked.size() < budget; ++round) {
    bool any = false;
    for (const auto& [cluster, ids] : members) {
      if (round >= ids.size()) continue;
      any = true;
      picked.push_back(ids[round]);
      if (picked.size() == budget) break;
    }
    if (!any) break;
  }
  return picked;
}

HitRateCurve hit_rate_curve(std::span<const int> labels, SelectionStrategy strategy,
                            std::span<const std::size_t> budgets, std::size_t trials,
                            std::uint64_t seed) {
  if (labels.empty()) throw InputError("empty_pool", "hit_rate_curve: empty pool");
  if (trials < 1) throw InputError("config", "hit_rate_curve: trials must be >= 1");
  for (int l : labels) {
    if (l < 0) throw InputError("unlabeled", "hit_rate_curve: negative cluster label");
  }
  for (std::size_t b : budgets) {
    if (b > labels.size()) {
      throw InputError("budget_exceeds_pool", "budget " + std::to_string(b) +
                                                  " exceeds pool size " +
                                                  std::to_string(labels.size()));
    }
  }

  HitRateCurve curve;
  curve.strategy = strategy;
  curve.budgets.assign(budgets.begin(), budgets.end());
  curve.total_clusters = std::set<int>(labels.begin(), labels.end()).size();
  const std::size_t max_budget =
      budgets.empty() ? 0 : *std::max_element(budgets.begin(), budgets.end());
  if (strategy == SelectionStrategy::kCliqRoundRobin) trials = 1;

  auto coverage_of_prefixes = [&](const std::vector<std::size_t>& order) {
    // covered_at[p] = clusters hit by order[0..p)
    std::vector<std::size_t> covered_at(order.size() + 1, 0);
    std::set<int> seen;
    for (std::size_t p = 0; p < order.size(); ++p) {
      seen.insert(labels[order[p]]);
      covered_at[p + 1] = seen.size();
    }
    std::vector<std::size_t> row;
    row.reserve(budgets.size());
    for (std::size_t b : budgets) row.push_back(covered_at[std::min(b, order.size())]);
    return row;
  };

  for (std::size_t t = 0; t < trials; ++t) {
    std::vector<std::size_t> order;
    if (strategy == SelectionStrategy::kCliqRoundRobin) {
      order = round_robin_selection(labels, max_budget);
    } else {
      Rng rng(derive_seed(seed, t));
      order = rng.sample_without_replacement(labels.size(), max_budget);
    }
    curve.per_trial.push_back(coverage_of_prefixes(order));
  }

  for (std::size_t b = 0; b < budgets.size(); ++b) {
    double sum = 0.0;
    for (const auto& row : curve.per_trial) sum += static_cast<double>(row[b]);
    const double mean = sum / static_cast<double>(trials);
    double ss = 0.0;
    for (const auto& row : curve.per_trial) {
      const double d = static_cast<double>(row[b]) - mean;
      ss += d * d;
    }
    curve.mean_covered.push_back(mean);
    curve.std_covered.push_back(trials > 1 ? std::sqrt(ss / static_cast<double>(trials - 1)) : 0.0);
  }
  return curve;
}

RedundancyReport intra_cluster_redundancy(const Matrix& X, std::span<const int> labels,
                                          const RedundancyOptions& options) {
  if (labels.size() != X.rows()) {
    throw InputError("misaligned", "intra_cluster_redundancy: " + std::to_string(labels.size()) +
                                       " labels for " + std::to_string(X.rows()) + " rows");
  }
  RedundancyReport report;
  double pooled = 0.0;
  for (const auto& [cluster, ids] : members_by_cluster(labels)) {
    const std::size_t s = ids.size();
    report.sizes[cluster] = s;
    if (s < 2) {
      report.excluded.push_back(cluster);
      continue;
    }
    double sum = 0.0;
    std::size_t pairs = 0;
    if (s <= options.exact_threshold) {
      for (std::size_t a = 0; a < s; ++a) {
        for (std::size_t b = a + 1; b < s; ++b) {
          sum += cosine_similarity(X.row(ids[a]), X.row(ids[b]));
          ++pairs;
        }
      }
    } else {
      Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(cluster)));
      for (std::size_t p = 0; p < options.sample_pairs; ++p) {
        const auto a = static_cast<std::size_t>(rng.below(s));
        auto b = static_cast<std::size_t>(rng.below(s - 1));
        if (b >= a) ++b;
        sum += cosine_similarity(X.row(ids[a]), X.row(ids[b]));
        ++pairs;
      }
    }
    const double mean = pairs ? sum / static_cast<double>(pairs) : 0.0;
    report.per_cluster[cluster] = mean;
    pooled += mean;
  }
  if (!report.per_cluster.empty()) {
    report.pooled_mean = pooled / static_cast<double>(report.per_cluster.size());
  }
  return report;
}

CentroidDistanceResult centroid_distance_distribution(const Matrix& X, std::span<const int> labels,
                                                      const Matrix& centroids) {
  if (labels.size() != X.rows()) {
    throw InputError("misaligned", "centroid_distance_distribution: label/row count mismatch");
  }
  if (centroids.cols() != X.cols()) {
    throw InputError("dimension_mismatch", "centroid_distance_distribution: dimension mismatch");
  }
  Matrix unit = centroids;
  std::vector<bool> usable(centroids.rows());
  for (std::size_t c = 0; c < unit.rows(); ++c) {
    const double n = norm(unit.row(c));
    usable[c] = n > 0.0 && std::isfinite(n);
    if (usable[c]) {
      for (double& v : unit.row(c)) v /= n;
    }
  }
  CentroidDistanceResult out;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= centroids.rows()) {
      throw InputError("bad_label", "label " + std::to_string(label) + " has no centroid");
    }
    if (!usable[static_cast<std::size_t>(label)]) {
      out.skipped.push_back(i);
      continue;
    }
    const double cos = cosine_similarity(X.row(i), unit.row(static_cast<std::size_t>(label)));
    out.distances.push_back({i, label, 1.0 - cos});
  }
  return out;
}

AllocationHistogram allocation_histogram(std::span<const int> labels,
                                         std::optional<std::size_t> num_clusters) {
  AllocationHistogram h;
  if (num_clusters) {
    for (std::size_t c = 0; c < *num_clusters; ++c) h.counts[static_cast<int>(c)] = 0;
  }
  for (int l : labels) {
    if (l < 0) throw InputError("unlabeled", "allocation_histogram: unlabeled query");
    ++h.counts[l];
    ++h.total;
  }
  if (h.counts.empty()) return h;
  const double k = static_cast<double>(h.counts.size());
  const double mean = static_cast<double>(h.total) / k;
  double ss = 0.0;
  for (const auto& [c, n] : h.counts) {
    const double d = static_cast<double>(n) - mean;
    ss += d * d;
  }
  h.coefficient_of_variation = mean > 0.0 ? std::sqrt(ss / k) / mean : 0.0;
  return h;
}

AllocationHistogram allocation_histogram(const QueryPool& selected,
                                         std::optional<std::size_t> num_clusters) {
  std::vector<int> labels;
  labels.reserve(selected.size());
  for (const auto& q : selected) {
    if (!q.cluster_id) {
      throw InputError("unlabeled", "allocation_histogram: query " + std::to_string(q.id) +
                                        " has no cluster");
    }
    labels.push_back(*q.cluster_id);
  }
  return allocation_histogram(labels, num_clusters);
}

namespace {

// w = Xc^T (Xc v)
std::vector<double> covariance_apply(const Matrix& Xc, const std::vector<double>& v) {
  std::vector<double> w(Xc.cols(), 0.0);
  for (std::size_t i = 0; i < Xc.rows(); ++i) {
    const auto r = Xc.row(i);
    const double p = dot(r, v);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] += p * r[j];
  }
  return w;
}

void orthogonalize(std::vector<double>& v, std::span<const double> against) {
  const double p = dot(v, against);
  for (std::size_t j = 0; j < v.size(); ++j) v[j] -= p * against[j];
}

void fix_sign(std::vector<double>& v) {
  for (double x : v) {
    if (std::abs(x) > 1e-12) {
      if (x < 0.0) {
        for (double& y : v) y = -y;
      }
      return;
    }
  }
}

}  // namespace

Projection2D pca_project_2d(const Matrix& X, std::uint64_t seed) {
  const std::size_t n = X.rows();
  const std::size_t d = X.cols();
  if (n < 3) throw InputError("too_few_points", "pca_project_2d needs at least 3 rows");
  if (d < 1) throw InputError("dimension_mismatch", "pca_project_2d: zero-width matrix");

  Projection2D out;
  out.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += X(i, j);
  }
  for (double& m : out.mean) m /= static_cast<double>(n);
  Matrix Xc = X;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) Xc(i, j) -= out.mean[j];
  }
  double total_ss = 0.0;
  for (double v : Xc.values()) total_ss += v * v;

  constexpr double kTolerance = 1e-9;
  constexpr std::size_t kMaxIterations = 1000;
  const double negligible = std::max(total_ss, 1e-300) * 1e-12;

  Rng rng(seed);
  out.axes = Matrix(2, d);
  for (std::size_t axis = 0; axis < 2; ++axis) {
    std::vector<double> v(d);
    for (double& x : v) x = rng.normal();
    if (axis == 1) orthogonalize(v, out.axes.row(0));
    if (!(norm(v) > 0.0)) {
      out.rank_deficient = true;
      break;
    }
    for (double& x : v) x /= norm(v);

    double lambda = 0.0;
    for (std::size_t it = 0; it < kMaxIterations; ++it) {
      auto w = covariance_apply(Xc, v);
      if (axis == 1) orthogonalize(w, out.axes.row(0));
      lambda = norm(w);
      out.iterations[axis] = it + 1;
      if (lambda <= negligible) break;
      for (double& x : w) x /= lambda;
      double diff = 0.0;
      for (std::size_t j = 0; j < d; ++j) diff += (w[j] - v[j]) * (w[j] - v[j]);
      v = std::move(w);
      if (std::sqrt(diff) < kTolerance) break;
    }
    if (lambda <= negligible) {
      out.rank_deficient = true;
      break;  // this axis and any later one stay zero
    }
    fix_sign(v);
    std::copy(v.begin(), v.end(), out.axes.row(axis).begin());
    out.variances[axis] = lambda / static_cast<double>(n);
  }

  out.coords = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    out.coords(i, 0) = dot(Xc.row(i), out.axes.row(0));
    out.coords(i, 1) = dot(Xc.row(i), out.axes.row(1));
  }
  return out;
}

}  // namespace cliq
