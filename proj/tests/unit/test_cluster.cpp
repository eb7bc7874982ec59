#include <doctest.h>

#include <cmath>
#include <limits>

#include "cliq/cluster.hpp"
#include "cliq/error.hpp"
#include "cliq/random.hpp"
#include "oracles.hpp"

using namespace cliq;

namespace {

QueryPool stub_pool(std::size_t n) {
  std::vector<Query> qs(n);
  for (std::size_t i = 0; i < n; ++i) {
    qs[i].id = i;
    qs[i].text = "q" + std::to_string(i);
  }
  return QueryPool(qs);
}

ClusterModel model_with(std::vector<int> assignments, std::size_t k) {
  ClusterModel m;
  m.k = k;
  m.centroids = Matrix(k, 2);
  m.sizes.assign(k, 0);
  for (int a : assignments) ++m.sizes[static_cast<std::size_t>(a)];
  m.assignments = std::move(assignments);
  return m;
}

}  // namespace

TEST_CASE("effective mini-batch size") {
  ClusteringConfig c;
  CHECK(effective_minibatch_size(c, 50000) == 1000);
  CHECK(effective_minibatch_size(c, 500) == 50);
  CHECK(effective_minibatch_size(c, 5) == 1);
  c.minibatch_size = 64;
  CHECK(effective_minibatch_size(c, 10) == 10);
}

TEST_CASE("separated blobs are recovered and match full-batch Lloyd") {
  const auto blobs = oracle::gaussian_blobs(4, 60, 8, 6.0, 0.3, 9);
  ClusteringConfig c;
  c.k = 4;
  const auto model = minibatch_kmeans(blobs.points, c);
  CHECK(model.assignments.size() == 240);
  CHECK(oracle::adjusted_rand_index(model.assignments, blobs.labels) > 0.99);
  const auto lloyd = oracle::lloyd_kmeans(blobs.points, model.centroids);
  CHECK(oracle::adjusted_rand_index(model.assignments, lloyd) > 0.99);
  std::size_t total = 0;
  for (auto s : model.sizes) total += s;
  CHECK(total == 240);
}

TEST_CASE("clustering is deterministic for a fixed seed") {
  const auto blobs = oracle::gaussian_blobs(3, 40, 5, 3.0, 0.8, 1);
  ClusteringConfig c;
  c.k = 3;
  const auto a = minibatch_kmeans(blobs.points, c);
  const auto b = minibatch_kmeans(blobs.points, c);
  CHECK(a.centroids == b.centroids);
  CHECK(a.assignments == b.assignments);
  CHECK(a.inertia == b.inertia);
}

TEST_CASE("final assignment is locally optimal") {
  // Moving any single point to another centroid never lowers inertia.
  const auto blobs = oracle::gaussian_blobs(3, 15, 4, 1.0, 0.7, 4);
  ClusteringConfig c;
  c.k = 5;
  const auto m = minibatch_kmeans(blobs.points, c);
  CHECK(m.inertia == doctest::Approx(inertia(blobs.points, m.centroids, m.assignments)));
  for (std::size_t i = 0; i < blobs.points.rows(); ++i) {
    for (int alt = 0; alt < 5; ++alt) {
      auto moved = m.assignments;
      moved[i] = alt;
      REQUIRE(inertia(blobs.points, m.centroids, moved) >= m.inertia - 1e-12);
    }
  }
}

TEST_CASE("K equal to n puts every point in its own cluster") {
  const auto blobs = oracle::gaussian_blobs(2, 3, 3, 5.0, 0.5, 2);
  ClusteringConfig c;
  c.k = 6;
  const auto m = minibatch_kmeans(blobs.points, c);
  for (auto s : m.sizes) CHECK(s == 1);
  CHECK(m.inertia == doctest::Approx(0.0));
}

TEST_CASE("clustering input errors") {
  ClusteringConfig c;
  c.k = 10;
  CHECK_THROWS_AS(minibatch_kmeans(Matrix(5, 2), c), InputError);
  c.k = 0;
  CHECK_THROWS_AS(minibatch_kmeans(Matrix(5, 2), c), InputError);
  c.k = 2;
  Matrix bad(4, 2, 0.5);
  bad(2, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(minibatch_kmeans(bad, c), InputError);
}

TEST_CASE("assign breaks ties toward the lowest index") {
  Matrix X(1, 2);
  Matrix C(2, 2);
  C(0, 0) = 1.0;
  C(1, 0) = -1.0;
  CHECK(assign(X, C)[0] == 0);
  CHECK_THROWS_AS(assign(X, Matrix(2, 3)), InputError);
  CHECK_THROWS_AS(assign(X, Matrix()), InputError);
}

TEST_CASE("small clusters are dropped and survivors re-indexed") {
  // Sizes: c0=3, c1=1, c2=2, c3=4.
  const auto m = model_with({0, 3, 1, 0, 2, 3, 3, 0, 2, 3}, 4);
  const auto r = filter_small_clusters(m, stub_pool(10), 2);
  CHECK(r.original_k == 4);
  CHECK(r.retained_k == 3);
  CHECK(r.new_to_old == std::vector<int>{0, 2, 3});
  CHECK(r.old_to_new[1] == std::nullopt);
  CHECK(r.old_to_new[3] == 2);
  CHECK(r.sizes == std::vector<std::size_t>{3, 2, 4});
  CHECK(r.dropped_queries == 1);
  CHECK(r.query_ids == std::vector<std::size_t>{0, 1, 3, 4, 5, 6, 7, 8, 9});
  REQUIRE(r.pool.size() == 9);
  for (std::size_t i = 0; i < r.pool.size(); ++i) {
    CHECK(r.pool[i].cluster_id == r.assignments[i]);
    CHECK(r.pool[i].id == r.query_ids[i]);
  }
}

TEST_CASE("min_size 1 keeps every non-empty cluster") {
  const auto m = model_with({0, 0, 2}, 3);
  const auto r = filter_small_clusters(m, stub_pool(3), 1);
  CHECK(r.retained_k == 2);
  CHECK(r.dropped_queries == 0);
}

TEST_CASE("filter errors") {
  const auto m = model_with({0, 1, 2}, 3);
  CHECK_THROWS_AS(filter_small_clusters(m, stub_pool(3), 2), AllClustersDroppedError);
  CHECK_THROWS_AS(filter_small_clusters(m, stub_pool(4), 1), InputError);
  CHECK_THROWS_AS(filter_small_clusters(m, stub_pool(3), 0), InputError);
}

TEST_CASE("property: retained sizes partition the surviving queries") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t k = 2 + rng.below(8);
    std::vector<int> labels(30 + rng.below(50));
    for (auto& l : labels) l = static_cast<int>(rng.below(k));
    const auto m = model_with(labels, k);
    const std::size_t min_size = 1 + rng.below(6);
    try {
      const auto r = filter_small_clusters(m, stub_pool(labels.size()), min_size);
      std::size_t sum = 0;
      for (auto s : r.sizes) {
        CHECK(s >= min_size);
        sum += s;
      }
      CHECK(sum == r.query_ids.size());
      CHECK(sum + r.dropped_queries == labels.size());
      for (std::size_t i = 0; i < r.query_ids.size(); ++i) {
        CHECK(r.new_to_old[static_cast<std::size_t>(r.assignments[i])] == labels[r.query_ids[i]]);
      }
    } catch (const AllClustersDroppedError&) {
      for (auto s : m.sizes) CHECK(s < min_size);
    }
  }
}

TEST_CASE("select_rows copies rows in order") {
  Matrix X(3, 1);
  X(0, 0) = 10;
  X(1, 0) = 11;
  X(2, 0) = 12;
  const auto s = select_rows(X, {2, 0});
  CHECK(s(0, 0) == 12);
  CHECK(s(1, 0) == 10);
}
