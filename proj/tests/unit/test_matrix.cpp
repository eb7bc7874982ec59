#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "cliq/error.hpp"
#include "cliq/matrix.hpp"
#include "cliq/random.hpp"
#include "fakes.hpp"

using namespace cliq;

TEST_CASE("fnv1a64 matches published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("derive_seed separates stages and indices") {
  CHECK(derive_seed(42, "embed") != derive_seed(42, "generate"));
  CHECK(derive_seed(42, "embed") == derive_seed(42, "embed"));
  CHECK(derive_seed(42, std::uint64_t{0}) != derive_seed(42, std::uint64_t{1}));
  CHECK(derive_seed(1, "embed") != derive_seed(2, "embed"));
}

TEST_CASE("Rng is reproducible and distributions stay in range") {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng r(11);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    REQUIRE(r.below(7) < 7);
  }
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("Rng::weighted never picks zero-weight entries") {
  Rng r(3);
  std::vector<double> w{0.0, 2.0, 0.0, 1.0};
  int hits[4] = {0, 0, 0, 0};
  for (int i = 0; i < 3000; ++i) ++hits[r.weighted(w, 3.0)];
  CHECK(hits[0] == 0);
  CHECK(hits[2] == 0);
  CHECK(hits[1] > hits[3]);
}

TEST_CASE("sampling without replacement yields distinct indices") {
  Rng r(5);
  auto s = r.sample_without_replacement(50, 20);
  CHECK(s.size() == 20);
  CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 20);
  auto p = r.permutation(30);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < 30; ++i) CHECK(p[i] == i);
  CHECK(r.sample_without_replacement(5, 5).size() == 5);
}

TEST_CASE("vector helpers") {
  std::vector<double> a{3.0, 4.0}, b{0.0, 0.0};
  CHECK(dot(a, a) == 25.0);
  CHECK(norm(a) == 5.0);
  CHECK(squared_distance(a, b) == 25.0);
  CHECK(normalize_or_e1(a));
  CHECK(a[0] == doctest::Approx(0.6));
  CHECK_FALSE(normalize_or_e1(b));
  CHECK(b[0] == 1.0);
  CHECK(b[1] == 0.0);
}

TEST_CASE("all_finite and rows_unit_norm") {
  Matrix m(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = 1.0;
  CHECK(rows_unit_norm(m));
  m(1, 1) = 2.0;
  CHECK_FALSE(rows_unit_norm(m));
  m(0, 1) = std::nan("");
  CHECK_FALSE(all_finite(m));
}

TEST_CASE("matrix files round-trip through float32") {
  testing::TempDir dir;
  Matrix m(3, 4);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) m(i, j) = 0.25 * static_cast<double>(i * 4 + j);
  }
  save_matrix(dir / "x.bin", m, MatrixMeta{3, 4, 99, "local_hash"});
  MatrixMeta meta;
  const Matrix back = load_matrix(dir / "x.bin", &meta);
  CHECK(back == m);
  CHECK(meta.rows == 3);
  CHECK(meta.dim == 4);
  CHECK(meta.seed == 99);
  CHECK(meta.backend == "local_hash");
  CHECK(meta_path_for(dir / "x.bin").filename() == "x.meta.json");
  CHECK(std::filesystem::file_size(dir / "x.bin") == 3 * 4 * 4);
}

TEST_CASE("matrix file errors") {
  testing::TempDir dir;
  CHECK_THROWS_AS(read_matrix_file(dir / "absent.bin", 1, 1), MissingArtifactError);
  Matrix m(2, 2, 1.0);
  write_matrix_file(dir / "m.bin", m);
  CHECK_THROWS_AS(read_matrix_file(dir / "m.bin", 3, 2), InputError);
  {
    std::ofstream(dir / "bad.meta.json") << "{ not json";
  }
  CHECK_THROWS_AS(read_matrix_meta(dir / "bad.meta.json"), InputError);
}
