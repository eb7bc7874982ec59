#include "cliq/matrix.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cliq/error.hpp"

namespace cliq {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

bool normalize_or_e1(std::span<double> v) {
  const double n = norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) {
    std::fill(v.begin(), v.end(), 0.0);
    if (!v.empty()) v[0] = 1.0;
    return false;
  }
  for (double& x : v) x /= n;
  return true;
}

bool all_finite(const Matrix& m) {
  for (double x : m.values()) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool rows_unit_norm(const Matrix& m, double tolerance) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (std::abs(norm(m.row(i)) - 1.0) > tolerance) return false;
  }
  return true;
}

namespace {

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

}  // namespace

void write_matrix_file(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("io", "cannot write " + path.string());
  std::vector<std::uint32_t> buf;
  buf.reserve(m.values().size());
  for (double x : m.values()) {
    buf.push_back(to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(x))));
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(std::uint32_t)));
}

Matrix read_matrix_file(const std::filesystem::path& path, std::size_t rows, std::size_t cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError(path.string());
  std::vector<std::uint32_t> buf(rows * cols);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(std::uint32_t)));
  if (in.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(std::uint32_t)) ||
      in.peek() != std::char_traits<char>::eof()) {
    throw InputError("matrix_size", "matrix file " + path.string() + " does not hold " +
                                        std::to_string(rows) + "x" + std::to_string(cols) +
                                        " float32 values");
  }
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    m.values()[i] = static_cast<double>(std::bit_cast<float>(to_little_endian(buf[i])));
  }
  return m;
}

void write_matrix_meta(const std::filesystem::path& path, const MatrixMeta& meta) {
  nlohmann::ordered_json j;
  j["rows"] = meta.rows;
  j["dim"] = meta.dim;
  j["seed"] = meta.seed;
  j["backend"] = meta.backend;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("io", "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

MatrixMeta read_matrix_meta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError(path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    MatrixMeta meta;
    meta.rows = j.at("rows").get<std::size_t>();
    meta.dim = j.at("dim").get<std::size_t>();
    meta.seed = j.value("seed", std::uint64_t{0});
    meta.backend = j.value("backend", std::string{});
    return meta;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("matrix_meta", path.string() + ": " + e.what());
  }
}

std::filesystem::path meta_path_for(const std::filesystem::path& bin_path) {
  auto p = bin_path;
  p.replace_extension(".meta.json");
  return p;
}

void save_matrix(const std::filesystem::path& bin_path, const Matrix& m, const MatrixMeta& meta) {
  write_matrix_file(bin_path, m);
  write_matrix_meta(meta_path_for(bin_path), meta);
}

Matrix load_matrix(const std::filesystem::path& bin_path, MatrixMeta* meta_out) {
  const MatrixMeta meta = read_matrix_meta(meta_path_for(bin_path));
  Matrix m = read_matrix_file(bin_path, meta.rows, meta.dim);
  if (meta_out) *meta_out = meta;
  return m;
}

}  // namespace cliq
