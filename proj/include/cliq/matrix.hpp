#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cliq {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  const std::vector<double>& values() const noexcept { return data_; }
  std::vector<double>& values() noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// n x d matrix whose rows are unit-norm query embeddings, row i <-> query id i.
using EmbeddingMatrix = Matrix;

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

// Scales v to unit length. A zero vector becomes e1; returns false in that case.
bool normalize_or_e1(std::span<double> v);

bool all_finite(const Matrix& m);
bool rows_unit_norm(const Matrix& m, double tolerance = 1e-6);

// Sidecar describing a matrix file.
struct MatrixMeta {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  std::string backend;
};

// Flat little-endian float32 file, row-major, no header.
void write_matrix_file(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_file(const std::filesystem::path& path, std::size_t rows, std::size_t cols);

void write_matrix_meta(const std::filesystem::path& path, const MatrixMeta& meta);
MatrixMeta read_matrix_meta(const std::filesystem::path& path);

// Pair helpers: `<stem>.bin` plus `<stem>.meta.json` next to it.
void save_matrix(const std::filesystem::path& bin_path, const Matrix& m, const MatrixMeta& meta);
Matrix load_matrix(const std::filesystem::path& bin_path, MatrixMeta* meta_out = nullptr);
std::filesystem::path meta_path_for(const std::filesystem::path& bin_path);

}  // namespace cliq
