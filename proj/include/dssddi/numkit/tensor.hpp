#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace dssddi::numkit {

/// Dense row-major matrix of doubles. Vectors are stored as 1 x n rows and
/// scalars as 1 x 1, so every tensor in the library has rank two.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  /// Builds a matrix from nested initializer lists, e.g. {{1, 2}, {3, 4}}.
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor row_vector(std::span<const double> values);
  static Tensor scalar(double v) { return Tensor(1, 1, v); }
  static Tensor identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  std::vector<std::size_t> shape() const { return {rows_, cols_}; }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void fill(double v);
  bool all_finite() const;
  Tensor transposed() const;

  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Throws ShapeError with `what` in the message when shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

Tensor matmul(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Fixed-coefficient sparse matrix in CSR form. Used for neighborhood
/// aggregation operators whose coefficients do not depend on parameters.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr;  // size rows + 1
  std::vector<std::size_t> col_idx;
  std::vector<double> values;

  struct Entry {
    std::size_t row;
    std::size_t col;
    double value;
  };
  /// Entries are grouped by row; within a row they keep input order.
  static SparseMatrix from_entries(std::size_t rows, std::size_t cols,
                                   std::vector<Entry> entries);

  Tensor multiply(const Tensor& x) const;
  SparseMatrix transposed() const;
  Tensor to_dense() const;
  std::size_t nnz() const { return values.size(); }
};

}  // namespace dssddi::numkit
