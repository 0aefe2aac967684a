#include "dssddi/numkit/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "dssddi/errors.hpp"

namespace dssddi::numkit {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged initializer for tensor");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(data));
}

Tensor Tensor::row_vector(std::span<const double> values) {
  return Tensor(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::transposed() const {
  Tensor t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

std::string Tensor::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + a.shape_string() + " times " + b.shape_string());
  }
  Tensor out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  const double* __restrict ap = a.data().data();
  const double* __restrict bp = b.data().data();
  double* __restrict op = out.data().data();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* __restrict o = op + i * n;
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double av = ap[i * a.cols() + k];
      if (av == 0.0) continue;
      const double* __restrict br = bp + k * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

SparseMatrix SparseMatrix::from_entries(std::size_t rows, std::size_t cols,
                                        std::vector<Entry> entries) {
  SparseMatrix m;
  m.rows = rows;
  m.cols = cols;
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.row < b.row; });
  m.row_ptr.assign(rows + 1, 0);
  m.col_idx.reserve(entries.size());
  m.values.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.row >= rows || e.col >= cols) throw ShapeError("sparse entry out of range");
    ++m.row_ptr[e.row + 1];
    m.col_idx.push_back(e.col);
    m.values.push_back(e.value);
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
  return m;
}

Tensor SparseMatrix::multiply(const Tensor& x) const {
  if (x.rows() != cols) {
    throw ShapeError("sparse multiply: operator " + std::to_string(rows) + "x" +
                     std::to_string(cols) + " with " + x.shape_string());
  }
  Tensor out(rows, x.cols());
  for (std::size_t r = 0; r < rows; ++r) {
    auto o = out.row(r);
    for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) {
      auto xr = x.row(col_idx[p]);
      const double w = values[p];
      for (std::size_t j = 0; j < o.size(); ++j) o[j] += w * xr[j];
    }
  }
  return out;
}

SparseMatrix SparseMatrix::transposed() const {
  std::vector<Entry> entries;
  entries.reserve(nnz());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p)
      entries.push_back({col_idx[p], r, values[p]});
  return from_entries(cols, rows, std::move(entries));
}

Tensor SparseMatrix::to_dense() const {
  Tensor d(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) d(r, col_idx[p]) += values[p];
  return d;
}

}  // namespace dssddi::numkit
