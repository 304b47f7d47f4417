#include "hlgp/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "hlgp/errors.hpp"

namespace hlgp {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                     " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Mask::Mask(std::size_t rows, std::size_t cols, bool active)
    : rows_(rows), cols_(cols), bits_(rows * cols, active ? 1 : 0) {}

Mask Mask::from_rows(std::initializer_list<std::initializer_list<int>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Mask m(r, c, false);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged mask literal");
    std::size_t j = 0;
    for (int v : row) m.set(i, j++, v != 0);
    ++i;
  }
  return m;
}

std::size_t Mask::active_count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool Mask::row_empty(std::size_t r) const {
  const auto* p = bits_.data() + r * cols_;
  return std::all_of(p, p + cols_, [](std::uint8_t b) { return b == 0; });
}

bool Mask::col_empty(std::size_t c) const {
  for (std::size_t r = 0; r < rows_; ++r) {
    if (bits_[r * cols_ + c] != 0) return false;
  }
  return true;
}

MaskedMatrix::MaskedMatrix(Matrix w) : weights(std::move(w)), mask(weights.rows(), weights.cols()) {}

MaskedMatrix::MaskedMatrix(Matrix w, Mask m) : weights(std::move(w)), mask(std::move(m)) {
  if (weights.rows() != mask.rows() || weights.cols() != mask.cols()) {
    throw ShapeError("mask shape does not match weight shape");
  }
}

void MaskedMatrix::apply_mask() {
  auto w = weights.data();
  auto m = mask.bits();
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (m[k] == 0) w[k] = 0.0;
  }
}

Matrix MaskedMatrix::effective() const {
  Matrix out = weights;
  auto w = out.data();
  auto m = mask.bits();
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (m[k] == 0) w[k] = 0.0;
  }
  return out;
}

Vector affine_forward(const MaskedMatrix& w, std::span<const double> b, std::span<const double> x) {
  if (x.size() != w.cols()) {
    throw ShapeError("affine input width " + std::to_string(x.size()) + " != " +
                     std::to_string(w.cols()));
  }
  if (b.size() != w.rows()) {
    throw ShapeError("affine bias width " + std::to_string(b.size()) + " != " +
                     std::to_string(w.rows()));
  }
  Vector y(w.rows());
  const std::size_t cols = w.cols();
  const double* wd = w.weights.data().data();
  const std::uint8_t* md = w.mask.bits().data();
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const double* wr = wd + i * cols;
    const std::uint8_t* mr = md + i * cols;
    double acc = 0.0;
    for (std::size_t k = 0; k < cols; ++k) acc += (mr[k] ? wr[k] : 0.0) * x[k];
    y[i] = acc + b[i];
  }
  return y;
}

}  // namespace hlgp
