#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace hlgp {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }

  void fill(double value);
  bool all_finite() const;
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Binary connectivity pattern. 1 = active, 0 = dormant.
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t rows, std::size_t cols, bool active = true);
  static Mask from_rows(std::initializer_list<std::initializer_list<int>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return bits_.size(); }

  bool operator()(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool active) { bits_[r * cols_ + c] = active ? 1 : 0; }

  std::span<const std::uint8_t> bits() const { return bits_; }
  std::span<std::uint8_t> bits() { return bits_; }

  std::size_t active_count() const;
  bool row_empty(std::size_t r) const;
  bool col_empty(std::size_t c) const;

  bool operator==(const Mask& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Weight matrix paired with its mask; forward passes use weights ⊙ mask.
struct MaskedMatrix {
  Matrix weights;
  Mask mask;

  MaskedMatrix() = default;
  explicit MaskedMatrix(Matrix w);
  MaskedMatrix(Matrix w, Mask m);

  std::size_t rows() const { return weights.rows(); }
  std::size_t cols() const { return weights.cols(); }
  std::size_t active_count() const { return mask.active_count(); }

  // Stores exactly 0.0 at every dormant position.
  void apply_mask();
  Matrix effective() const;

  bool operator==(const MaskedMatrix& other) const = default;
};

// (W ⊙ M) x + b. Dormant entries contribute zero whatever is stored there.
Vector affine_forward(const MaskedMatrix& w, std::span<const double> b,
                      std::span<const double> x);

// A masked affine map plus bias. `slot` indexes the layer within its model's
// gradient and optimizer buffers.
struct AffineLayer {
  std::string name;
  MaskedMatrix weight;
  Vector bias;
  std::size_t slot = 0;

  std::size_t in_width() const { return weight.cols(); }
  std::size_t out_width() const { return weight.rows(); }

  bool operator==(const AffineLayer& other) const = default;
};

}  // namespace hlgp
