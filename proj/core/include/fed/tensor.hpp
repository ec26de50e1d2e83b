// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fed {

/// Scalar type of all tensor storage. Double builds exist for gradient checks.
#ifdef FED_REAL_DOUBLE
using real = double;
#else
using real = float;
#endif

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major tensor. Rank-2 views (rows x cols) are what most
/// layers work with; a rank-1 tensor behaves as a single row.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, real fill = 0.0f);
  Tensor(Shape shape, std::vector<real> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, real fill = 0.0f) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor scalar(real v) { return Tensor({1}, std::vector<real>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  bool empty() const { return data_.empty(); }

  /// Leading extents collapsed into rows; last extent is cols.
  std::size_t rows() const;
  std::size_t cols() const;

  real* data() { return data_.data(); }
  const real* data() const { return data_.data(); }
  std::span<real> span() { return data_; }
  std::span<const real> span() const { return data_; }
  std::vector<real>& vec() { return data_; }
  const std::vector<real>& vec() const { return data_; }

  real& operator[](std::size_t i) { return data_[i]; }
  real operator[](std::size_t i) const { return data_[i]; }
  real& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  real at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  real item() const;

  std::span<real> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const real> row(std::size_t r) const {
    return {data_.data() + r * cols(), cols()};
  }

  Tensor reshaped(Shape shape) const;
  void fill(real v);

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  /// Bitwise equality of shape and payload.
  bool identical(const Tensor& other) const;

 private:
  Shape shape_;
  std::vector<real> data_;
};

/// A named trainable tensor plus its gradient buffer.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
  /// Weight decay applies only to matrices flagged here.
  bool decay = false;

  Parameter() = default;
  Parameter(std::string n, Tensor v, bool decayed = false)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), decay(decayed) {}

  void zero_grad() { grad.fill(0.0f); }
};

}  // namespace fed
