// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace cnt {

/// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Rank-4 convolution kernel indexed (kh, kw, c_in, c_out), row-major in that order.
class Kernel4 {
 public:
  using Shape = std::array<std::size_t, 4>;

  Kernel4() = default;
  explicit Kernel4(Shape shape, double fill = 0.0)
      : shape_(shape), data_(shape[0] * shape[1] * shape[2] * shape[3], fill) {}
  Kernel4(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {}

  const Shape& shape() const noexcept { return shape_; }
  std::size_t kh() const noexcept { return shape_[0]; }
  std::size_t kw() const noexcept { return shape_[1]; }
  std::size_t c_in() const noexcept { return shape_[2]; }
  std::size_t c_out() const noexcept { return shape_[3]; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t offset(std::size_t h, std::size_t w, std::size_t ci, std::size_t co) const noexcept {
    return ((h * shape_[1] + w) * shape_[2] + ci) * shape_[3] + co;
  }
  double& operator()(std::size_t h, std::size_t w, std::size_t ci, std::size_t co) {
    return data_[offset(h, w, ci, co)];
  }
  double operator()(std::size_t h, std::size_t w, std::size_t ci, std::size_t co) const {
    return data_[offset(h, w, ci, co)];
  }

  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  friend bool operator==(const Kernel4&, const Kernel4&) = default;

 private:
  Shape shape_{0, 0, 0, 0};
  std::vector<double> data_;
};

}  // namespace cnt
