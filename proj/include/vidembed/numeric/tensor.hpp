#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vidembed/error.hpp"

namespace vidembed {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major tensor of rank 1 to 3.
///
/// Storage is shared and never written through after construction, so copies
/// are cheap and a tensor handed to a tape or an index cannot change under it.
/// Rank-1 tensors behave as a single row wherever a matrix is expected.
template <std::floating_point T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : shape_{1}, data_(std::make_shared<const std::vector<T>>(1, T(0))) {}

  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
      : shape_(std::move(shape)), requires_grad_(requires_grad) {
    validate_shape(shape_);
    require(shape_numel(shape_) == data.size(), Errc::ShapeMismatch,
            "shape " + shape_str(shape_) + " does not match " + std::to_string(data.size()) +
                " elements");
    data_ = std::make_shared<const std::vector<T>>(std::move(data));
  }

  static Tensor zeros(Shape shape) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, T(0)));
  }

  static Tensor filled(Shape shape, T value) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, value));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<T> data) {
    return Tensor({rows, cols}, std::move(data));
  }

  static Tensor vector(std::vector<T> data) {
    auto n = data.size();
    return Tensor({n}, std::move(data));
  }

  static Tensor identity(std::size_t n) {
    std::vector<T> d(n * n, T(0));
    for (std::size_t i = 0; i < n; ++i) d[i * n + i] = T(1);
    return Tensor({n, n}, std::move(d));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_->size(); }
  std::size_t rows() const noexcept { return shape_.size() == 1 ? 1 : shape_[shape_.size() - 2]; }
  std::size_t cols() const noexcept { return shape_.back(); }

  std::span<const T> data() const noexcept { return {data_->data(), data_->size()}; }
  std::span<const T> row(std::size_t r) const { return data().subspan(r * cols(), cols()); }

  T operator[](std::size_t i) const { return (*data_)[i]; }
  T at(std::size_t r, std::size_t c) const { return (*data_)[r * cols() + c]; }

  bool requires_grad() const noexcept { return requires_grad_; }
  Tensor with_requires_grad(bool flag) const {
    Tensor t = *this;
    t.requires_grad_ = flag;
    return t;
  }

  Tensor reshaped(Shape shape) const {
    require(shape_numel(shape) == size(), Errc::ShapeMismatch,
            "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    validate_shape(shape);
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

  template <std::floating_point U>
  Tensor<U> cast() const {
    std::vector<U> d(data_->begin(), data_->end());
    return Tensor<U>(shape_, std::move(d), requires_grad_);
  }

  std::vector<T> to_vector() const { return *data_; }

  bool all_finite() const {
    return std::all_of(data_->begin(), data_->end(), [](T v) { return std::isfinite(v); });
  }

  /// Exact element and shape equality (gradient flags ignored).
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && (a.data_ == b.data_ || *a.data_ == *b.data_);
  }

 private:
  static void validate_shape(const Shape& shape) {
    require(!shape.empty() && shape.size() <= 3, Errc::ShapeMismatch,
            "rank must be 1..3, got " + std::to_string(shape.size()));
    for (auto e : shape) require(e > 0, Errc::ShapeMismatch, "zero extent in " + shape_str(shape));
  }

  Shape shape_;
  std::shared_ptr<const std::vector<T>> data_;
  bool requires_grad_ = false;
};

}  // namespace vidembed
