#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "vidembed/numeric/tensor.hpp"

namespace vidembed {

inline constexpr double kNormFloor = 1e-12;

/// Unit-L2 copy of `v`; NormUnderflow when ‖v‖ < 1e-12. The norm is
/// accumulated in double regardless of T.
template <std::floating_point T>
std::vector<T> l2_normalize(std::span<const T> v) {
  double ss = 0.0;
  for (T x : v) ss += static_cast<double>(x) * static_cast<double>(x);
  const double norm = std::sqrt(ss);
  require(norm >= kNormFloor && std::isfinite(norm), Errc::NormUnderflow,
          "cannot normalise a vector of norm " + std::to_string(norm));
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<T>(static_cast<double>(v[i]) / norm);
  return out;
}

template <std::floating_point T>
std::vector<T> l2_normalize(const std::vector<T>& v) {
  return l2_normalize(std::span<const T>(v));
}

/// Normalises each row of a matrix independently.
template <std::floating_point T>
Tensor<T> normalize_rows(const Tensor<T>& m) {
  std::vector<T> out;
  out.reserve(m.size());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = l2_normalize(m.row(r));
    out.insert(out.end(), row.begin(), row.end());
  }
  return Tensor<T>(m.shape(), std::move(out));
}

template <std::floating_point T>
double dot(std::span<const T> a, std::span<const T> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

template <std::floating_point T>
double norm2(std::span<const T> a) {
  return std::sqrt(dot(a, a));
}

}  // namespace vidembed
