#pragma once

// Differentiable primitives over Tape-recorded values. Every op computes its
// forward value eagerly and registers an adjoint rule that accumulates into
// the gradients of whichever inputs require them.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "vidembed/numeric/tape.hpp"

namespace vidembed::ops {

namespace detail {

template <std::floating_point T>
std::span<T> grad_if_needed(Tape<T>& tape, std::size_t id) {
  if (!tape.requires_grad(id)) return {};
  return tape.grad_buffer(id);
}

template <std::floating_point T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace detail

/// c = a · b for a: m×k (rank-1 counts as 1×k), b: k×n.
template <std::floating_point T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  require(B.rank() == 2 && B.rows() == k, Errc::ShapeMismatch,
          "matmul inner extents differ: " + shape_str(A.shape()) + " · " + shape_str(B.shape()));
  std::vector<T> c(m * n, T(0));
  auto ad = A.data();
  auto bd = B.data();
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ad[i * k + p];
      if (av == T(0)) continue;
      const T* brow = bd.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return a.tape->record(Tensor<T>({m, n}, std::move(c)), {a, b}, [m, k, n](Tape<T>& t, std::size_t self) {
    const auto ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    auto g = t.grad_buffer(self);
    auto ad = t.value(ia).data();
    auto bd = t.value(ib).data();
    if (auto ga = detail::grad_if_needed(t, ia); !ga.empty()) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          T s = T(0);
          for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bd[p * n + j];
          ga[i * k + p] += s;
        }
    }
    if (auto gb = detail::grad_if_needed(t, ib); !gb.empty()) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const T av = ad[i * k + p];
          if (av == T(0)) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
        }
    }
  });
}

/// Element-wise sum of two tensors with identical element counts.
template <std::floating_point T>
Var<T> add(Var<T> a, Var<T> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  require(A.shape() == B.shape(), Errc::ShapeMismatch,
          "add: " + shape_str(A.shape()) + " vs " + shape_str(B.shape()));
  std::vector<T> c(A.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = A[i] + B[i];
  return a.tape->record(Tensor<T>(A.shape(), std::move(c)), {a, b}, [](Tape<T>& t, std::size_t self) {
    auto g = t.grad_buffer(self);
    for (auto in : t.inputs(self)) {
      if (auto gi = detail::grad_if_needed(t, in); !gi.empty())
        for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

/// Adds a length-n vector to every row of an m×n matrix.
template <std::floating_point T>
Var<T> add_row(Var<T> a, Var<T> row) {
  const auto& A = a.value();
  const auto& R = row.value();
  const std::size_t m = A.rows(), n = A.cols();
  require(R.size() == n, Errc::ShapeMismatch,
          "add_row: row of " + std::to_string(R.size()) + " onto " + shape_str(A.shape()));
  std::vector<T> c(A.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = A[i * n + j] + R[j];
  return a.tape->record(Tensor<T>(A.shape(), std::move(c)), {a, row}, [m, n](Tape<T>& t, std::size_t self) {
    auto g = t.grad_buffer(self);
    if (auto ga = detail::grad_if_needed(t, t.inputs(self)[0]); !ga.empty())
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    if (auto gr = detail::grad_if_needed(t, t.inputs(self)[1]); !gr.empty())
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
  });
}

/// Hadamard product.
template <std::floating_point T>
Var<T> mul(Var<T> a, Var<T> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  require(A.shape() == B.shape(), Errc::ShapeMismatch,
          "mul: " + shape_str(A.shape()) + " vs " + shape_str(B.shape()));
  std::vector<T> c(A.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = A[i] * B[i];
  return a.tape->record(Tensor<T>(A.shape(), std::move(c)), {a, b}, [](Tape<T>& t, std::size_t self) {
    const auto ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    auto g = t.grad_buffer(self);
    auto ad = t.value(ia).data();
    auto bd = t.value(ib).data();
    if (auto ga = detail::grad_if_needed(t, ia); !ga.empty())
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bd[i];
    if (auto gb = detail::grad_if_needed(t, ib); !gb.empty())
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ad[i];
  });
}

template <std::floating_point T>
Var<T> scale(Var<T> a, T s) {
  const auto& A = a.value();
  std::vector<T> c(A.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = A[i] * s;
  return a.tape->record(Tensor<T>(A.shape(), std::move(c)), {a}, [s](Tape<T>& t, std::size_t self) {
    auto g = t.grad_buffer(self);
    auto ga = t.grad_buffer(t.inputs(self)[0]);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  });
}

namespace detail {

// Shared shape for unary element-wise maps whose derivative is expressible
// from the output value y (and the input x).
template <std::floating_point T, class Fwd, class Deriv>
Var<T> unary(Var<T> a, Fwd fwd, Deriv deriv) {
  const auto& A = a.value();
  std::vector<T> y(A.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = fwd(A[i]);
  return a.tape->record(Tensor<T>(A.shape(), std::move(y)), {a}, [deriv](Tape<T>& t, std::size_t self) {
    const auto ia = t.inputs(self)[0];
    auto g = t.grad_buffer(self);
    auto x = t.value(ia).data();
    auto y = t.value(self).data();
    auto ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
  });
}

}  // namespace detail

template <std::floating_point T>
Var<T> sigmoid(Var<T> a) {
  return detail::unary(a, [](T x) { return detail::stable_sigmoid(x); },
                       [](T, T y) { return y * (T(1) - y); });
}

template <std::floating_point T>
Var<T> tanh(Var<T> a) {
  return detail::unary(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <std::floating_point T>
Var<T> relu(Var<T> a) {
  return detail::unary(a, [](T x) { return x > T(0) ? x : T(0); },
                       [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <std::floating_point T>
Var<T> reshape(Var<T> a, Shape shape) {
  return a.tape->record(a.value().reshaped(std::move(shape)), {a}, [](Tape<T>& t, std::size_t self) {
    auto g = t.grad_buffer(self);
    auto ga = t.grad_buffer(t.inputs(self)[0]);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

/// Rows [begin, begin+count) of a matrix, as a count×cols matrix.
template <std::floating_point T>
Var<T> slice_rows(Var<T> a, std::size_t begin, std::size_t count) {
  const auto& A = a.value();
  const std::size_t n = A.cols();
  require(count > 0 && begin + count <= A.rows(), Errc::IndexOutOfRange,
          "slice_rows out of range for " + shape_str(A.shape()));
  auto d = A.data().subspan(begin * n, count * n);
  return a.tape->record(Tensor<T>({count, n}, std::vector<T>(d.begin(), d.end())), {a},
                        [begin, n](Tape<T>& t, std::size_t self) {
                          auto g = t.grad_buffer(self);
                          auto ga = t.grad_buffer(t.inputs(self)[0]);
                          for (std::size_t i = 0; i < g.size(); ++i) ga[begin * n + i] += g[i];
                        });
}

/// Columns [begin, begin+count) of a matrix.
template <std::floating_point T>
Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t count) {
  const auto& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  require(count > 0 && begin + count <= n, Errc::IndexOutOfRange,
          "slice_cols out of range for " + shape_str(A.shape()));
  std::vector<T> c(m * count);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) c[i * count + j] = A[i * n + begin + j];
  return a.tape->record(Tensor<T>({m, count}, std::move(c)), {a}, [m, n, begin, count](Tape<T>& t, std::size_t self) {
    auto g = t.grad_buffer(self);
    auto ga = t.grad_buffer(t.inputs(self)[0]);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) ga[i * n + begin + j] += g[i * count + j];
  });
}

/// Stacks matrices with equal column counts vertically.
template <std::floating_point T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  require(!parts.empty(), Errc::ShapeMismatch, "concat_rows of nothing");
  const std::size_t n = parts.front().value().cols();
  std::vector<T> c;
  std::size_t m = 0;
  for (const auto& p : parts) {
    const auto& P = p.value();
    require(P.cols() == n, Errc::ShapeMismatch, "concat_rows column mismatch");
    c.insert(c.end(), P.data().begin(), P.data().end());
    m += P.rows();
  }
  return parts.front().tape->record(Tensor<T>({m, n}, std::move(c)), parts, [](Tape<T>& t, std::size_t self) {
    auto g = t.grad_buffer(self);
    std::size_t off = 0;
    for (auto in : t.inputs(self)) {
      const std::size_t sz = t.value(in).size();
      if (auto gi = detail::grad_if_needed(t, in); !gi.empty())
        for (std::size_t i = 0; i < sz; ++i) gi[i] += g[off + i];
      off += sz;
    }
  });
}

/// Places matrices with equal row counts side by side.
template <std::floating_point T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  require(!parts.empty(), Errc::ShapeMismatch, "concat_cols of nothing");
  const std::size_t m = parts.front().value().rows();
  std::size_t n = 0;
  for (const auto& p : parts) {
    require(p.value().rows() == m, Errc::ShapeMismatch, "concat_cols row mismatch");
    n += p.value().cols();
  }
  std::vector<T> c(m * n);
  std::size_t col = 0;
  for (const auto& p : parts) {
    const auto& P = p.value();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < P.cols(); ++j) c[i * n + col + j] = P[i * P.cols() + j];
    col += P.cols();
  }
  return parts.front().tape->record(Tensor<T>({m, n}, std::move(c)), parts, [m, n](Tape<T>& t, std::size_t self) {
    auto g = t.grad_buffer(self);
    std::size_t col = 0;
    for (auto in : t.inputs(self)) {
      const std::size_t w = t.value(in).cols();
      if (auto gi = detail::grad_if_needed(t, in); !gi.empty())
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < w; ++j) gi[i * w + j] += g[i * n + col + j];
      col += w;
    }
  });
}

template <std::floating_point T>
Var<T> transpose(Var<T> a) {
  const auto& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  std::vector<T> c(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[j * m + i] = A[i * n + j];
  return a.tape->record(Tensor<T>({n, m}, std::move(c)), {a}, [m, n](Tape<T>& t, std::size_t self) {
    auto g = t.grad_buffer(self);
    auto ga = t.grad_buffer(t.inputs(self)[0]);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
}

/// Row-wise softmax with max subtraction.
template <std::floating_point T>
Var<T> softmax_rows(Var<T> a) {
  const auto& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  std::vector<T> y(A.size());
  for (std::size_t i = 0; i < m; ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, A[i * n + j]);
    T s = T(0);
    for (std::size_t j = 0; j < n; ++j) s += (y[i * n + j] = std::exp(A[i * n + j] - mx));
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] /= s;
  }
  return a.tape->record(Tensor<T>(A.shape(), std::move(y)), {a}, [m, n](Tape<T>& t, std::size_t self) {
    auto g = t.grad_buffer(self);
    auto y = t.value(self).data();
    auto ga = t.grad_buffer(t.inputs(self)[0]);
    for (std::size_t i = 0; i < m; ++i) {
      T dot = T(0);
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
    }
  });
}

/// Per-row layer normalisation: (x - mean) / sqrt(var + eps) * gain + bias.
template <std::floating_point T>
Var<T> layer_norm_rows(Var<T> x, Var<T> gain, Var<T> bias, T eps = T(1e-5)) {
  const auto& X = x.value();
  const std::size_t m = X.rows(), n = X.cols();
  require(gain.value().size() == n && bias.value().size() == n, Errc::ShapeMismatch,
          "layer_norm gain/bias must have " + std::to_string(n) + " elements");
  const auto& G = gain.value();
  const auto& B = bias.value();
  std::vector<T> xhat(m * n), y(m * n), inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    T mean = T(0);
    for (std::size_t j = 0; j < n; ++j) mean += X[i * n + j];
    mean /= T(n);
    T var = T(0);
    for (std::size_t j = 0; j < n; ++j) {
      T d = X[i * n + j] - mean;
      var += d * d;
    }
    var /= T(n);
    inv_std[i] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (X[i * n + j] - mean) * inv_std[i];
      y[i * n + j] = xhat[i * n + j] * G[j] + B[j];
    }
  }
  return x.tape->record(Tensor<T>(X.shape(), std::move(y)), {x, gain, bias},
                        [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& t, std::size_t self) {
                          const auto ix = t.inputs(self)[0], ig = t.inputs(self)[1], ib = t.inputs(self)[2];
                          auto g = t.grad_buffer(self);
                          auto G = t.value(ig).data();
                          if (auto gg = detail::grad_if_needed(t, ig); !gg.empty())
                            for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * xhat[i * n + j];
                          if (auto gb = detail::grad_if_needed(t, ib); !gb.empty())
                            for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
                          if (auto gx = detail::grad_if_needed(t, ix); !gx.empty()) {
                            for (std::size_t i = 0; i < m; ++i) {
                              T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
                              for (std::size_t j = 0; j < n; ++j) {
                                T d = g[i * n + j] * G[j];
                                sum_dxhat += d;
                                sum_dxhat_xhat += d * xhat[i * n + j];
                              }
                              for (std::size_t j = 0; j < n; ++j) {
                                T d = g[i * n + j] * G[j];
                                gx[i * n + j] += inv_std[i] / T(n) *
                                                 (T(n) * d - sum_dxhat - xhat[i * n + j] * sum_dxhat_xhat);
                              }
                            }
                          }
                        });
}

/// Column-wise mean over rows, producing a 1×n row.
template <std::floating_point T>
Var<T> mean_rows(Var<T> a) {
  const auto& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  std::vector<T> c(n, T(0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[j] += A[i * n + j];
  for (auto& v : c) v /= T(m);
  return a.tape->record(Tensor<T>({1, n}, std::move(c)), {a}, [m, n](Tape<T>& t, std::size_t self) {
    auto g = t.grad_buffer(self);
    auto ga = t.grad_buffer(t.inputs(self)[0]);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j] / T(m);
  });
}

/// Sum of all elements as a scalar.
template <std::floating_point T>
Var<T> sum(Var<T> a) {
  const auto& A = a.value();
  T s = T(0);
  for (auto v : A.data()) s += v;
  return a.tape->record(Tensor<T>({1}, {s}), {a}, [](Tape<T>& t, std::size_t self) {
    const T g = t.grad_buffer(self)[0];
    auto ga = t.grad_buffer(t.inputs(self)[0]);
    for (auto& v : ga) v += g;
  });
}

/// Scales all elements jointly to unit L2 norm. Throws NormUnderflow below 1e-12.
template <std::floating_point T>
Var<T> l2_normalize(Var<T> a) {
  const auto& A = a.value();
  T ss = T(0);
  for (auto v : A.data()) ss += v * v;
  const T norm = std::sqrt(ss);
  require(norm >= T(1e-12) && std::isfinite(norm), Errc::NormUnderflow,
          "cannot normalise a vector of norm " + std::to_string(norm));
  std::vector<T> y(A.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = A[i] / norm;
  return a.tape->record(Tensor<T>(A.shape(), std::move(y)), {a}, [norm](Tape<T>& t, std::size_t self) {
    auto g = t.grad_buffer(self);
    auto y = t.value(self).data();
    auto ga = t.grad_buffer(t.inputs(self)[0]);
    T dot = T(0);
    for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += (g[i] - y[i] * dot) / norm;
  });
}

/// loss = logsumexp(z) - z[target]; adjoint is softmax(z) - onehot(target).
template <std::floating_point T>
Var<T> softmax_cross_entropy(Var<T> logits, std::size_t target) {
  const auto& Z = logits.value();
  const std::size_t c = Z.size();
  require(target < c, Errc::IndexOutOfRange,
          "target " + std::to_string(target) + " outside " + std::to_string(c) + " classes");
  T mx = -std::numeric_limits<T>::infinity();
  for (auto v : Z.data()) mx = std::max(mx, v);
  T s = T(0);
  for (auto v : Z.data()) s += std::exp(v - mx);
  const T lse = mx + std::log(s);
  // Clamp rounding noise so the loss is never reported below zero.
  const T loss = std::max(T(0), lse - Z[target]);
  return logits.tape->record(Tensor<T>({1}, {loss}), {logits}, [target, lse](Tape<T>& t, std::size_t self) {
    const T g = t.grad_buffer(self)[0];
    const auto iz = t.inputs(self)[0];
    auto z = t.value(iz).data();
    auto gz = t.grad_buffer(iz);
    for (std::size_t i = 0; i < z.size(); ++i) {
      T p = std::exp(z[i] - lse);
      gz[i] += g * (p - (i == target ? T(1) : T(0)));
    }
  });
}

}  // namespace vidembed::ops
