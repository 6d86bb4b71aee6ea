#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "vidembed/numeric/tensor.hpp"

namespace vidembed {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates for one parameter tensor.
template <std::floating_point T>
struct AdamState {
  AdamHyper hyper;
  Shape shape;
  std::vector<T> m;
  std::vector<T> v;
  std::uint64_t t = 0;

  AdamState() = default;
  AdamState(const Shape& param_shape, AdamHyper h = {})
      : hyper(h), shape(param_shape), m(shape_numel(param_shape), T(0)), v(shape_numel(param_shape), T(0)) {}
};

/// One bias-corrected Adam update. Returns the new parameter; advances state.t.
template <std::floating_point T>
Tensor<T> adam_step(const Tensor<T>& param, const Tensor<T>& grad, AdamState<T>& state) {
  require(param.shape() == grad.shape() && param.shape() == state.shape &&
              state.m.size() == param.size() && state.v.size() == param.size(),
          Errc::ShapeMismatch,
          "adam_step: param " + shape_str(param.shape()) + ", grad " + shape_str(grad.shape()) +
              ", state " + shape_str(state.shape));
  const auto& h = state.hyper;
  state.t += 1;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
  std::vector<T> out(param.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double g = grad[i];
    const double m = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
    const double v = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    out[i] = static_cast<T>(param[i] - h.lr * m_hat / (std::sqrt(v_hat) + h.eps));
  }
  return Tensor<T>(param.shape(), std::move(out), param.requires_grad());
}

}  // namespace vidembed
