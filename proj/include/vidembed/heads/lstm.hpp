#pragma once

#include "vidembed/heads/params.hpp"
#include "vidembed/numeric/ops.hpp"

namespace vidembed {

/// Single-layer LSTM over the frames (T×D_in) with h0 = c0 = 0:
///   i,f,o = σ(x W + h U + b),  g = tanh(x W_g + h U_g + b_g)
///   c_t = f∘c_{t-1} + i∘g,     h_t = o∘tanh(c_t)
/// Returns the un-normalised readout W_out·h_T + b_out as a 1×D_out row.
template <std::floating_point T>
Var<T> lstm_readout(Tape<T>& tape, const BoundParams<T>& p, Var<T> frames) {
  const auto& spec = p.params->spec;
  require(frames.value().cols() == spec.d_in, Errc::DimMismatch,
          "lstm expects D_in = " + std::to_string(spec.d_in) + ", got " + std::to_string(frames.value().cols()));
  const std::size_t steps = frames.value().rows();
  const std::size_t H = spec.hidden;

  // Input contributions for all steps at once: X·W + b, one T×H block per gate.
  Var<T> xw[4], U[4];
  const char* gates[4] = {"i", "f", "g", "o"};
  for (int k = 0; k < 4; ++k) {
    xw[k] = ops::add_row(ops::matmul(frames, p[std::string("lstm.W_") + gates[k]]), p[std::string("lstm.b_") + gates[k]]);
    U[k] = p[std::string("lstm.U_") + gates[k]];
  }

  Var<T> h = tape.constant(Tensor<T>::zeros({1, H}));
  Var<T> c = tape.constant(Tensor<T>::zeros({1, H}));
  for (std::size_t t = 0; t < steps; ++t) {
    Var<T> pre[4];
    for (int k = 0; k < 4; ++k) pre[k] = ops::add(ops::slice_rows(xw[k], t, 1), ops::matmul(h, U[k]));
    auto i = ops::sigmoid(pre[0]);
    auto f = ops::sigmoid(pre[1]);
    auto g = ops::tanh(pre[2]);
    auto o = ops::sigmoid(pre[3]);
    c = ops::add(ops::mul(f, c), ops::mul(i, g));
    h = ops::mul(o, ops::tanh(c));
  }
  return ops::add_row(ops::matmul(h, p["out.W"]), p["out.b"]);
}

}  // namespace vidembed
