#pragma once

#include <cmath>
#include <vector>

#include "vidembed/heads/params.hpp"
#include "vidembed/numeric/ops.hpp"

namespace vidembed {

/// Sinusoidal position table: PE[p, 2i] = sin(p / 10000^(2i/d)), PE[p, 2i+1] = cos(same).
template <std::floating_point T>
Tensor<T> sinusoidal_positions(std::size_t positions, std::size_t d) {
  std::vector<T> pe(positions * d);
  for (std::size_t p = 0; p < positions; ++p)
    for (std::size_t j = 0; j < d; ++j) {
      const double rate = std::pow(10000.0, -static_cast<double>(j - j % 2) / static_cast<double>(d));
      const double angle = static_cast<double>(p) * rate;
      pe[p * d + j] = static_cast<T>(j % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  return Tensor<T>({positions, d}, std::move(pe));
}

/// Attention maps captured during a forward pass, [layer][head], each (T+1)×(T+1).
template <std::floating_point T>
struct AttentionTrace {
  std::vector<std::vector<Tensor<T>>> weights;
};

/// Pre-layer-norm encoder over [CLS; frames] + positions. Returns the
/// un-normalised readout (1×D_out) from the final CLS state or from the mean
/// of the final frame states.
template <std::floating_point T>
Var<T> transformer_readout(Tape<T>& tape, const BoundParams<T>& p, Var<T> frames,
                           AttentionTrace<T>* trace = nullptr) {
  const auto& spec = p.params->spec;
  require(frames.value().cols() == spec.d_in, Errc::DimMismatch,
          "transformer expects D_in = " + std::to_string(spec.d_in) + ", got " +
              std::to_string(frames.value().cols()));
  const std::size_t steps = frames.value().rows();
  const std::size_t d = spec.d_model, heads = spec.heads, dk = spec.head_dim();
  const T inv_sqrt_dk = T(1) / std::sqrt(static_cast<T>(dk));

  Var<T> x = frames;
  if (spec.d_in != d) x = ops::add_row(ops::matmul(x, p["in.W"]), p["in.b"]);
  x = ops::concat_rows<T>({ops::reshape(p["cls"], {1, d}), x});
  x = ops::add(x, tape.constant(sinusoidal_positions<T>(steps + 1, d)));

  for (std::size_t l = 0; l < spec.layers; ++l) {
    const std::string pre = "l" + std::to_string(l) + ".";
    auto h = ops::layer_norm_rows(x, p[pre + "ln1.g"], p[pre + "ln1.b"]);
    auto q = ops::add_row(ops::matmul(h, p[pre + "attn.Wq"]), p[pre + "attn.bq"]);
    auto k = ops::add_row(ops::matmul(h, p[pre + "attn.Wk"]), p[pre + "attn.bk"]);
    auto v = ops::add_row(ops::matmul(h, p[pre + "attn.Wv"]), p[pre + "attn.bv"]);
    std::vector<Var<T>> outs;
    if (trace) trace->weights.emplace_back();
    for (std::size_t hd = 0; hd < heads; ++hd) {
      auto qh = ops::slice_cols(q, hd * dk, dk);
      auto kh = ops::slice_cols(k, hd * dk, dk);
      auto vh = ops::slice_cols(v, hd * dk, dk);
      auto att = ops::softmax_rows(ops::scale(ops::matmul(qh, ops::transpose(kh)), inv_sqrt_dk));
      if (trace) trace->weights.back().push_back(att.value());
      outs.push_back(ops::matmul(att, vh));
    }
    auto merged = heads == 1 ? outs.front() : ops::concat_cols(outs);
    x = ops::add(x, ops::add_row(ops::matmul(merged, p[pre + "attn.Wo"]), p[pre + "attn.bo"]));

    auto h2 = ops::layer_norm_rows(x, p[pre + "ln2.g"], p[pre + "ln2.b"]);
    auto ff = ops::relu(ops::add_row(ops::matmul(h2, p[pre + "ffn.W1"]), p[pre + "ffn.b1"]));
    x = ops::add(x, ops::add_row(ops::matmul(ff, p[pre + "ffn.W2"]), p[pre + "ffn.b2"]));
  }

  Var<T> pooled = spec.pooling == Pooling::Cls ? ops::slice_rows(x, 0, 1) : ops::mean_rows(ops::slice_rows(x, 1, steps));
  return ops::add_row(ops::matmul(pooled, p["out.W"]), p["out.b"]);
}

}  // namespace vidembed
