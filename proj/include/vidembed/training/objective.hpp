#pragma once

#include <span>
#include <vector>

#include "vidembed/data/dataset.hpp"
#include "vidembed/heads/fuse.hpp"

namespace vidembed {

/// z_c = τ·⟨v, p_c⟩ against every prototype row.
inline std::vector<float> logits(std::span<const float> v, const ClassPrototypes& protos, double temperature) {
  require(v.size() == protos.dim(), Errc::DimMismatch,
          "embedding has " + std::to_string(v.size()) + " dims, prototypes " + std::to_string(protos.dim()));
  require(temperature > 0.0, Errc::ConfigInvalid, "temperature must be positive");
  std::vector<float> z(protos.count());
  for (std::size_t c = 0; c < z.size(); ++c)
    z[c] = static_cast<float>(temperature * dot(v, protos.vectors.row(c)));
  return z;
}

/// Lowest index among maximal entries.
template <class Range>
std::size_t argmax(const Range& z) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < std::size(z); ++i)
    if (z[i] > z[best]) best = i;
  return best;
}

/// Prototype matrix laid out D×C for the logit product.
template <std::floating_point T>
Tensor<T> prototype_columns(const ClassPrototypes& protos) {
  const std::size_t C = protos.count(), D = protos.dim();
  std::vector<T> d(D * C);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t j = 0; j < D; ++j) d[j * C + c] = static_cast<T>(protos.vectors.at(c, j));
  return Tensor<T>({D, C}, std::move(d));
}

/// Cross-entropy of τ-scaled dot-product logits for one video; the graph runs
/// from the head parameters through fusion to the scalar loss.
template <std::floating_point T>
Var<T> classification_loss(Tape<T>& tape, const BoundParams<T>& params, Var<T> frames, Var<T> proto_columns,
                           std::size_t label, T temperature) {
  auto v = embed_on_tape(tape, params, frames);
  auto z = ops::scale(ops::matmul(v, proto_columns), temperature);
  return ops::softmax_cross_entropy(z, label);
}

}  // namespace vidembed
