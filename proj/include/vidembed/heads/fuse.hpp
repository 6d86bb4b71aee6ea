#pragma once

#include "vidembed/heads/baselines.hpp"
#include "vidembed/heads/lstm.hpp"
#include "vidembed/heads/transformer.hpp"

namespace vidembed {

/// Differentiable unit-norm video embedding for the trainable heads.
template <std::floating_point T>
Var<T> embed_on_tape(Tape<T>& tape, const BoundParams<T>& p, Var<T> frames) {
  switch (p.params->spec.kind) {
    case HeadKind::Lstm: return ops::l2_normalize(lstm_readout(tape, p, frames));
    case HeadKind::Transformer: return ops::l2_normalize(transformer_readout(tape, p, frames));
    default: fail(Errc::HeadNotTrainable, head_name(p.params->spec.kind) + " has no parameters to differentiate");
  }
}

template <std::floating_point T>
VideoEmbedding to_embedding(const FrameSequence& seq, const Tensor<T>& v, HeadKind kind) {
  std::vector<float> out(v.data().begin(), v.data().end());
  return {seq.video_id, std::move(out), head_name(kind)};
}

inline VideoEmbedding fuse_lstm(const FrameSequence& seq, const HeadParams<float>& params) {
  require(params.spec.kind == HeadKind::Lstm, Errc::ConfigInvalid, "params are not for an lstm head");
  Tape<float> tape;
  auto bound = bind(tape, params, false);
  auto out = ops::l2_normalize(lstm_readout(tape, bound, tape.constant(seq.frames)));
  return to_embedding(seq, out.value(), HeadKind::Lstm);
}

inline VideoEmbedding fuse_transformer(const FrameSequence& seq, const HeadParams<float>& params,
                                       AttentionTrace<float>* trace = nullptr) {
  require(params.spec.kind == HeadKind::Transformer, Errc::ConfigInvalid, "params are not for a transformer head");
  Tape<float> tape;
  auto bound = bind(tape, params, false);
  auto out = ops::l2_normalize(transformer_readout(tape, bound, tape.constant(seq.frames), trace));
  return to_embedding(seq, out.value(), HeadKind::Transformer);
}

/// Any embedding-valued head. Majority vote yields a class, not a vector.
inline VideoEmbedding fuse(const FrameSequence& seq, const HeadParams<float>& params) {
  require(seq.dim() == params.spec.d_in, Errc::DimMismatch,
          seq.video_id + ": frame dimension " + std::to_string(seq.dim()) + " vs head input " +
              std::to_string(params.spec.d_in));
  switch (params.spec.kind) {
    case HeadKind::MidFrame: return fuse_mid_frame(seq);
    case HeadKind::MaxPool: return fuse_max_pool(seq);
    case HeadKind::Lstm: return fuse_lstm(seq, params);
    case HeadKind::Transformer: return fuse_transformer(seq, params);
    case HeadKind::MajorityVote: break;
  }
  fail(Errc::HeadNotEmbedding, "majority_vote produces class labels, not embeddings");
}

/// Parameter-free head descriptor for the baselines.
inline HeadParams<float> baseline_head(HeadKind kind, std::size_t dim) {
  require(!is_trainable(kind), Errc::ConfigInvalid, head_name(kind) + " needs parameters");
  return HeadParams<float>{HeadSpec::defaults(kind, dim), {}};
}

}  // namespace vidembed
