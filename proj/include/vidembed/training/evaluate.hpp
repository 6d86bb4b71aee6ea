#pragma once

#include <vector>

#include "vidembed/training/objective.hpp"
#include "vidembed/util/parallel.hpp"

namespace vidembed {

struct EvalReport {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<std::size_t> predictions;
};

/// Top-1 class for one video. Majority vote classifies frames directly; every
/// other head goes through argmax of its logits (τ = 1; argmax ignores τ).
inline std::size_t predict(const FrameSequence& seq, const HeadParams<float>& head, const ClassPrototypes& protos) {
  if (head.spec.kind == HeadKind::MajorityVote) return classify_majority_vote(seq, protos);
  const auto e = fuse(seq, head);
  return argmax(logits(e.vector, protos, 1.0));
}

inline EvalReport evaluate(const std::vector<FrameSequence>& videos, const HeadParams<float>& head,
                           const ClassPrototypes& protos, std::size_t threads = 1) {
  require(!videos.empty(), Errc::EmptyDataset, "nothing to evaluate");
  for (const auto& v : videos) {
    require(v.label.has_value(), Errc::ConfigInvalid, v.video_id + " has no label");
    require(*v.label < protos.count(), Errc::IndexOutOfRange, v.video_id + " label outside prototype set");
  }
  EvalReport r;
  r.total = videos.size();
  r.predictions.resize(videos.size());
  parallel_for(videos.size(), threads, [&](std::size_t i) { r.predictions[i] = predict(videos[i], head, protos); });
  r.confusion.assign(protos.count(), std::vector<std::size_t>(protos.count(), 0));
  for (std::size_t i = 0; i < videos.size(); ++i) {
    ++r.confusion[*videos[i].label][r.predictions[i]];
    r.correct += r.predictions[i] == *videos[i].label;
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  return r;
}

}  // namespace vidembed
