#pragma once

// Parameter-free fusion baselines.

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "vidembed/data/dataset.hpp"

namespace vidembed {

struct VideoEmbedding {
  std::string video_id;
  std::vector<float> vector;
  std::string head;
};

inline std::size_t mid_frame_index(std::size_t length) { return (length - 1) / 2; }

inline VideoEmbedding fuse_mid_frame(const FrameSequence& seq) {
  require(seq.length() >= 1, Errc::InsufficientData, "empty frame sequence");
  return {seq.video_id, l2_normalize(seq.frames.row(mid_frame_index(seq.length()))), "mid_frame"};
}

/// Element-wise maximum over time, then unit-normalised.
inline VideoEmbedding fuse_max_pool(const FrameSequence& seq) {
  require(seq.length() >= 1, Errc::InsufficientData, "empty frame sequence");
  std::vector<float> mx(seq.dim(), -std::numeric_limits<float>::infinity());
  for (std::size_t t = 0; t < seq.length(); ++t) {
    auto row = seq.frames.row(t);
    for (std::size_t j = 0; j < mx.size(); ++j) mx[j] = std::max(mx[j], row[j]);
  }
  return {seq.video_id, l2_normalize(std::span<const float>(mx)), "max_pool"};
}

/// Each frame votes for its highest-scoring prototype; the modal class wins.
/// Ties go to the larger summed score over all frames, then the lower index.
inline std::size_t classify_majority_vote(const FrameSequence& seq, const ClassPrototypes& protos) {
  require(seq.dim() == protos.dim(), Errc::DimMismatch, "frame and prototype dimensions differ");
  const std::size_t C = protos.count();
  std::vector<std::size_t> votes(C, 0);
  std::vector<double> summed(C, 0.0);
  for (std::size_t t = 0; t < seq.length(); ++t) {
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < C; ++c) {
      const double s = dot(seq.frames.row(t), protos.vectors.row(c));
      summed[c] += s;
      if (s > best_score) best_score = s, best = c;
    }
    ++votes[best];
  }
  std::size_t winner = 0;
  for (std::size_t c = 1; c < C; ++c) {
    if (votes[c] > votes[winner] || (votes[c] == votes[winner] && summed[c] > summed[winner])) winner = c;
  }
  return winner;
}

}  // namespace vidembed
