#pragma once

#include <cstddef>
#include <vector>

#include "vidembed/error.hpp"

namespace vidembed {

/// Endpoint-inclusive uniform frame selection:
///   idx_i = round_half_up(i * (N-1) / (T-1)),  idx_0 = 0 when T == 1.
/// When N < T indices repeat, which upsamples short videos.
inline std::vector<std::size_t> sample_frames(std::size_t n_frames, std::size_t target) {
  require(n_frames >= 1 && target >= 1, Errc::ConfigInvalid, "sample_frames needs N >= 1 and T >= 1");
  std::vector<std::size_t> idx(target, 0);
  if (target == 1) return idx;
  const std::size_t num = n_frames - 1, den = target - 1;
  for (std::size_t i = 0; i < target; ++i) {
    // floor((2·i·num + den) / (2·den)) is round-half-up in exact integer arithmetic.
    idx[i] = (2 * i * num + den) / (2 * den);
  }
  return idx;
}

}  // namespace vidembed
