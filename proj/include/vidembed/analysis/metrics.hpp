#pragma once

#include <set>
#include <string>
#include <vector>

#include "vidembed/retrieval/index.hpp"

namespace vidembed {

/// |result ∩ relevant| / k, where k is the result length.
inline double precision_at_k(const RankedResult& result, const std::set<std::string>& relevant) {
  require(!result.items.empty(), Errc::EmptyResult, "precision@k of an empty result");
  std::size_t hits = 0;
  for (const auto& item : result.items) hits += relevant.count(item.video_id);
  return static_cast<double>(hits) / static_cast<double>(result.items.size());
}

inline double precision_at_k(const RankedResult& result, const std::vector<std::string>& relevant) {
  return precision_at_k(result, std::set<std::string>(relevant.begin(), relevant.end()));
}

}  // namespace vidembed
