#pragma once

#include <map>
#include <vector>

#include "vidembed/data/dataset.hpp"

namespace vidembed {

struct ClusterSeparation {
  double intra_video_distance = 0.0;  // mean 1 - cos over frame pairs within a video
  double inter_class_distance = 0.0;  // mean 1 - cos over frame pairs from different classes
  double ratio = 0.0;
};

/// Frame-level clustering check: ratio < 1 means frames of one video sit
/// closer together than frames of different classes.
///
/// Pair sums use Σ_{s<t} ⟨f_s, f_t⟩ = (‖Σ f‖² - Σ ‖f‖²) / 2 over unit frames,
/// so the cost is linear in the number of frames.
inline ClusterSeparation cluster_separation(const std::vector<FrameSequence>& videos) {
  require(videos.size() >= 2, Errc::InsufficientData, "need at least two videos");
  const std::size_t D = videos.front().dim();
  double intra_sum = 0.0, intra_pairs = 0.0;
  std::map<std::size_t, std::pair<std::vector<double>, double>> by_class;  // label -> (Σ f, count)
  for (const auto& v : videos) {
    require(v.label.has_value(), Errc::InsufficientData, v.video_id + " has no class label");
    require(v.dim() == D, Errc::DimMismatch, v.video_id + " dimension differs");
    std::vector<double> s(D, 0.0);
    for (std::size_t t = 0; t < v.length(); ++t) {
      const auto f = l2_normalize(v.frames.row(t));
      for (std::size_t j = 0; j < D; ++j) s[j] += f[j];
    }
    const double T = static_cast<double>(v.length());
    double ss = 0.0;
    for (double x : s) ss += x * x;
    if (v.length() >= 2) {
      intra_sum += (ss - T) / 2.0;
      intra_pairs += T * (T - 1.0) / 2.0;
    }
    auto& [cs, cn] = by_class[*v.label];
    if (cs.empty()) cs.assign(D, 0.0);
    for (std::size_t j = 0; j < D; ++j) cs[j] += s[j];
    cn += T;
  }
  require(intra_pairs > 0.0, Errc::InsufficientData, "no video has two or more frames");
  require(by_class.size() >= 2, Errc::InsufficientData, "need frames from at least two classes");

  std::vector<double> all(D, 0.0);
  double within_class_ss = 0.0, n_all = 0.0, n_sq = 0.0;
  for (const auto& [_, entry] : by_class) {
    const auto& [cs, cn] = entry;
    for (std::size_t j = 0; j < D; ++j) {
      all[j] += cs[j];
      within_class_ss += cs[j] * cs[j];
    }
    n_all += cn;
    n_sq += cn * cn;
  }
  double all_ss = 0.0;
  for (double x : all) all_ss += x * x;
  const double inter_cos = (all_ss - within_class_ss) / 2.0;
  const double inter_pairs = (n_all * n_all - n_sq) / 2.0;

  ClusterSeparation r;
  r.intra_video_distance = std::max(0.0, 1.0 - intra_sum / intra_pairs);
  r.inter_class_distance = 1.0 - inter_cos / inter_pairs;
  require(r.inter_class_distance > 1e-12, Errc::DegenerateData, "frames of different classes coincide");
  r.ratio = r.intra_video_distance / r.inter_class_distance;
  return r;
}

}  // namespace vidembed
