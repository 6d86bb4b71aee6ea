#pragma once

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidembed/heads/fuse.hpp"
#include "vidembed/util/parallel.hpp"

namespace vidembed {

inline constexpr std::size_t kDefaultTopK = 6;

struct RankedItem {
  std::string video_id;
  float score = 0.0f;

  friend bool operator==(const RankedItem&, const RankedItem&) = default;
};

/// Best-first hits: scores non-increasing, ties by ascending video_id.
struct RankedResult {
  std::vector<RankedItem> items;
  std::vector<float> query;  // the normalised query actually scored
};

namespace detail {

inline std::vector<float> prepare_query(std::span<const float> query, std::size_t dim, std::size_t k) {
  require(query.size() == dim, Errc::DimMismatch,
          "query has " + std::to_string(query.size()) + " dims, index " + std::to_string(dim));
  require(k >= 1, Errc::ConfigInvalid, "k must be >= 1");
  return l2_normalize(query);
}

inline float row_score(std::span<const float> row, std::span<const float> q) {
  return static_cast<float>(dot(row, q));
}

}  // namespace detail

/// Reference ranking: score every row, sort everything, keep the first k.
inline RankedResult brute_force_topk(const Tensor<float>& matrix, const std::vector<std::string>& ids,
                                     std::span<const float> query, std::size_t k) {
  require(matrix.rows() == ids.size(), Errc::ShapeMismatch, "one id per row required");
  RankedResult r;
  r.query = detail::prepare_query(query, matrix.cols(), k);
  std::vector<RankedItem> all;
  all.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) all.push_back({ids[i], detail::row_score(matrix.row(i), r.query)});
  std::sort(all.begin(), all.end(), [](const RankedItem& a, const RankedItem& b) {
    return a.score != b.score ? a.score > b.score : a.video_id < b.video_id;
  });
  all.resize(std::min(k, all.size()));
  r.items = std::move(all);
  return r;
}

/// Encode-once store of unit-norm video embeddings, scanned exhaustively per
/// query. Immutable after construction; concurrent queries are safe.
class RetrievalIndex {
 public:
  RetrievalIndex(std::vector<std::string> ids, Tensor<float> matrix, std::string head, std::string fingerprint,
                 std::vector<std::optional<std::size_t>> labels = {})
      : ids_(std::move(ids)),
        matrix_(std::move(matrix)),
        head_(std::move(head)),
        fingerprint_(std::move(fingerprint)),
        labels_(std::move(labels)) {
    require(!ids_.empty(), Errc::EmptyDataset, "index has no rows");
    require(matrix_.rank() == 2 && matrix_.rows() == ids_.size(), Errc::ShapeMismatch,
            "index matrix " + shape_str(matrix_.shape()) + " vs " + std::to_string(ids_.size()) + " ids");
    require(labels_.empty() || labels_.size() == ids_.size(), Errc::ShapeMismatch, "one label per row required");
    std::set<std::string> seen(ids_.begin(), ids_.end());
    require(seen.size() == ids_.size(), Errc::ConfigInvalid, "video ids must be unique");
    for (std::size_t r = 0; r < matrix_.rows(); ++r) {
      const double n = norm2(matrix_.row(r));
      require(std::abs(n - 1.0) <= 1e-5, Errc::ConfigInvalid,
              "row " + ids_[r] + " is not unit norm (" + std::to_string(n) + ")");
    }
  }

  /// Fuses every video once with `head`; row i is fuse(videos[i]).
  static RetrievalIndex build(const std::vector<FrameSequence>& videos, const HeadParams<float>& head,
                              std::size_t threads = 1) {
    require(emits_embedding(head.spec.kind), Errc::HeadNotEmbedding,
            "majority_vote produces class labels, not embeddings");
    require(!videos.empty(), Errc::EmptyDataset, "no videos to index");
    std::vector<VideoEmbedding> rows(videos.size());
    parallel_for(videos.size(), threads, [&](std::size_t i) { rows[i] = fuse(videos[i], head); });
    const std::size_t D = head.spec.d_out;
    std::vector<float> data;
    data.reserve(videos.size() * D);
    std::vector<std::string> ids;
    std::vector<std::optional<std::size_t>> labels;
    for (std::size_t i = 0; i < videos.size(); ++i) {
      data.insert(data.end(), rows[i].vector.begin(), rows[i].vector.end());
      ids.push_back(videos[i].video_id);
      labels.push_back(videos[i].label);
    }
    return RetrievalIndex(std::move(ids), Tensor<float>({videos.size(), D}, std::move(data)), head_name(head.spec.kind),
                          vidembed::fingerprint(head), std::move(labels));
  }

  /// Top-k rows by dot product with the normalised query (= cosine).
  RankedResult query(std::span<const float> q, std::size_t k = kDefaultTopK) const {
    RankedResult r;
    r.query = detail::prepare_query(q, dim(), k);
    std::vector<float> scores(size());
    for (std::size_t i = 0; i < size(); ++i) scores[i] = detail::row_score(matrix_.row(i), r.query);
    std::vector<std::size_t> order(size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t keep = std::min(k, size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        return scores[a] != scores[b] ? scores[a] > scores[b] : ids_[a] < ids_[b];
                      });
    r.items.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) r.items.push_back({ids_[order[i]], scores[order[i]]});
    return r;
  }

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return matrix_.cols(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const Tensor<float>& matrix() const noexcept { return matrix_; }
  const std::string& head() const noexcept { return head_; }
  const std::string& fingerprint() const noexcept { return fingerprint_; }
  const std::vector<std::optional<std::size_t>>& labels() const noexcept { return labels_; }

  nlohmann::json sidecar() const {
    nlohmann::json j = {{"format", "vidembed-index"}, {"version", 1},   {"head", head_},
                        {"fingerprint", fingerprint_}, {"dim", dim()}, {"ids", ids_}};
    if (!labels_.empty()) {
      auto arr = nlohmann::json::array();
      for (const auto& l : labels_) arr.push_back(l ? nlohmann::json(*l) : nlohmann::json(nullptr));
      j["labels"] = arr;
    }
    return j;
  }

  /// Writes `path` (VEMB matrix) and `path` + ".json" (sidecar).
  void save(const std::filesystem::path& path) const {
    write_embeddings(path, matrix_);
    write_file_atomic(sidecar_path(path), sidecar().dump(2) + "\n");
  }

  static RetrievalIndex load(const std::filesystem::path& path) {
    auto matrix = read_embeddings<float>(path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(sidecar_path(path)));
      require(j.value("format", "") == "vidembed-index", Errc::ParseError, "not an index sidecar");
      std::vector<std::optional<std::size_t>> labels;
      if (j.contains("labels"))
        for (const auto& l : j.at("labels")) labels.push_back(l.is_null() ? std::nullopt : std::optional(l.get<std::size_t>()));
      require(j.at("dim").get<std::size_t>() == matrix.cols(), Errc::DimMismatch, "sidecar dim disagrees with matrix");
      return RetrievalIndex(j.at("ids").get<std::vector<std::string>>(), std::move(matrix),
                            j.at("head").get<std::string>(), j.at("fingerprint").get<std::string>(), std::move(labels));
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::ParseError, path.string() + ".json: " + e.what());
    }
  }

  static std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    auto p = path;
    p += ".json";
    return p;
  }

 private:
  std::vector<std::string> ids_;
  Tensor<float> matrix_;
  std::string head_;
  std::string fingerprint_;
  std::vector<std::optional<std::size_t>> labels_;
};

}  // namespace vidembed
