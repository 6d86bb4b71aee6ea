#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidembed/data/normalize.hpp"
#include "vidembed/data/sampling.hpp"
#include "vidembed/data/vemb.hpp"

namespace vidembed {

/// Per-frame visual embeddings of one video (T×D).
struct FrameSequence {
  std::string video_id;
  Tensor<float> frames;
  std::optional<std::size_t> label;

  std::size_t length() const { return frames.rows(); }
  std::size_t dim() const { return frames.cols(); }
};

/// Frozen text-side class embeddings, one unit-norm row per class.
struct ClassPrototypes {
  std::vector<std::string> names;
  Tensor<float> vectors;

  std::size_t count() const { return names.size(); }
  std::size_t dim() const { return vectors.cols(); }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    return std::nullopt;
  }
};

inline void validate_prototypes(const ClassPrototypes& p) {
  require(p.names.size() >= 2, Errc::ConfigInvalid, "need at least two classes");
  require(p.vectors.rank() == 2 && p.vectors.rows() == p.names.size(), Errc::ShapeMismatch,
          "prototype matrix " + shape_str(p.vectors.shape()) + " vs " + std::to_string(p.names.size()) +
              " names");
  std::set<std::string> seen(p.names.begin(), p.names.end());
  require(seen.size() == p.names.size(), Errc::ConfigInvalid, "class names must be unique");
  for (std::size_t r = 0; r < p.vectors.rows(); ++r) {
    const double n = norm2(p.vectors.row(r));
    require(std::abs(n - 1.0) <= 1e-5, Errc::ConfigInvalid,
            "prototype " + p.names[r] + " has norm " + std::to_string(n));
  }
}

struct ManifestRecord {
  std::string video_id;
  std::string path;  // relative to the manifest directory
  std::optional<std::size_t> label;
  std::size_t frames = 0;
  std::string split;  // "train", "val" or empty
};

/// Line-delimited JSON: one header object, then one object per video.
struct DatasetManifest {
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  std::vector<std::string> class_names;
  std::string prototypes;  // relative path of the prototype VEMB file, may be empty
  std::optional<std::uint64_t> seed;
  nlohmann::json extra = nlohmann::json::object();  // generator details, passed through
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& rel) const { return base_dir / rel; }

  std::vector<const ManifestRecord*> split(const std::string& name) const {
    std::vector<const ManifestRecord*> out;
    for (const auto& r : records)
      if (r.split == name) out.push_back(&r);
    return out;
  }
};

inline std::string manifest_to_jsonl(const DatasetManifest& m) {
  nlohmann::json head = {{"format", "vidembed-manifest"},
                         {"version", 1},
                         {"dim", m.dim},
                         {"num_classes", m.num_classes},
                         {"class_names", m.class_names},
                         {"prototypes", m.prototypes}};
  if (m.seed) head["seed"] = *m.seed;
  if (!m.extra.empty()) head["generator"] = m.extra;
  std::string out = head.dump() + "\n";
  for (const auto& r : m.records) {
    nlohmann::json j = {{"video_id", r.video_id}, {"path", r.path}, {"frames", r.frames}};
    j["label"] = r.label ? nlohmann::json(*r.label) : nlohmann::json(nullptr);
    if (!r.split.empty()) j["split"] = r.split;
    out += j.dump() + "\n";
  }
  return out;
}

inline void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  write_file_atomic(path, manifest_to_jsonl(m));
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  DatasetManifest m;
  m.base_dir = path.parent_path();
  std::string line;
  bool have_header = false;
  std::size_t lineno = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      if (!have_header) {
        require(j.value("format", "") == "vidembed-manifest", Errc::ParseError, "missing manifest header");
        m.dim = j.at("dim").get<std::size_t>();
        m.num_classes = j.at("num_classes").get<std::size_t>();
        m.class_names = j.value("class_names", std::vector<std::string>{});
        m.prototypes = j.value("prototypes", "");
        if (j.contains("seed")) m.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("generator")) m.extra = j.at("generator");
        have_header = true;
        continue;
      }
      ManifestRecord r;
      r.video_id = j.at("video_id").get<std::string>();
      r.path = j.at("path").get<std::string>();
      r.frames = j.at("frames").get<std::size_t>();
      if (j.contains("label") && !j.at("label").is_null()) r.label = j.at("label").get<std::size_t>();
      r.split = j.value("split", "");
      require(ids.insert(r.video_id).second, Errc::ParseError, "duplicate video_id " + r.video_id);
      if (r.label) require(*r.label < m.num_classes, Errc::ParseError, "label out of range for " + r.video_id);
      m.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::ParseError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  require(have_header, Errc::ParseError, path.string() + ": empty manifest");
  return m;
}

/// Checks that every record's file exists with the declared shape.
inline void validate_manifest(const DatasetManifest& m) {
  for (const auto& r : m.records) {
    const auto info = read_vemb_info(m.resolve(r.path));
    require(info.shape.size() == 2 && info.shape[0] == r.frames && info.shape[1] == m.dim, Errc::DimMismatch,
            r.video_id + ": file shape " + shape_str(info.shape) + " disagrees with manifest");
  }
}

inline ClassPrototypes load_prototypes(const DatasetManifest& m) {
  require(!m.prototypes.empty(), Errc::ConfigInvalid, "manifest names no prototype file");
  ClassPrototypes p{m.class_names, read_embeddings<float>(m.resolve(m.prototypes))};
  require(p.vectors.cols() == m.dim, Errc::DimMismatch, "prototype dimension differs from manifest");
  validate_prototypes(p);
  return p;
}

/// Loads one video, optionally resampling to `target_frames` (0 keeps all),
/// and L2-normalises every frame.
inline FrameSequence load_sequence(const DatasetManifest& m, const ManifestRecord& r, std::size_t target_frames = 0) {
  auto raw = read_embeddings<float>(m.resolve(r.path));
  if (raw.rank() == 1) raw = raw.reshaped({1, raw.size()});
  require(raw.cols() == m.dim, Errc::DimMismatch, r.video_id + ": dimension " + std::to_string(raw.cols()));
  if (target_frames != 0 && target_frames != raw.rows()) {
    const auto idx = sample_frames(raw.rows(), target_frames);
    std::vector<float> d;
    d.reserve(idx.size() * raw.cols());
    for (auto i : idx) d.insert(d.end(), raw.row(i).begin(), raw.row(i).end());
    raw = Tensor<float>({idx.size(), raw.cols()}, std::move(d));
  }
  return FrameSequence{r.video_id, normalize_rows(raw), r.label};
}

inline std::vector<FrameSequence> load_sequences(const DatasetManifest& m,
                                                 const std::vector<const ManifestRecord*>& records,
                                                 std::size_t target_frames = 0) {
  std::vector<FrameSequence> out;
  out.reserve(records.size());
  for (const auto* r : records) out.push_back(load_sequence(m, *r, target_frames));
  return out;
}

inline std::vector<FrameSequence> load_all(const DatasetManifest& m, std::size_t target_frames = 0) {
  std::vector<const ManifestRecord*> all;
  for (const auto& r : m.records) all.push_back(&r);
  return load_sequences(m, all, target_frames);
}

}  // namespace vidembed
