#pragma once

// Synthetic stand-in for encoder-produced frame embeddings.
//
// anchor task:          class c drifts around its prototype p_c,
//                       f_t = normalize(p_c + σ·w_t)
// order-sensitive task: classes 2k and 2k+1 share anchors {a_k, b_k};
//                       class 2k walks a_k → b_k, class 2k+1 walks b_k → a_k,
//                       f_t = normalize((1-s_t)·start + s_t·end + σ·w_t), s_t = t/(T-1)
//
// w_t is AR(1) noise, w_t = ρ·w_{t-1} + sqrt(1-ρ²)·ε_t, ε_t ~ N(0, I), so
// consecutive frames are correlated. Each video draws from its own stream
// keyed by (seed, video_id).

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "vidembed/data/dataset.hpp"
#include "vidembed/data/rng.hpp"

namespace vidembed {

enum class TaskKind { Anchor, OrderSensitive };

inline std::string task_name(TaskKind k) { return k == TaskKind::Anchor ? "anchor" : "order"; }

inline TaskKind parse_task(const std::string& s) {
  if (s == "anchor") return TaskKind::Anchor;
  if (s == "order" || s == "order-sensitive") return TaskKind::OrderSensitive;
  fail(Errc::ConfigInvalid, "unknown task kind '" + s + "'");
}

struct SynthConfig {
  std::size_t classes = 25;
  std::size_t videos_per_class = 10;
  std::size_t val_videos_per_class = 0;  // > 0 tags records with train/val splits
  std::size_t frames = 100;
  std::size_t dim = 1024;
  double sigma = 0.05;
  double rho = 0.5;
  TaskKind task = TaskKind::Anchor;
  std::uint64_t seed = 0;
};

inline void validate(const SynthConfig& c) {
  require(c.classes >= 2, Errc::ConfigInvalid, "classes must be >= 2");
  require(c.videos_per_class >= 1 && c.frames >= 1 && c.dim >= 1, Errc::ConfigInvalid,
          "videos_per_class, frames and dim must be positive");
  require(c.sigma > 0.0 && c.sigma < 1.0, Errc::ConfigInvalid, "sigma must lie in (0, 1)");
  require(c.rho >= 0.0 && c.rho < 1.0, Errc::ConfigInvalid, "rho must lie in [0, 1)");
  if (c.task == TaskKind::OrderSensitive)
    require(c.classes % 2 == 0, Errc::ConfigInvalid, "order-sensitive task pairs classes; classes must be even");
}

struct SyntheticDataset {
  SynthConfig config;
  ClassPrototypes prototypes;
  std::vector<FrameSequence> videos;
  std::vector<std::string> splits;  // parallel to videos
  double frame_separability = 0.0;  // share of frames whose nearest prototype is their label

  std::vector<FrameSequence> select(const std::string& split) const {
    std::vector<FrameSequence> out;
    for (std::size_t i = 0; i < videos.size(); ++i)
      if (splits[i] == split) out.push_back(videos[i]);
    return out;
  }
};

namespace detail {

// Draws `count` Gaussian directions; Gram-Schmidt orthonormalises them when
// the dimension allows, otherwise just normalises.
inline std::vector<std::vector<double>> random_directions(std::size_t count, std::size_t dim, CounterRng& rng) {
  std::vector<std::vector<double>> out;
  const bool orthogonalize = dim >= count;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> v(dim);
    double norm = 0.0;
    // Redraw on the (measure-zero) event of a degenerate direction.
    do {
      for (auto& x : v) x = rng.normal();
      if (orthogonalize) {
        for (const auto& u : out) {
          double d = 0.0;
          for (std::size_t j = 0; j < dim; ++j) d += v[j] * u[j];
          for (std::size_t j = 0; j < dim; ++j) v[j] -= d * u[j];
        }
      }
      norm = 0.0;
      for (auto x : v) norm += x * x;
      norm = std::sqrt(norm);
    } while (norm < 1e-6);
    for (auto& x : v) x /= norm;
    out.push_back(std::move(v));
  }
  return out;
}

inline std::string video_name(std::size_t cls, std::size_t idx) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "c%03zu_v%04zu", cls, idx);
  return buf;
}

}  // namespace detail

inline SyntheticDataset synthesize(const SynthConfig& cfg) {
  validate(cfg);
  const std::size_t C = cfg.classes, D = cfg.dim, T = cfg.frames;
  SyntheticDataset ds;
  ds.config = cfg;

  CounterRng proto_rng(cfg.seed, fnv1a64("prototypes"));
  const bool order = cfg.task == TaskKind::OrderSensitive;
  // Order task: prototypes and anchors are drawn jointly so all are mutually
  // orthogonal when D >= 2C; anchors then carry no direct prototype signal.
  auto dirs = detail::random_directions(order ? 2 * C : C, D, proto_rng);

  std::vector<float> pv;
  for (std::size_t c = 0; c < C; ++c) {
    char name[32];
    std::snprintf(name, sizeof name, "class_%02zu", c);
    ds.prototypes.names.emplace_back(name);
    for (double x : dirs[c]) pv.push_back(static_cast<float>(x));
  }
  ds.prototypes.vectors = normalize_rows(Tensor<float>({C, D}, std::move(pv)));

  const double innov = std::sqrt(1.0 - cfg.rho * cfg.rho);
  const std::size_t per_class = cfg.videos_per_class + cfg.val_videos_per_class;
  std::size_t separable = 0, total_frames = 0;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t v = 0; v < per_class; ++v) {
      const auto id = detail::video_name(c, v);
      CounterRng rng(cfg.seed, fnv1a64(id));
      std::vector<double> w(D);
      for (auto& x : w) x = rng.normal();
      std::vector<float> frames;
      frames.reserve(T * D);
      for (std::size_t t = 0; t < T; ++t) {
        if (t > 0)
          for (auto& x : w) x = cfg.rho * x + innov * rng.normal();
        std::vector<double> f(D);
        if (!order) {
          for (std::size_t j = 0; j < D; ++j) f[j] = dirs[c][j] + cfg.sigma * w[j];
        } else {
          const std::size_t pair = c / 2;
          const auto& a = dirs[C + 2 * pair];
          const auto& b = dirs[C + 2 * pair + 1];
          const auto& start = (c % 2 == 0) ? a : b;
          const auto& end = (c % 2 == 0) ? b : a;
          const double s = T > 1 ? static_cast<double>(t) / static_cast<double>(T - 1) : 0.0;
          for (std::size_t j = 0; j < D; ++j) f[j] = (1.0 - s) * start[j] + s * end[j] + cfg.sigma * w[j];
        }
        auto unit = l2_normalize(std::span<const double>(f));
        frames.insert(frames.end(), unit.begin(), unit.end());
      }
      Tensor<float> ft({T, D}, std::move(frames));
      ft = normalize_rows(ft);  // exact float unit norm after narrowing
      if (!order) {
        for (std::size_t t = 0; t < T; ++t) {
          std::size_t best = 0;
          double best_s = -2.0;
          for (std::size_t k = 0; k < C; ++k) {
            const double s = dot(ft.row(t), ds.prototypes.vectors.row(k));
            if (s > best_s) best_s = s, best = k;
          }
          separable += best == c;
          ++total_frames;
        }
      }
      ds.videos.push_back(FrameSequence{id, std::move(ft), c});
      ds.splits.push_back(cfg.val_videos_per_class == 0 ? ""
                          : v < cfg.videos_per_class ? "train"
                                                     : "val");
    }
  }
  ds.frame_separability = total_frames ? static_cast<double>(separable) / static_cast<double>(total_frames) : 0.0;
  // Orthogonal prototypes with modest drift must stay frame-separable.
  if (!order && D >= C && cfg.sigma <= 0.1)
    require(ds.frame_separability >= 0.99, Errc::DegenerateData,
            "only " + std::to_string(ds.frame_separability) + " of frames are nearest to their own prototype");
  return ds;
}

inline nlohmann::json synth_config_json(const SynthConfig& c) {
  return {{"task", task_name(c.task)},
          {"classes", c.classes},
          {"videos_per_class", c.videos_per_class},
          {"val_videos_per_class", c.val_videos_per_class},
          {"frames", c.frames},
          {"dim", c.dim},
          {"sigma", c.sigma},
          {"rho", c.rho}};
}

/// Writes a synthetic dataset under `out_dir`:
///   manifest.jsonl, prototypes.vemb, videos/<video_id>.vemb
inline DatasetManifest generate_synthetic(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  auto ds = synthesize(cfg);
  DatasetManifest m;
  m.dim = cfg.dim;
  m.num_classes = cfg.classes;
  m.class_names = ds.prototypes.names;
  m.prototypes = "prototypes.vemb";
  m.seed = cfg.seed;
  m.extra = synth_config_json(cfg);
  if (cfg.task == TaskKind::Anchor) m.extra["frame_separability"] = ds.frame_separability;
  m.base_dir = out_dir;
  write_embeddings(out_dir / m.prototypes, ds.prototypes.vectors);
  for (std::size_t i = 0; i < ds.videos.size(); ++i) {
    const auto& v = ds.videos[i];
    const std::string rel = "videos/" + v.video_id + ".vemb";
    write_embeddings(out_dir / rel, v.frames);
    m.records.push_back(ManifestRecord{v.video_id, rel, v.label, v.length(), ds.splits[i]});
  }
  write_manifest(out_dir / "manifest.jsonl", m);
  return m;
}

}  // namespace vidembed
