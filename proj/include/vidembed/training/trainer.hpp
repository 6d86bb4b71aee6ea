#pragma once

#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "vidembed/data/rng.hpp"
#include "vidembed/numeric/adam.hpp"
#include "vidembed/training/evaluate.hpp"

namespace vidembed {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  double temperature = 10.0;
  double split = 0.8;  // train share when the data carries no split tags
  std::size_t threads = 1;
  HeadSpec head;
};

inline void validate(const TrainConfig& c) {
  require(c.lr > 0.0, Errc::ConfigInvalid, "lr must be positive");
  require(c.epochs >= 1, Errc::ConfigInvalid, "epochs must be >= 1");
  require(c.batch_size >= 1, Errc::ConfigInvalid, "batch_size must be >= 1");
  require(c.temperature > 0.0, Errc::ConfigInvalid, "temperature must be positive");
  require(c.split > 0.0 && c.split < 1.0, Errc::ConfigInvalid, "split must lie in (0, 1)");
  require(is_trainable(c.head.kind), Errc::HeadNotTrainable, head_name(c.head.kind) + " has nothing to train");
  validate(c.head);
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  HeadParams<float> params;
  TrainHistory history;
};

/// Plot data for the loss/accuracy curves. Wall-clock time is left out so the
/// file is a pure function of the inputs.
inline std::string history_csv(const TrainHistory& h) {
  std::string out = "epoch,train_loss,val_loss,train_acc,val_acc\n";
  char buf[160];
  for (const auto& e : h.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g\n", e.epoch, e.train_loss, e.val_loss, e.train_acc,
                  e.val_acc);
    out += buf;
  }
  return out;
}

struct LossAccuracy {
  double loss = 0.0;
  double accuracy = 0.0;
};

namespace detail {

struct SampleOutcome {
  double loss = 0.0;
  bool correct = false;
  std::vector<std::vector<float>> grads;  // empty unless requested
};

inline SampleOutcome run_sample(const HeadParams<float>& params, const FrameSequence& seq,
                                const Tensor<float>& proto_columns, float temperature, bool want_grad) {
  Tape<float> tape;
  auto bound = bind(tape, params, want_grad);
  auto frames = tape.constant(seq.frames);
  auto v = embed_on_tape(tape, bound, frames);
  auto z = ops::scale(ops::matmul(v, tape.constant(proto_columns)), temperature);
  auto loss = ops::softmax_cross_entropy(z, *seq.label);
  SampleOutcome out;
  out.loss = loss.value()[0];
  out.correct = argmax(z.value().data()) == *seq.label;
  if (want_grad) {
    tape.backward(loss);
    out.grads.reserve(bound.vars.size());
    for (const auto& var : bound.vars) out.grads.push_back(tape.grad_tensor(var).to_vector());
  }
  return out;
}

inline void check_labels(const std::vector<FrameSequence>& videos, const ClassPrototypes& protos,
                         std::size_t d_in) {
  for (const auto& v : videos) {
    require(v.label.has_value() && *v.label < protos.count(), Errc::ConfigInvalid,
            v.video_id + " lacks a valid label");
    require(v.dim() == d_in, Errc::DimMismatch, v.video_id + " dimension differs from the head input");
  }
}

}  // namespace detail

/// Mean cross-entropy and top-1 accuracy with the given parameters.
inline LossAccuracy measure(const HeadParams<float>& params, const std::vector<FrameSequence>& videos,
                            const ClassPrototypes& protos, double temperature, std::size_t threads = 1) {
  if (videos.empty()) return {};
  const auto cols = prototype_columns<float>(protos);
  std::vector<detail::SampleOutcome> outs(videos.size());
  parallel_for(videos.size(), threads, [&](std::size_t i) {
    outs[i] = detail::run_sample(params, videos[i], cols, static_cast<float>(temperature), false);
  });
  LossAccuracy r;
  for (const auto& o : outs) {
    r.loss += o.loss;
    r.accuracy += o.correct ? 1.0 : 0.0;
  }
  r.loss /= static_cast<double>(videos.size());
  r.accuracy /= static_cast<double>(videos.size());
  return r;
}

/// Mini-batch Adam on softmax cross-entropy of τ-scaled dot-product logits
/// against frozen prototypes. Per-sample gradients are reduced in batch order,
/// so results are bit-identical for any thread count. Each epoch record holds
/// the loss and accuracy of both sets measured after that epoch's updates.
/// An empty validation set reports zeros.
inline TrainResult train(const std::vector<FrameSequence>& train_set, const std::vector<FrameSequence>& val_set,
                         const ClassPrototypes& protos, const TrainConfig& cfg,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  validate(cfg);
  require(!train_set.empty(), Errc::EmptyDataset, "training set is empty");
  require(cfg.head.d_out == protos.dim(), Errc::DimMismatch, "head output dimension differs from prototypes");
  detail::check_labels(train_set, protos, cfg.head.d_in);
  detail::check_labels(val_set, protos, cfg.head.d_in);

  TrainResult result{init_params<float>(cfg.head, cfg.seed), {}};
  auto& params = result.params;
  AdamHyper hyper;
  hyper.lr = cfg.lr;
  std::vector<AdamState<float>> states;
  for (const auto& [_, t] : params.tensors) states.emplace_back(t.shape(), hyper);

  const auto cols = prototype_columns<float>(protos);
  const auto tau = static_cast<float>(cfg.temperature);
  std::vector<std::size_t> order(train_set.size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(cfg.seed, fnv1a64("shuffle/" + std::to_string(epoch)));
    shuffle(order, rng);

    for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_size) {
      const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
      std::vector<detail::SampleOutcome> outs(hi - lo);
      parallel_for(hi - lo, cfg.threads, [&](std::size_t i) {
        outs[i] = detail::run_sample(params, train_set[order[lo + i]], cols, tau, true);
      });
      const float inv = 1.0f / static_cast<float>(hi - lo);
      for (std::size_t p = 0; p < params.tensors.size(); ++p) {
        std::vector<float> g(params.tensors[p].second.size(), 0.0f);
        for (const auto& o : outs)
          for (std::size_t j = 0; j < g.size(); ++j) g[j] += o.grads[p][j];
        for (auto& x : g) x *= inv;
        auto& slot = params.tensors[p].second;
        slot = adam_step(slot, Tensor<float>(slot.shape(), std::move(g)), states[p]);
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    const auto tr = measure(params, train_set, protos, cfg.temperature, cfg.threads);
    const auto va = measure(params, val_set, protos, cfg.temperature, cfg.threads);
    rec.train_loss = tr.loss;
    rec.train_acc = tr.accuracy;
    rec.val_loss = va.loss;
    rec.val_acc = va.accuracy;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    require(std::isfinite(rec.train_loss) && std::isfinite(rec.val_loss), Errc::NonFinite,
            "loss diverged at epoch " + std::to_string(epoch));
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

/// Deterministic split of unlabeled-split data: seeded shuffle, then the first
/// round(split·N) videos train (at least one, and at least one held out when N ≥ 2).
inline std::pair<std::vector<FrameSequence>, std::vector<FrameSequence>> split_videos(
    const std::vector<FrameSequence>& videos, double split, std::uint64_t seed) {
  std::vector<std::size_t> idx(videos.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  CounterRng rng(seed, fnv1a64("split"));
  shuffle(idx, rng);
  auto n_train = static_cast<std::size_t>(std::llround(split * static_cast<double>(videos.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, videos.size() > 1 ? videos.size() - 1 : 1);
  std::pair<std::vector<FrameSequence>, std::vector<FrameSequence>> out;
  for (std::size_t i = 0; i < idx.size(); ++i) (i < n_train ? out.first : out.second).push_back(videos[idx[i]]);
  return out;
}

/// Manifest-level entry point: uses the records' train/val tags when present,
/// otherwise a seeded `split` fraction.
inline TrainResult train(const DatasetManifest& manifest, const ClassPrototypes& protos, const TrainConfig& cfg,
                         std::size_t target_frames = 0,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  validate(cfg);
  require(!manifest.records.empty(), Errc::EmptyDataset, "manifest lists no videos");
  auto tagged_train = manifest.split("train");
  if (!tagged_train.empty()) {
    return train(load_sequences(manifest, tagged_train, target_frames),
                 load_sequences(manifest, manifest.split("val"), target_frames), protos, cfg, on_epoch);
  }
  auto [tr, va] = split_videos(load_all(manifest, target_frames), cfg.split, cfg.seed);
  return train(tr, va, protos, cfg, on_epoch);
}

}  // namespace vidembed
