#pragma once

#include "vidembed/data/rng.hpp"
#include "vidembed/numeric/grad_check.hpp"
#include "vidembed/training/objective.hpp"

namespace vidembed {

struct HeadGradCheckOptions {
  std::size_t frames = 4;
  std::size_t classes = 3;
  std::size_t label = 0;
  double temperature = 10.0;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
};

/// Finite-difference check of every parameter of a trainable head through the
/// full classification loss, on random unit frames and prototypes.
inline GradCheckReport check_head_gradients(const HeadSpec& spec, const HeadGradCheckOptions& opt = {}) {
  require(is_trainable(spec.kind), Errc::HeadNotTrainable, head_name(spec.kind) + " has no parameters");
  const auto params = init_params<double>(spec, opt.seed);
  CounterRng rng(opt.seed, fnv1a64("gradcheck/inputs"));
  auto random_unit_rows = [&](std::size_t rows, std::size_t cols) {
    std::vector<double> d;
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<double> v(cols);
      for (auto& x : v) x = rng.normal();
      auto u = l2_normalize(std::span<const double>(v));
      d.insert(d.end(), u.begin(), u.end());
    }
    return Tensor<double>({rows, cols}, std::move(d));
  };
  const auto frames = random_unit_rows(opt.frames, spec.d_in);
  const auto protos = random_unit_rows(opt.classes, spec.d_out);
  std::vector<double> cols(spec.d_out * opt.classes);
  for (std::size_t c = 0; c < opt.classes; ++c)
    for (std::size_t j = 0; j < spec.d_out; ++j) cols[j * opt.classes + c] = protos.at(c, j);
  const Tensor<double> proto_cols({spec.d_out, opt.classes}, std::move(cols));

  LossBuilder loss = [&](Tape<double>& tape, const std::vector<Var<double>>& vars) {
    // The loop in grad_check hands over fresh tensors; rebuild the binding.
    BoundParams<double> bound{&params, vars};
    return classification_loss(tape, bound, tape.constant(frames), tape.constant(proto_cols), opt.label,
                               opt.temperature);
  };
  return grad_check(loss, params.tensors, opt.step, opt.tolerance);
}

}  // namespace vidembed
