#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "vidembed/numeric/tape.hpp"

namespace vidembed {

using NamedTensor = std::pair<std::string, Tensor<double>>;

/// Builds a scalar loss from parameter handles on the given tape.
using LossBuilder = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

struct GradCheckEntry {
  std::string name;
  std::size_t elements = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;

  bool all_passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
  }
  double worst() const {
    double w = 0.0;
    for (const auto& e : entries) w = std::max(w, e.max_rel_error);
    return w;
  }
};

/// Compares reverse-mode gradients against central differences
/// (f(θ+h) - f(θ-h)) / 2h, element by element, at 64-bit precision.
/// Relative error is |g_ad - g_fd| / max(1, |g_ad| + |g_fd|).
inline GradCheckReport grad_check(const LossBuilder& loss, const std::vector<NamedTensor>& params,
                                  double h = 1e-5, double tol = 1e-4) {
  auto evaluate = [&](const std::vector<Tensor<double>>& values, std::vector<std::vector<double>>* grads) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    vars.reserve(values.size());
    for (const auto& v : values) vars.push_back(tape.leaf(v.with_requires_grad(grads != nullptr)));
    auto out = loss(tape, vars);
    require(out.value().size() == 1, Errc::NonScalarLoss,
            "grad_check needs a scalar loss, got " + shape_str(out.value().shape()));
    const double f = out.value()[0];
    if (grads) {
      tape.backward(out);
      for (const auto& v : vars) grads->push_back(tape.grad_tensor(v).to_vector());
    }
    return f;
  };

  std::vector<Tensor<double>> base;
  for (const auto& [_, t] : params) base.push_back(t);

  std::vector<std::vector<double>> analytic;
  evaluate(base, &analytic);

  GradCheckReport report;
  report.tolerance = tol;
  for (std::size_t p = 0; p < base.size(); ++p) {
    GradCheckEntry entry{params[p].first, base[p].size(), 0.0, true};
    auto original = base[p].to_vector();
    for (std::size_t i = 0; i < original.size(); ++i) {
      auto shifted = original;
      shifted[i] = original[i] + h;
      base[p] = Tensor<double>(params[p].second.shape(), shifted);
      const double up = evaluate(base, nullptr);
      shifted[i] = original[i] - h;
      base[p] = Tensor<double>(params[p].second.shape(), shifted);
      const double down = evaluate(base, nullptr);
      const double fd = (up - down) / (2.0 * h);
      const double ad = analytic[p][i];
      const double rel = std::abs(ad - fd) / std::max(1.0, std::abs(ad) + std::abs(fd));
      entry.max_rel_error = std::max(entry.max_rel_error, rel);
    }
    base[p] = params[p].second;
    entry.passed = entry.max_rel_error < tol;
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace vidembed
