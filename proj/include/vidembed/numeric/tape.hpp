#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "vidembed/numeric/tensor.hpp"

namespace vidembed {

template <std::floating_point T>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive and has not been reset.
template <std::floating_point T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape(); }
};

/// Ordered record of primitive operations for reverse-mode differentiation.
///
/// Nodes are appended as operations run. `backward` seeds d(loss)/d(loss) = 1
/// and replays each node's adjoint rule in exact reverse recording order,
/// summing contributions into input gradients. A tape can be consumed by one
/// backward pass; call `reset` before recording again.
template <std::floating_point T>
class Tape {
 public:
  /// Adjoint rule: receives the tape and the id of the node being replayed.
  using Adjoint = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Records an input. Gradients are tracked when the tensor requires them.
  Var<T> leaf(Tensor<T> value) {
    check_open();
    bool rg = value.requires_grad();
    return push(std::move(value), rg, {}, {});
  }

  Var<T> constant(Tensor<T> value) { return leaf(value.with_requires_grad(false)); }

  /// Records the output of a primitive. The adjoint is kept only when some
  /// input needs a gradient.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, Adjoint adjoint) {
    check_open();
    bool rg = false;
    std::vector<std::size_t> ids;
    ids.reserve(inputs.size());
    for (const auto& in : inputs) {
      require(in.tape == this, Errc::ShapeMismatch, "operand recorded on a different tape");
      rg = rg || nodes_[in.id].requires_grad;
      ids.push_back(in.id);
    }
    return push(std::move(value), rg, std::move(ids), rg ? std::move(adjoint) : Adjoint{});
  }

  /// Variadic-input flavour of `record` for concatenations.
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& inputs, Adjoint adjoint) {
    check_open();
    bool rg = false;
    std::vector<std::size_t> ids;
    for (const auto& in : inputs) {
      require(in.tape == this, Errc::ShapeMismatch, "operand recorded on a different tape");
      rg = rg || nodes_[in.id].requires_grad;
      ids.push_back(in.id);
    }
    return push(std::move(value), rg, std::move(ids), rg ? std::move(adjoint) : Adjoint{});
  }

  const Tensor<T>& value(Var<T> v) const { return nodes_.at(v.id).value; }
  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_.at(id).inputs; }

  /// Gradient of the last backward pass w.r.t. `v`. Empty span when `v`
  /// received no gradient.
  std::span<const T> grad(Var<T> v) const {
    const auto& g = nodes_.at(v.id).grad;
    return {g.data(), g.size()};
  }

  Tensor<T> grad_tensor(Var<T> v) const {
    const auto& n = nodes_.at(v.id);
    if (n.grad.empty()) return Tensor<T>::zeros(n.value.shape());
    return Tensor<T>(n.value.shape(), n.grad);
  }

  /// Mutable gradient buffer for adjoint rules; zero-initialised on first use.
  std::span<T> grad_buffer(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.value.size(), T(0));
    return {n.grad.data(), n.grad.size()};
  }

  void backward(Var<T> loss) {
    require(!consumed_, Errc::TapeConsumed, "tape already consumed by a backward pass");
    require(loss.tape == this, Errc::ShapeMismatch, "loss was not recorded on this tape");
    require(value(loss).size() == 1, Errc::NonScalarLoss,
            "backward needs a scalar loss, got " + shape_str(value(loss).shape()));
    consumed_ = true;
    visit_order_.clear();
    grad_buffer(loss.id)[0] = T(1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.adjoint || n.grad.empty()) continue;
      visit_order_.push_back(i);
      n.adjoint(*this, i);
    }
  }

  /// Node ids whose adjoints ran during the last backward pass, in run order.
  const std::vector<std::size_t>& visit_order() const noexcept { return visit_order_; }

  void reset() {
    nodes_.clear();
    visit_order_.clear();
    consumed_ = false;
  }

  bool consumed() const noexcept { return consumed_; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    Adjoint adjoint;
    std::vector<T> grad;
  };

  void check_open() const {
    require(!consumed_, Errc::TapeConsumed, "cannot record on a consumed tape; reset it first");
  }

  Var<T> push(Tensor<T> value, bool rg, std::vector<std::size_t> inputs, Adjoint adjoint) {
    nodes_.push_back(Node{std::move(value), rg, std::move(inputs), std::move(adjoint), {}});
    return Var<T>{this, nodes_.size() - 1};
  }

  std::deque<Node> nodes_;  // stable references across push_back
  std::vector<std::size_t> visit_order_;
  bool consumed_ = false;
};

}  // namespace vidembed
