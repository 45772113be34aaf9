#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tacnn/core/error.hpp"
#include "tacnn/core/tensor.hpp"

#ifndef TACNN_CHECK_FINITE
#ifdef NDEBUG
#define TACNN_CHECK_FINITE 0
#else
#define TACNN_CHECK_FINITE 1
#endif
#endif

namespace tacnn {

/// A named trainable tensor with its accumulated gradient.
template <typename S>
struct Parameter {
  Parameter() = default;
  Parameter(std::string n, Tensor<S> v) : name(std::move(n)), value(std::move(v)), grad(value.dims()) {}

  std::string name;
  Tensor<S> value;
  Tensor<S> grad;

  void zero_grad() { grad = Tensor<S>(value.dims()); }
  std::size_t size() const { return value.size(); }
};

template <typename S>
class Tape;

/// Handle to a value recorded on a tape. Cheap to copy; only valid until the
/// owning tape is cleared.
template <typename S>
class Var {
 public:
  Var() = default;

  const Tensor<S>& value() const;
  const Shape& dims() const { return value().dims(); }
  std::size_t dim(std::size_t axis) const { return value().dim(axis); }
  bool requires_grad() const;
  std::size_t id() const noexcept { return id_; }
  Tape<S>* tape() const noexcept { return tape_; }

 private:
  friend class Tape<S>;
  Var(Tape<S>* t, std::size_t id, std::uint64_t gen) : tape_(t), id_(id), generation_(gen) {}

  Tape<S>* tape_ = nullptr;
  std::size_t id_ = 0;
  std::uint64_t generation_ = 0;
};

/// Local gradient rule: receives dLoss/dOutput and the op's own output, and
/// accumulates into the gradient buffers of the inputs. Null entries mark
/// inputs that need no gradient.
template <typename S>
using BackwardFn = std::function<void(const Tensor<S>& grad_out, const Tensor<S>& out,
                                      std::span<Tensor<S>* const> grad_in)>;

template <typename S>
struct TapeNode {
  Tensor<S> value;
  const Tensor<S>* external = nullptr;  // parameter leaves alias the parameter's storage
  std::vector<std::size_t> inputs;
  std::string_view rule;
  BackwardFn<S> backward;
  bool requires_grad = false;
  Parameter<S>* param = nullptr;

  const Tensor<S>& get() const { return external ? *external : value; }
};

/// Gradients of the non-parameter leaves that asked for them, keyed by the
/// id of the leaf variable.
template <typename S>
class Gradients {
 public:
  const Tensor<S>& of(const Var<S>& v) const {
    auto it = grads_.find(v.id());
    if (it == grads_.end()) throw UsageError("no gradient recorded for variable " + std::to_string(v.id()));
    return it->second;
  }
  bool contains(const Var<S>& v) const { return grads_.count(v.id()) != 0; }
  std::size_t size() const { return grads_.size(); }

 private:
  friend class Tape<S>;
  std::unordered_map<std::size_t, Tensor<S>> grads_;
};

/// Append-only record of a forward computation. Creation order is a
/// topological order; backward walks it once in reverse and then clears it.
template <typename S>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// When disabled, ops record values only and every output is detached.
  void set_grad_enabled(bool on) noexcept { grad_enabled_ = on; }
  bool grad_enabled() const noexcept { return grad_enabled_; }

  /// Optional multiply-accumulate counter incremented by compute ops.
  void set_mac_counter(std::uint64_t* counter) noexcept { macs_ = counter; }
  void count_macs(std::uint64_t n) noexcept {
    if (macs_) *macs_ += n;
  }

  Var<S> constant(Tensor<S> value) { return push_leaf(std::move(value), nullptr, false, nullptr); }

  Var<S> input(Tensor<S> value, bool requires_grad = true) {
    return push_leaf(std::move(value), nullptr, requires_grad && grad_enabled_, nullptr);
  }

  Var<S> param(Parameter<S>& p) {
    if (p.grad.dims() != p.value.dims()) p.zero_grad();
    return push_leaf(Tensor<S>{}, &p.value, grad_enabled_, &p);
  }

  /// Records the result of an op. The rule is kept only when some input
  /// participates in differentiation.
  Var<S> record(Tensor<S> value, std::string_view rule, std::initializer_list<Var<S>> inputs,
                BackwardFn<S> backward) {
    return record(std::move(value), rule, std::vector<Var<S>>(inputs), std::move(backward));
  }

  Var<S> record(Tensor<S> value, std::string_view rule, const std::vector<Var<S>>& inputs,
                BackwardFn<S> backward) {
#if TACNN_CHECK_FINITE
    if (!value.all_finite()) throw NumericError(std::string("non-finite output from ") + std::string(rule));
#endif
    TapeNode<S> node;
    node.value = std::move(value);
    node.rule = rule;
    bool needs = false;
    node.inputs.reserve(inputs.size());
    for (const auto& v : inputs) {
      check_owned(v);
      node.inputs.push_back(v.id());
      needs = needs || nodes_[v.id()].requires_grad;
    }
    node.requires_grad = grad_enabled_ && needs;
    if (node.requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var<S>(this, nodes_.size() - 1, generation_);
  }

  const Tensor<S>& value(const Var<S>& v) const {
    check_owned(v);
    return nodes_[v.id()].get();
  }
  bool requires_grad(const Var<S>& v) const {
    check_owned(v);
    return nodes_[v.id()].requires_grad;
  }
  std::string_view rule(const Var<S>& v) const {
    check_owned(v);
    return nodes_[v.id()].rule;
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }

  /// Reverse-mode sweep from a scalar loss. Parameter gradients accumulate
  /// into Parameter::grad; input-leaf gradients are returned. The tape is
  /// cleared afterwards.
  Gradients<S> backward(const Var<S>& loss) {
    if (nodes_.empty()) throw UsageError("backward on an empty tape");
    check_owned(loss);
    const auto& root = nodes_[loss.id()];
    if (root.get().dims() != Shape{1, 1, 1, 1}) {
      throw UsageError("backward requires a scalar loss, got " + to_string(root.get().dims()));
    }
    if (!root.requires_grad) throw UsageError("backward on a detached graph");

    std::vector<std::optional<Tensor<S>>> grads(nodes_.size());
    grads[loss.id()] = Tensor<S>::ones(Shape{1, 1, 1, 1});
    Gradients<S> out;
    std::vector<Tensor<S>*> slots;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      auto& node = nodes_[i];
      if (!grads[i] || !node.requires_grad) continue;
      if (node.backward) {
        slots.assign(node.inputs.size(), nullptr);
        for (std::size_t k = 0; k < node.inputs.size(); ++k) {
          const auto j = node.inputs[k];
          if (!nodes_[j].requires_grad) continue;
          if (!grads[j]) grads[j] = Tensor<S>(nodes_[j].get().dims());
          slots[k] = &*grads[j];
        }
        node.backward(*grads[i], node.get(), slots);
      } else if (node.param) {
        auto acc = node.param->grad.data();
        const auto g = grads[i]->data();
        for (std::size_t k = 0; k < g.size(); ++k) acc[k] += g[k];
      } else {
        out.grads_.emplace(i, std::move(*grads[i]));
      }
      grads[i].reset();
    }
    clear();
    return out;
  }

  void clear() {
    nodes_.clear();
    ++generation_;
  }

 private:
  Var<S> push_leaf(Tensor<S> value, const Tensor<S>* external, bool requires_grad, Parameter<S>* p) {
    TapeNode<S> node;
    node.value = std::move(value);
    node.external = external;
    node.rule = p ? "param" : "leaf";
    node.requires_grad = requires_grad;
    node.param = p;
    nodes_.push_back(std::move(node));
    return Var<S>(this, nodes_.size() - 1, generation_);
  }

  void check_owned(const Var<S>& v) const {
    if (v.tape_ != this || v.generation_ != generation_ || v.id_ >= nodes_.size()) {
      throw UsageError("variable does not belong to the current tape");
    }
  }

  std::deque<TapeNode<S>> nodes_;
  std::uint64_t generation_ = 1;
  bool grad_enabled_ = true;
  std::uint64_t* macs_ = nullptr;
};

template <typename S>
const Tensor<S>& Var<S>::value() const {
  if (!tape_) throw UsageError("unbound variable");
  return tape_->value(*this);
}

template <typename S>
bool Var<S>::requires_grad() const {
  if (!tape_) throw UsageError("unbound variable");
  return tape_->requires_grad(*this);
}

}  // namespace tacnn
