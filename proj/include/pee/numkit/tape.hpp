#pragma once
// Reverse-mode differentiation tape.
//
// A Tape is an append-only list of nodes. Each node stores its forward value,
// the ids of its inputs (always smaller than its own id) and a local backward
// rule. Parameters enter the tape as leaves through Tape::param and are
// identified by the address of their Tensor; `backward` returns gradients
// keyed by that identity.

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pee/numkit/tensor.hpp"

namespace pee::nk {

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const;
  std::uint32_t id() const noexcept { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  double item() const { return value().item(); }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Gradient of a scalar loss with respect to each parameter reached by it.
class Gradients {
 public:
  // Zero-filled when `param` was not reached.
  std::vector<double> get(const Tensor& param) const;
  const std::vector<double>* find(const Tensor& param) const;
  bool contains(const Tensor& param) const { return find(param) != nullptr; }
  std::size_t size() const noexcept { return grads_.size(); }

  std::vector<double>& slot(const Tensor& param);
  void add(const Gradients& other, double scale = 1.0);
  void scale(double factor);

 private:
  std::unordered_map<const Tensor*, std::vector<double>> grads_;
};

// Called during backward with the tape and the node's own id. The rule reads
// the output gradient through Tape::grad and accumulates into inputs through
// Tape::grad_accumulator.
using BackwardRule = std::function<void(Tape&, std::uint32_t)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf for a parameter. Repeated calls with the same tensor return the
  // same node. The tensor is referenced, not copied, and must outlive the
  // tape. Gradients flow only when `p.requires_grad()`.
  Var param(const Tensor& p);
  Var constant(Tensor value);

  // Appends an op result. Throws NumericError if `value` is not finite.
  Var record(std::string_view op, Tensor value, std::vector<std::uint32_t> inputs,
             BackwardRule rule);

  const Tensor& value(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return n.param != nullptr ? *n.param : n.value;
  }
  bool needs_grad(std::uint32_t id) const { return nodes_[id].needs_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Valid only inside a backward rule.
  std::span<const double> grad(std::uint32_t id) const { return grads_[id]; }
  std::span<double> grad_accumulator(std::uint32_t id);

  Gradients backward(Var loss);

 private:
  struct Node {
    Tensor value;
    std::vector<std::uint32_t> inputs;
    BackwardRule rule;
    const Tensor* param = nullptr;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, std::uint32_t> param_nodes_;
  std::vector<std::vector<double>> grads_;
};

// Free-function form of Tape::backward.
Gradients backward(Var loss);

}  // namespace pee::nk
