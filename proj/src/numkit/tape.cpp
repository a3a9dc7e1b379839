#include "pee/numkit/tape.hpp"

#include <string>

#include "pee/error.hpp"

namespace pee::nk {

Tape& Var::tape() const {
  if (tape_ == nullptr) throw ContractError("use of an unbound Var");
  return *tape_;
}

const Tensor& Var::value() const { return tape().value(id_); }

std::vector<double> Gradients::get(const Tensor& param) const {
  if (const auto* g = find(param)) return *g;
  return std::vector<double>(param.size(), 0.0);
}

const std::vector<double>* Gradients::find(const Tensor& param) const {
  auto it = grads_.find(&param);
  return it == grads_.end() ? nullptr : &it->second;
}

std::vector<double>& Gradients::slot(const Tensor& param) {
  auto [it, inserted] = grads_.try_emplace(&param);
  if (inserted) it->second.assign(param.size(), 0.0);
  return it->second;
}

void Gradients::add(const Gradients& other, double scale) {
  for (const auto& [param, g] : other.grads_) {
    auto& dst = slot(*param);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += scale * g[i];
  }
}

void Gradients::scale(double factor) {
  for (auto& [param, g] : grads_) {
    for (double& v : g) v *= factor;
  }
}

Var Tape::param(const Tensor& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  Node node;
  node.param = &p;
  node.needs_grad = p.requires_grad();
  nodes_.push_back(std::move(node));
  param_nodes_.emplace(&p, id);
  return Var(this, id);
}

Var Tape::constant(Tensor value) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, id);
}

Var Tape::record(std::string_view op, Tensor value, std::vector<std::uint32_t> inputs,
                 BackwardRule rule) {
  if (!value.all_finite()) {
    throw NumericError("non-finite output from " + std::string(op) + " " +
                       shape_string(value.shape()));
  }
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  bool needs = false;
  for (std::uint32_t in : inputs) {
    if (in >= id) throw ContractError("tape input recorded out of order");
    needs = needs || nodes_[in].needs_grad;
  }
  Node node;
  node.value = std::move(value);
  node.inputs = std::move(inputs);
  node.needs_grad = needs;
  if (needs) node.rule = std::move(rule);
  nodes_.push_back(std::move(node));
  return Var(this, id);
}

std::span<double> Tape::grad_accumulator(std::uint32_t id) {
  auto& g = grads_[id];
  if (g.empty()) g.assign(value(id).size(), 0.0);
  return g;
}

Gradients Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss recorded on a different tape");
  const Tensor& out = value(loss.id());
  if (out.size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        shape_string(out.shape()));
  }
  grads_.assign(nodes_.size(), {});
  grad_accumulator(loss.id())[0] = 1.0;

  Gradients result;
  for (std::uint32_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.needs_grad || grads_[id].empty()) continue;
    if (node.param != nullptr) {
      auto& dst = result.slot(*node.param);
      const auto& g = grads_[id];
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    } else if (node.rule) {
      node.rule(*this, id);
    }
  }
  grads_.clear();
  return result;
}

Gradients backward(Var loss) { return loss.tape().backward(loss); }

}  // namespace pee::nk
