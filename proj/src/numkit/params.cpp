#include "pee/numkit/params.hpp"

#include "pee/error.hpp"

namespace pee::nk {

Tensor& ParamStore::add(const std::string& name, Tensor value) {
  if (find(name) != nullptr) throw ContractError("duplicate parameter name: " + name);
  value.set_requires_grad(true);
  entries_.push_back({name, std::make_unique<Tensor>(std::move(value))});
  return *entries_.back().tensor;
}

Tensor& ParamStore::zeros(const std::string& name, Shape shape) {
  return add(name, Tensor(std::move(shape), 0.0));
}

Tensor& ParamStore::uniform(const std::string& name, Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.data()) v = dist(rng);
  return add(name, std::move(t));
}

Tensor* ParamStore::find(const std::string& name) {
  for (auto& e : entries_) {
    if (e.name == name) return e.tensor.get();
  }
  return nullptr;
}

const Tensor* ParamStore::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor.get();
  }
  return nullptr;
}

Tensor& ParamStore::at(const std::string& name) {
  if (Tensor* t = find(name)) return *t;
  throw ContractError("unknown parameter: " + name);
}

const Tensor& ParamStore::at(const std::string& name) const {
  if (const Tensor* t = find(name)) return *t;
  throw ContractError("unknown parameter: " + name);
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor->size();
  return n;
}

std::vector<Tensor*> ParamStore::tensors() {
  std::vector<Tensor*> out;
  out.reserve(entries_.size());
  for (auto& e : entries_) out.push_back(e.tensor.get());
  return out;
}

}  // namespace pee::nk
