#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pee/numkit/tensor.hpp"

namespace pee::nk {

using Rng = std::mt19937_64;

// Named, ordered collection of trainable tensors. Tensor addresses are stable
// for the lifetime of the store, so models can keep raw pointers into it.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(ParamStore&&) noexcept = default;
  ParamStore& operator=(ParamStore&&) noexcept = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;

  // Throws ContractError on a duplicate name.
  Tensor& add(const std::string& name, Tensor value);
  Tensor& zeros(const std::string& name, Shape shape);
  Tensor& uniform(const std::string& name, Shape shape, double bound, Rng& rng);

  Tensor* find(const std::string& name);
  const Tensor* find(const std::string& name) const;
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::size_t size() const noexcept { return entries_.size(); }
  const std::string& name(std::size_t i) const { return entries_[i].name; }
  Tensor& tensor(std::size_t i) { return *entries_[i].tensor; }
  const Tensor& tensor(std::size_t i) const { return *entries_[i].tensor; }
  std::size_t scalar_count() const;

  std::vector<Tensor*> tensors();

 private:
  struct Entry {
    std::string name;
    std::unique_ptr<Tensor> tensor;
  };
  std::vector<Entry> entries_;
};

}  // namespace pee::nk
