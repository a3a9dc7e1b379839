#pragma once
// Key-value memories and the retrieval procedures over them.
//
//   retri(q, M):  a = softmax(K q),  o = V^T a
//   chained retrieval:  q_1 = C_1,  q_i = C_i + o_{i-1},  o_i = retri(q_i, M^s)
//   multi-hop:  o^w = retri(q, M^w), o^e = retri(q, M^e), q <- q + o^w + o^e

#include <cstddef>
#include <span>
#include <vector>

#include "pee/numkit/layers.hpp"

namespace pee::memory {

// Keys [n, key_dim] and values [n, value_dim] as tape variables. An empty
// memory has n == 0 and invalid key/value Vars but still knows its dims.
class KeyValueMemory {
 public:
  KeyValueMemory() = default;
  KeyValueMemory(std::size_t key_dim, std::size_t value_dim);
  // Rows of `keys` and `values` are slots; both must be rank 2 with equal row counts.
  KeyValueMemory(nk::Var keys, nk::Var values);

  std::size_t slots() const noexcept { return slots_; }
  bool empty() const noexcept { return slots_ == 0; }
  std::size_t key_dim() const noexcept { return key_dim_; }
  std::size_t value_dim() const noexcept { return value_dim_; }
  nk::Var keys() const { return keys_; }
  nk::Var values() const { return values_; }

 private:
  nk::Var keys_, values_;
  std::size_t slots_ = 0;
  std::size_t key_dim_ = 0;
  std::size_t value_dim_ = 0;
};

// Stacks rank-1 Vars of equal length into a [n, d] matrix.
nk::Var stack_rows(std::span<const nk::Var> rows);

// key_i = key_mlp(rep_i), value_i = value_mlp(rep_i). `reps` is [n, d] or
// invalid for an empty memory.
KeyValueMemory build_memory(nk::Tape& tape, nk::Var reps, const nk::Mlp& key_mlp,
                            const nk::Mlp& value_mlp);
KeyValueMemory build_memory(nk::Tape& tape, std::span<const nk::Var> reps, const nk::Mlp& key_mlp,
                            const nk::Mlp& value_mlp);

struct Retrieval {
  nk::Var output;   // [value_dim]
  nk::Var weights;  // [n]; invalid for an empty memory
};

// An empty memory yields a zero vector.
Retrieval retri(nk::Var query, const KeyValueMemory& mem);

struct PirTrace {
  std::vector<nk::Var> queries;
  std::vector<nk::Var> outputs;
  nk::Var last_weights;  // a^s over the memory slots
};

struct PirResult {
  nk::Var output;  // o_k
  PirTrace trace;
};

// Throws ContractError on an empty history or memory.
PirResult persona_information_retrieval(std::span<const nk::Var> history, const KeyValueMemory& mem);

struct MultihopResult {
  nk::Var word_output;      // o^w of the last hop
  nk::Var external_output;  // o^e of the last hop
  nk::Var query;            // q after the last update
  std::vector<nk::Var> word_weights;      // per hop; invalid entries for an empty memory
  std::vector<nk::Var> external_weights;
};

MultihopResult multihop(nk::Var query, const KeyValueMemory& word_mem,
                        const KeyValueMemory& external_mem, std::size_t hops);

}  // namespace pee::memory
