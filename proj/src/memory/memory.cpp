#include "pee/memory.hpp"

#include <string>

#include "pee/error.hpp"
#include "pee/numkit/ops.hpp"

namespace pee::memory {

using nk::Var;

KeyValueMemory::KeyValueMemory(std::size_t key_dim, std::size_t value_dim)
    : key_dim_(key_dim), value_dim_(value_dim) {}

KeyValueMemory::KeyValueMemory(Var keys, Var values) : keys_(keys), values_(values) {
  if (keys.shape().size() != 2 || values.shape().size() != 2 ||
      keys.shape()[0] != values.shape()[0]) {
    throw ContractError("memory: keys " + nk::shape_string(keys.shape()) + " and values " +
                        nk::shape_string(values.shape()) + " do not pair up");
  }
  slots_ = keys.shape()[0];
  key_dim_ = keys.shape()[1];
  value_dim_ = values.shape()[1];
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ContractError("stack_rows: no rows");
  const std::size_t d = rows.front().size();
  for (const Var& r : rows) {
    if (r.shape().size() != 1 || r.size() != d) throw ContractError("stack_rows: ragged rows");
  }
  return nk::reshape(nk::concat(rows), {rows.size(), d});
}

KeyValueMemory build_memory(nk::Tape& tape, Var reps, const nk::Mlp& key_mlp,
                            const nk::Mlp& value_mlp) {
  if (!reps.valid()) return KeyValueMemory(key_mlp.out_dim(), value_mlp.out_dim());
  return KeyValueMemory(key_mlp.rows(tape, reps), value_mlp.rows(tape, reps));
}

KeyValueMemory build_memory(nk::Tape& tape, std::span<const Var> reps, const nk::Mlp& key_mlp,
                            const nk::Mlp& value_mlp) {
  return build_memory(tape, reps.empty() ? Var{} : stack_rows(reps), key_mlp, value_mlp);
}

Retrieval retri(Var query, const KeyValueMemory& mem) {
  if (query.shape().size() != 1 || query.size() != mem.key_dim()) {
    throw ContractError("retri: query " + nk::shape_string(query.shape()) + " against key dim " +
                        std::to_string(mem.key_dim()));
  }
  if (mem.empty()) {
    return {query.tape().constant(nk::Tensor({mem.value_dim()}, 0.0)), Var{}};
  }
  Var weights = nk::softmax(nk::matmul(mem.keys(), query));
  return {nk::matmul(mem.values(), weights, true), weights};
}

PirResult persona_information_retrieval(std::span<const Var> history, const KeyValueMemory& mem) {
  if (history.empty()) throw ContractError("persona retrieval: empty history");
  if (mem.empty()) throw ContractError("persona retrieval: empty sentence memory");
  PirResult r;
  Var prev;
  for (std::size_t i = 0; i < history.size(); ++i) {
    Var q = i == 0 ? history[i] : nk::add(history[i], prev);
    Retrieval step = retri(q, mem);
    r.trace.queries.push_back(q);
    r.trace.outputs.push_back(step.output);
    r.trace.last_weights = step.weights;
    prev = step.output;
  }
  r.output = prev;
  return r;
}

MultihopResult multihop(Var query, const KeyValueMemory& word_mem,
                        const KeyValueMemory& external_mem, std::size_t hops) {
  if (hops == 0) throw ContractError("multihop: at least one hop is required");
  if (word_mem.value_dim() != query.size() || external_mem.value_dim() != query.size()) {
    throw ContractError("multihop: memory value dims must equal the query dim");
  }
  MultihopResult r;
  for (std::size_t h = 0; h < hops; ++h) {
    Retrieval w = retri(query, word_mem);
    Retrieval e = retri(query, external_mem);
    query = nk::add(nk::add(query, w.output), e.output);
    r.word_output = w.output;
    r.external_output = e.output;
    r.word_weights.push_back(w.weights);
    r.external_weights.push_back(e.weights);
  }
  r.query = query;
  return r;
}

}  // namespace pee::memory
