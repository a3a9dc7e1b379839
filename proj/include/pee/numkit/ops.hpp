#pragma once
// Differentiable primitives. Every op records itself on the tape of its first
// Var argument; all Var arguments must share that tape.
//
// Primitive set: matmul, add, mul, concat, slice, reshape, sum, mean, tanh,
// sigmoid, softplus, softmax, log, exp, embedding, cross_entropy. The helpers
// at the bottom are compositions of these.

#include <cstddef>
#include <span>
#include <vector>

#include "pee/numkit/tape.hpp"

namespace pee::nk {

// op(a) * op(b). `a` must be rank 2. `b` is rank 1 (matrix-vector, result
// rank 1) or rank 2 (result rank 2). `trans_b` is ignored for rank-1 `b`.
Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);

// Elementwise with broadcasting of a size-1 operand. `add` also broadcasts a
// rank-1 right operand across the rows of a rank-2 left operand.
Var add(Var a, Var b);
Var mul(Var a, Var b);

// Rank-1 inputs are joined end to end; rank-2 inputs with equal column counts
// are stacked by rows.
Var concat(std::span<const Var> parts);
inline Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

// Elements [begin, begin+len) of a rank-1 tensor, rows of a rank-2 tensor.
Var slice(Var a, std::size_t begin, std::size_t len);
Var reshape(Var a, Shape shape);

Var sum(Var a);
Var mean(Var a);

Var tanh(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var exp(Var a);
// log(max(a, floor)); the gradient is zero where the floor is active.
Var log(Var a, double floor = 0.0);

// Over a rank-1 tensor, or along the last axis of a rank-2 tensor.
Var softmax(Var a);

// Row `index` of a rank-2 table.
Var embedding(Var table, std::size_t index);

// -log softmax(logits)[target] for rank-1 logits.
Var cross_entropy(Var logits, std::size_t target);

// ---- compositions ----

Var constant_like(Var like, double fill);
Var scale(Var a, double factor);
Var add_scalar(Var a, double c);
Var sub(Var a, Var b);
Var neg(Var a);
Var dot(Var a, Var b);
// W x + b
Var affine(Var w, Var x, Var b);

}  // namespace pee::nk
