#include "pee/numkit/layers.hpp"

#include <cmath>

#include "pee/error.hpp"

namespace pee::nk {

Affine Affine::create(ParamStore& store, const std::string& name, std::size_t in,
                      std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Affine a;
  a.weight = &store.uniform(name + ".weight", {out, in}, bound, rng);
  a.bias = &store.zeros(name + ".bias", {out});
  return a;
}

Var Affine::operator()(Tape& tape, Var x) const {
  if (x.size() != in_dim()) {
    throw ContractError("affine: input dim " + std::to_string(x.size()) + ", expected " +
                        std::to_string(in_dim()));
  }
  return affine(tape.param(*weight), x, tape.param(*bias));
}

Var Affine::rows(Tape& tape, Var x) const {
  if (x.shape().size() != 2 || x.shape()[1] != in_dim()) {
    throw ContractError("affine rows: input " + shape_string(x.shape()) + ", expected [n, " +
                        std::to_string(in_dim()) + "]");
  }
  return add(matmul(x, tape.param(*weight), false, true), tape.param(*bias));
}

Mlp Mlp::create(ParamStore& store, const std::string& name, std::vector<std::size_t> dims,
                Rng& rng) {
  if (dims.size() < 2) throw ContractError("mlp needs at least input and output dims");
  Mlp m;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    m.layers.push_back(
        Affine::create(store, name + "." + std::to_string(i), dims[i], dims[i + 1], rng));
  }
  return m;
}

Var Mlp::operator()(Tape& tape, Var x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i](tape, x);
    if (i + 1 < layers.size()) x = tanh(x);
  }
  return x;
}

Var Mlp::rows(Tape& tape, Var x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i].rows(tape, x);
    if (i + 1 < layers.size()) x = tanh(x);
  }
  return x;
}

GruParams GruParams::create(ParamStore& store, const std::string& name, std::size_t input,
                            std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  GruParams p;
  p.w_update = &store.uniform(name + ".w_update", {hidden, input}, bound, rng);
  p.w_reset = &store.uniform(name + ".w_reset", {hidden, input}, bound, rng);
  p.w_candidate = &store.uniform(name + ".w_candidate", {hidden, input}, bound, rng);
  p.u_update = &store.uniform(name + ".u_update", {hidden, hidden}, bound, rng);
  p.u_reset = &store.uniform(name + ".u_reset", {hidden, hidden}, bound, rng);
  p.u_candidate = &store.uniform(name + ".u_candidate", {hidden, hidden}, bound, rng);
  p.b_update = &store.zeros(name + ".b_update", {hidden});
  p.b_reset = &store.zeros(name + ".b_reset", {hidden});
  p.b_candidate = &store.zeros(name + ".b_candidate", {hidden});
  return p;
}

void GruParams::validate() const {
  const std::size_t d = input_dim();
  const std::size_t h = hidden_dim();
  for (const Tensor* w : {w_update, w_reset, w_candidate}) {
    if (w->shape() != Shape{h, d}) throw ContractError("gru: inconsistent input weight shape");
  }
  for (const Tensor* u : {u_update, u_reset, u_candidate}) {
    if (u->shape() != Shape{h, h}) throw ContractError("gru: inconsistent hidden weight shape");
  }
  for (const Tensor* b : {b_update, b_reset, b_candidate}) {
    if (b->shape() != Shape{h}) throw ContractError("gru: inconsistent bias shape");
  }
}

Var gru_cell(Tape& tape, Var x, Var h, const GruParams& p) {
  if (x.size() != p.input_dim() || h.size() != p.hidden_dim()) {
    throw ContractError("gru_cell: got x dim " + std::to_string(x.size()) + ", h dim " +
                        std::to_string(h.size()) + "; expected " +
                        std::to_string(p.input_dim()) + ", " + std::to_string(p.hidden_dim()));
  }
  auto gate = [&](const Tensor* w, const Tensor* u, const Tensor* b, Var hin) {
    return add(add(matmul(tape.param(*w), x), matmul(tape.param(*u), hin)), tape.param(*b));
  };
  Var z = sigmoid(gate(p.w_update, p.u_update, p.b_update, h));
  Var r = sigmoid(gate(p.w_reset, p.u_reset, p.b_reset, h));
  Var n = tanh(gate(p.w_candidate, p.u_candidate, p.b_candidate, mul(r, h)));
  // (1 - z) ⊙ n + z ⊙ h = n + z ⊙ (h - n)
  return add(n, mul(z, sub(h, n)));
}

BiGruOutput bigru_encode(Tape& tape, const std::vector<Var>& seq, const GruParams& fwd,
                         const GruParams& bwd) {
  if (seq.empty()) throw ContractError("bigru_encode: empty sequence");
  const std::size_t n = seq.size();
  std::vector<Var> f(n), b(n);
  Var h = tape.constant(Tensor({fwd.hidden_dim()}, 0.0));
  for (std::size_t i = 0; i < n; ++i) h = f[i] = gru_cell(tape, seq[i], h, fwd);
  h = tape.constant(Tensor({bwd.hidden_dim()}, 0.0));
  for (std::size_t i = n; i-- > 0;) h = b[i] = gru_cell(tape, seq[i], h, bwd);

  BiGruOutput out;
  out.states.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.states.push_back(concat({f[i], b[i]}));
  out.final = concat({f[n - 1], b[0]});
  return out;
}

}  // namespace pee::nk
