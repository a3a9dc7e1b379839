#pragma once
// Parameterized building blocks: affine maps, small MLPs and GRU cells.
// Layers hold non-owning pointers into a ParamStore.

#include <cstddef>
#include <string>
#include <vector>

#include "pee/numkit/ops.hpp"
#include "pee/numkit/params.hpp"

namespace pee::nk {

struct Affine {
  Tensor* weight = nullptr;  // [out, in]
  Tensor* bias = nullptr;    // [out]

  static Affine create(ParamStore& store, const std::string& name, std::size_t in,
                       std::size_t out, Rng& rng);
  std::size_t in_dim() const { return weight->dim(1); }
  std::size_t out_dim() const { return weight->dim(0); }
  Var operator()(Tape& tape, Var x) const;
  // Applies the layer to every row of a rank-2 input [n, in].
  Var rows(Tape& tape, Var x) const;
};

// Affine layers with tanh between them (none after the last one). A single
// layer is a plain affine map.
struct Mlp {
  std::vector<Affine> layers;

  static Mlp create(ParamStore& store, const std::string& name, std::vector<std::size_t> dims,
                    Rng& rng);
  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }
  Var operator()(Tape& tape, Var x) const;
  Var rows(Tape& tape, Var x) const;
};

struct GruParams {
  // Input-to-hidden [H, D] and hidden-to-hidden [H, H] for the update gate,
  // reset gate and candidate, plus their biases [H].
  Tensor* w_update = nullptr;
  Tensor* w_reset = nullptr;
  Tensor* w_candidate = nullptr;
  Tensor* u_update = nullptr;
  Tensor* u_reset = nullptr;
  Tensor* u_candidate = nullptr;
  Tensor* b_update = nullptr;
  Tensor* b_reset = nullptr;
  Tensor* b_candidate = nullptr;

  static GruParams create(ParamStore& store, const std::string& name, std::size_t input,
                          std::size_t hidden, Rng& rng);
  std::size_t input_dim() const { return w_update->dim(1); }
  std::size_t hidden_dim() const { return w_update->dim(0); }
  // Throws ContractError if the nine tensors disagree on D or H.
  void validate() const;
};

// z = σ(W_z x + U_z h + b_z), r = σ(W_r x + U_r h + b_r),
// n = tanh(W_n x + U_n (r ⊙ h) + b_n), h' = (1 - z) ⊙ n + z ⊙ h.
Var gru_cell(Tape& tape, Var x, Var h, const GruParams& p);

struct BiGruOutput {
  std::vector<Var> states;  // per step, [forward_t ; backward_t], dim 2H
  Var final;                // [forward_last ; backward_first], dim 2H
};

// Throws ContractError on an empty sequence.
BiGruOutput bigru_encode(Tape& tape, const std::vector<Var>& seq, const GruParams& fwd,
                         const GruParams& bwd);

}  // namespace pee::nk
