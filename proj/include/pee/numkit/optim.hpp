#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pee/numkit/tape.hpp"

namespace pee::nk {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moments are kept per parameter in the order the parameters are passed to
// adam_step; that order must not change between steps.
struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  explicit AdamState(AdamConfig c) : config(c) {}
};

// Bias-corrected Adam. Parameters with no entry in `grads` get a zero
// gradient (their moments still decay).
void adam_step(std::span<Tensor* const> params, const Gradients& grads, AdamState& state);

// sqrt of the sum of squared gradient entries, accumulated in `params` order.
double global_norm(std::span<Tensor* const> params, const Gradients& grads);

// Rescales `grads` so their global norm is at most `max_norm`. Returns the norm
// before clipping.
double clip_global_norm(std::span<Tensor* const> params, Gradients& grads, double max_norm);

}  // namespace pee::nk
