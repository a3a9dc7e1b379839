#include "pee/numkit/optim.hpp"

#include <cmath>
#include <string>

#include "pee/error.hpp"

namespace pee::nk {

void adam_step(std::span<Tensor* const> params, const Gradients& grads, AdamState& state) {
  if (state.first_moment.empty() && state.step == 0) {
    for (const Tensor* p : params) {
      state.first_moment.emplace_back(p->size(), 0.0);
      state.second_moment.emplace_back(p->size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ContractError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t n = params[i]->size();
    if (state.first_moment[i].size() != n || state.second_moment[i].size() != n) {
      throw ContractError("adam_step: moment shape mismatch for parameter " + std::to_string(i));
    }
    if (const auto* g = grads.find(*params[i]); g != nullptr && g->size() != n) {
      throw ContractError("adam_step: gradient shape mismatch for parameter " +
                          std::to_string(i));
    }
  }

  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const std::vector<double>* g = grads.find(p);
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g != nullptr ? (*g)[j] : 0.0;
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * gj;
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * gj * gj;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

double global_norm(std::span<Tensor* const> params, const Gradients& grads) {
  double sq = 0.0;
  for (const Tensor* p : params) {
    if (const auto* g = grads.find(*p)) {
      for (double v : *g) sq += v * v;
    }
  }
  return std::sqrt(sq);
}

double clip_global_norm(std::span<Tensor* const> params, Gradients& grads, double max_norm) {
  const double norm = global_norm(params, grads);
  if (norm > max_norm) grads.scale(max_norm / norm);
  return norm;
}

}  // namespace pee::nk
