#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "pee/numkit/tape.hpp"

namespace pee::nk {

// Builds a scalar loss on the given tape. Must be deterministic.
using ScalarFn = std::function<Var(Tape&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  // Location of the worst entry.
  std::size_t param = 0;
  std::size_t entry = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

// Compares reverse-mode gradients against central differences for every entry
// of every tensor in `params`. Relative error per entry is
// |a - n| / max(floor, |a| + |n|). Raise `floor` when the loss is large enough
// that difference roundoff (about 1e-16 * |loss| / eps) swamps tiny gradients.
// Tensors are perturbed in place and restored.
// Throws NumericError naming the perturbed entry if `fn` goes non-finite.
GradCheckReport grad_check_report(const ScalarFn& fn, std::span<Tensor* const> params,
                                  double eps, double floor = 1e-8);

inline double grad_check(const ScalarFn& fn, std::span<Tensor* const> params, double eps) {
  return grad_check_report(fn, params, eps).max_rel_error;
}

}  // namespace pee::nk
