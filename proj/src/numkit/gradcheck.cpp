#include "pee/numkit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pee/error.hpp"

namespace pee::nk {
namespace {

double evaluate(const ScalarFn& fn, std::size_t param, std::size_t entry, double delta) {
  Tape tape;
  double v = 0.0;
  try {
    v = fn(tape).item();
  } catch (const NumericError& e) {
    throw NumericError("grad_check: parameter " + std::to_string(param) + " entry " +
                       std::to_string(entry) + " perturbed by " + std::to_string(delta) + ": " +
                       e.what());
  }
  if (!std::isfinite(v)) {
    throw NumericError("grad_check: non-finite loss with parameter " + std::to_string(param) +
                       " entry " + std::to_string(entry) + " perturbed by " +
                       std::to_string(delta));
  }
  return v;
}

}  // namespace

GradCheckReport grad_check_report(const ScalarFn& fn, std::span<Tensor* const> params,
                                  double eps, double floor) {
  if (!(eps > 0.0)) throw ContractError("grad_check: eps must be positive");
  if (!(floor > 0.0)) throw ContractError("grad_check: floor must be positive");
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p]->requires_grad()) {
      throw ContractError("grad_check: parameter " + std::to_string(p) + " does not require grad");
    }
  }
  Gradients grads;
  {
    Tape tape;
    Var loss = fn(tape);
    if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite base loss");
    grads = tape.backward(loss);
  }

  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p];
    const std::vector<double> analytic = grads.get(t);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double orig = t[i];
      t[i] = orig + eps;
      const double up = evaluate(fn, p, i, eps);
      t[i] = orig - eps;
      const double down = evaluate(fn, p, i, -eps);
      t[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double err =
          std::abs(analytic[i] - numeric) / std::max(floor, std::abs(analytic[i]) + std::abs(numeric));
      ++report.entries_checked;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.param = p;
        report.entry = i;
        report.analytic = analytic[i];
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace pee::nk
