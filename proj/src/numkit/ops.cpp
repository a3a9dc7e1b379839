#include "pee/numkit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pee/error.hpp"
#include "pee/kernels.hpp"

namespace pee::nk {
namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  Tape& t = a.tape();
  if (&b.tape() != &t) throw ContractError(std::string(op) + ": operands on different tapes");
  return t;
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ContractError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                      shape_string(b));
}

// Row-major transpose of a rows x cols matrix.
std::vector<double> transposed(std::span<const double> m, std::size_t rows, std::size_t cols) {
  std::vector<double> out(m.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = m[r * cols + c];
  }
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

void softmax_rows(std::span<const double> in, std::span<double> out, std::size_t rows,
                  std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * cols;
    double* y = out.data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      y[c] = std::exp(x[c] - mx);
      z += y[c];
    }
    for (std::size_t c = 0; c < cols; ++c) y[c] /= z;
  }
}

template <typename Fwd, typename Deriv>
Var unary(Var a, const char* op, Fwd fwd, Deriv deriv) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  const std::uint32_t ia = a.id();
  return t.record(op, std::move(out), {ia}, [ia, deriv](Tape& tp, std::uint32_t self) {
    if (!tp.needs_grad(ia)) return;
    const auto g = tp.grad(self);
    const Tensor& xv = tp.value(ia);
    const Tensor& yv = tp.value(self);
    auto da = tp.grad_accumulator(ia);
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * deriv(xv[i], yv[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b, bool trans_a, bool trans_b) {
  Tape& t = same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2) shape_error("matmul", av.shape(), bv.shape());
  const std::size_t m = trans_a ? av.dim(1) : av.dim(0);
  const std::size_t k = trans_a ? av.dim(0) : av.dim(1);
  const std::uint32_t ia = a.id();
  const std::uint32_t ib = b.id();

  if (bv.rank() == 1) {
    if (bv.size() != k) shape_error("matmul", av.shape(), bv.shape());
    Tensor out({m});
    if (trans_a) {
      kernels::gemv_t(av.data().data(), bv.data().data(), out.data().data(), k, m);
    } else {
      kernels::gemv(av.data().data(), bv.data().data(), out.data().data(), m, k);
    }
    return t.record("matmul", std::move(out), {ia, ib},
                    [ia, ib, m, k, trans_a](Tape& tp, std::uint32_t self) {
                      const auto g = tp.grad(self);
                      const Tensor& A = tp.value(ia);
                      const Tensor& x = tp.value(ib);
                      if (tp.needs_grad(ia)) {
                        auto da = tp.grad_accumulator(ia);
                        if (trans_a) {
                          kernels::ger(x.data().data(), g.data(), da.data(), k, m);
                        } else {
                          kernels::ger(g.data(), x.data().data(), da.data(), m, k);
                        }
                      }
                      if (tp.needs_grad(ib)) {
                        auto dx = tp.grad_accumulator(ib);
                        if (trans_a) {
                          kernels::gemv(A.data().data(), g.data(), dx.data(), k, m, true);
                        } else {
                          kernels::gemv_t(A.data().data(), g.data(), dx.data(), m, k);
                        }
                      }
                    });
  }

  if (bv.rank() != 2) shape_error("matmul", av.shape(), bv.shape());
  const std::size_t kb = trans_b ? bv.dim(1) : bv.dim(0);
  const std::size_t n = trans_b ? bv.dim(0) : bv.dim(1);
  if (kb != k) shape_error("matmul", av.shape(), bv.shape());

  // Work on materialized op(A) [m,k] and op(B) [k,n].
  const std::vector<double> A = trans_a ? transposed(av.data(), k, m) : av.values();
  const std::vector<double> B = trans_b ? transposed(bv.data(), n, k) : bv.values();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    kernels::gemv_t(B.data(), A.data() + i * k, out.data().data() + i * n, k, n);
  }
  return t.record(
      "matmul", std::move(out), {ia, ib},
      [ia, ib, m, k, n, trans_a, trans_b](Tape& tp, std::uint32_t self) {
        const auto g = tp.grad(self);
        const Tensor& av2 = tp.value(ia);
        const Tensor& bv2 = tp.value(ib);
        if (tp.needs_grad(ia)) {
          const std::vector<double> Bm = trans_b ? transposed(bv2.data(), n, k) : bv2.values();
          std::vector<double> dA(m * k, 0.0);
          for (std::size_t i = 0; i < m; ++i) {
            kernels::gemv(Bm.data(), g.data() + i * n, dA.data() + i * k, k, n);
          }
          if (trans_a) dA = transposed(dA, m, k);
          auto da = tp.grad_accumulator(ia);
          for (std::size_t i = 0; i < dA.size(); ++i) da[i] += dA[i];
        }
        if (tp.needs_grad(ib)) {
          const std::vector<double> Am = trans_a ? transposed(av2.data(), k, m) : av2.values();
          std::vector<double> dB(k * n, 0.0);
          for (std::size_t i = 0; i < m; ++i) {
            kernels::ger(Am.data() + i * k, g.data() + i * n, dB.data(), k, n);
          }
          if (trans_b) dB = transposed(dB, k, n);
          auto db = tp.grad_accumulator(ib);
          for (std::size_t i = 0; i < dB.size(); ++i) db[i] += dB[i];
        }
      });
}

namespace {

enum class Broadcast { kNone, kScalarLeft, kScalarRight, kRowRight };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, bool allow_row, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (b.size() == 1) return Broadcast::kScalarRight;
  if (a.size() == 1) return Broadcast::kScalarLeft;
  if (allow_row && a.rank() == 2 && b.rank() == 1 && a.dim(1) == b.size()) {
    return Broadcast::kRowRight;
  }
  shape_error(op, a.shape(), b.shape());
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast kind = broadcast_kind(av, bv, true, "add");
  Tensor out(kind == Broadcast::kScalarLeft ? bv.shape() : av.shape());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    switch (kind) {
      case Broadcast::kNone: out[i] = av[i] + bv[i]; break;
      case Broadcast::kScalarLeft: out[i] = av[0] + bv[i]; break;
      case Broadcast::kScalarRight: out[i] = av[i] + bv[0]; break;
      case Broadcast::kRowRight: out[i] = av[i] + bv[i % bv.size()]; break;
    }
  }
  const std::uint32_t ia = a.id();
  const std::uint32_t ib = b.id();
  return t.record("add", std::move(out), {ia, ib}, [ia, ib, kind](Tape& tp, std::uint32_t self) {
    const auto g = tp.grad(self);
    if (tp.needs_grad(ia)) {
      auto da = tp.grad_accumulator(ia);
      for (std::size_t i = 0; i < g.size(); ++i) da[kind == Broadcast::kScalarLeft ? 0 : i] += g[i];
    }
    if (tp.needs_grad(ib)) {
      auto db = tp.grad_accumulator(ib);
      for (std::size_t i = 0; i < g.size(); ++i) {
        switch (kind) {
          case Broadcast::kNone:
          case Broadcast::kScalarLeft: db[i] += g[i]; break;
          case Broadcast::kScalarRight: db[0] += g[i]; break;
          case Broadcast::kRowRight: db[i % db.size()] += g[i]; break;
        }
      }
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b, "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast kind = broadcast_kind(av, bv, false, "mul");
  Tensor out(kind == Broadcast::kScalarLeft ? bv.shape() : av.shape());
  const std::size_t n = out.size();
  auto ai = [kind](std::size_t i) { return kind == Broadcast::kScalarLeft ? 0 : i; };
  auto bi = [kind](std::size_t i) { return kind == Broadcast::kScalarRight ? 0 : i; };
  for (std::size_t i = 0; i < n; ++i) out[i] = av[ai(i)] * bv[bi(i)];
  const std::uint32_t ia = a.id();
  const std::uint32_t ib = b.id();
  return t.record("mul", std::move(out), {ia, ib}, [ia, ib, ai, bi](Tape& tp, std::uint32_t self) {
    const auto g = tp.grad(self);
    const Tensor& av2 = tp.value(ia);
    const Tensor& bv2 = tp.value(ib);
    if (tp.needs_grad(ia)) {
      auto da = tp.grad_accumulator(ia);
      for (std::size_t i = 0; i < g.size(); ++i) da[ai(i)] += g[i] * bv2[bi(i)];
    }
    if (tp.needs_grad(ib)) {
      auto db = tp.grad_accumulator(ib);
      for (std::size_t i = 0; i < g.size(); ++i) db[bi(i)] += g[i] * av2[ai(i)];
    }
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  Tape& t = parts.front().tape();
  const Shape& first = parts.front().shape();
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> offsets;
  std::vector<double> data;
  std::size_t rows = 0;
  for (const Var& p : parts) {
    if (&p.tape() != &t) throw ContractError("concat: operands on different tapes");
    const Tensor& v = p.value();
    if (v.rank() != first.size() || v.rank() > 2 ||
        (v.rank() == 2 && v.dim(1) != first[1])) {
      shape_error("concat", first, v.shape());
    }
    ids.push_back(p.id());
    offsets.push_back(data.size());
    data.insert(data.end(), v.data().begin(), v.data().end());
    rows += v.dim(0);
  }
  Shape shape = first.size() == 1 ? Shape{rows} : Shape{rows, first[1]};
  auto in_ids = ids;
  return t.record("concat", Tensor(std::move(shape), std::move(data)), std::move(in_ids),
                  [ids, offsets](Tape& tp, std::uint32_t self) {
                    const auto g = tp.grad(self);
                    for (std::size_t p = 0; p < ids.size(); ++p) {
                      if (!tp.needs_grad(ids[p])) continue;
                      auto d = tp.grad_accumulator(ids[p]);
                      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[offsets[p] + i];
                    }
                  });
}

Var slice(Var a, std::size_t begin, std::size_t len) {
  Tape& t = a.tape();
  const Tensor& av = a.value();
  if (av.rank() > 2 || len == 0 || begin + len > av.dim(0)) {
    throw ContractError("slice [" + std::to_string(begin) + ", " + std::to_string(begin + len) +
                        ") out of range for " + shape_string(av.shape()));
  }
  const std::size_t width = av.rank() == 2 ? av.dim(1) : 1;
  const std::size_t off = begin * width;
  std::vector<double> data(av.data().begin() + off, av.data().begin() + off + len * width);
  Shape shape = av.rank() == 2 ? Shape{len, width} : Shape{len};
  const std::uint32_t ia = a.id();
  return t.record("slice", Tensor(std::move(shape), std::move(data)), {ia},
                  [ia, off](Tape& tp, std::uint32_t self) {
                    if (!tp.needs_grad(ia)) return;
                    const auto g = tp.grad(self);
                    auto da = tp.grad_accumulator(ia);
                    for (std::size_t i = 0; i < g.size(); ++i) da[off + i] += g[i];
                  });
}

Var reshape(Var a, Shape shape) {
  Tape& t = a.tape();
  Tensor out(std::move(shape), a.value().values());
  const std::uint32_t ia = a.id();
  return t.record("reshape", std::move(out), {ia}, [ia](Tape& tp, std::uint32_t self) {
    if (!tp.needs_grad(ia)) return;
    const auto g = tp.grad(self);
    auto da = tp.grad_accumulator(ia);
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
  });
}

Var sum(Var a) {
  Tape& t = a.tape();
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::uint32_t ia = a.id();
  return t.record("sum", Tensor::scalar(s), {ia}, [ia](Tape& tp, std::uint32_t self) {
    if (!tp.needs_grad(ia)) return;
    const double g = tp.grad(self)[0];
    for (double& d : tp.grad_accumulator(ia)) d += g;
  });
}

Var mean(Var a) {
  Tape& t = a.tape();
  const double n = static_cast<double>(a.size());
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::uint32_t ia = a.id();
  return t.record("mean", Tensor::scalar(s / n), {ia}, [ia, n](Tape& tp, std::uint32_t self) {
    if (!tp.needs_grad(ia)) return;
    const double g = tp.grad(self)[0] / n;
    for (double& d : tp.grad_accumulator(ia)) d += g;
  });
}

Var tanh(Var a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a, "sigmoid", stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var a) {
  return unary(
      a, "softplus", stable_softplus, [](double x, double) { return stable_sigmoid(x); });
}

Var exp(Var a) {
  return unary(
      a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a, double floor) {
  return unary(
      a, "log", [floor](double x) { return std::log(std::max(x, floor)); },
      [floor](double x, double) { return x > floor ? 1.0 / x : 0.0; });
}

Var softmax(Var a) {
  Tape& t = a.tape();
  const Tensor& av = a.value();
  if (av.rank() > 2) throw ContractError("softmax: rank > 2 " + shape_string(av.shape()));
  const std::size_t cols = av.shape().back();
  const std::size_t rows = av.size() / cols;
  Tensor out(av.shape());
  softmax_rows(av.data(), out.data(), rows, cols);
  const std::uint32_t ia = a.id();
  return t.record("softmax", std::move(out), {ia},
                  [ia, rows, cols](Tape& tp, std::uint32_t self) {
                    if (!tp.needs_grad(ia)) return;
                    const auto g = tp.grad(self);
                    const Tensor& y = tp.value(self);
                    auto da = tp.grad_accumulator(ia);
                    for (std::size_t r = 0; r < rows; ++r) {
                      const std::size_t o = r * cols;
                      const double gy = kernels::dot(g.data() + o, y.data().data() + o, cols);
                      for (std::size_t c = 0; c < cols; ++c) da[o + c] += y[o + c] * (g[o + c] - gy);
                    }
                  });
}

Var embedding(Var table, std::size_t index) {
  Tape& t = table.tape();
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw ContractError("embedding: table must be rank 2");
  if (index >= tv.dim(0)) {
    throw ContractError("embedding: index " + std::to_string(index) + " out of range for " +
                        std::to_string(tv.dim(0)) + " rows");
  }
  const std::size_t width = tv.dim(1);
  const std::size_t off = index * width;
  std::vector<double> row(tv.data().begin() + off, tv.data().begin() + off + width);
  const std::uint32_t it = table.id();
  return t.record("embedding", Tensor({width}, std::move(row)), {it},
                  [it, off](Tape& tp, std::uint32_t self) {
                    if (!tp.needs_grad(it)) return;
                    const auto g = tp.grad(self);
                    auto dt = tp.grad_accumulator(it);
                    for (std::size_t i = 0; i < g.size(); ++i) dt[off + i] += g[i];
                  });
}

Var cross_entropy(Var logits, std::size_t target) {
  Tape& t = logits.tape();
  const Tensor& x = logits.value();
  if (x.rank() != 1 || target >= x.size()) {
    throw ContractError("cross_entropy: target " + std::to_string(target) +
                        " invalid for logits " + shape_string(x.shape()));
  }
  std::vector<double> p(x.size());
  softmax_rows(x.data(), p, 1, x.size());
  const double mx = *std::max_element(x.data().begin(), x.data().end());
  double z = 0.0;
  for (double v : x.data()) z += std::exp(v - mx);
  const double loss = mx + std::log(z) - x[target];
  const std::uint32_t il = logits.id();
  return t.record("cross_entropy", Tensor::scalar(loss), {il},
                  [il, target, p = std::move(p)](Tape& tp, std::uint32_t self) {
                    if (!tp.needs_grad(il)) return;
                    const double g = tp.grad(self)[0];
                    auto dl = tp.grad_accumulator(il);
                    for (std::size_t i = 0; i < p.size(); ++i) {
                      dl[i] += g * (p[i] - (i == target ? 1.0 : 0.0));
                    }
                  });
}

Var constant_like(Var like, double fill) { return like.tape().constant(Tensor(like.shape(), fill)); }

Var scale(Var a, double factor) { return mul(a, a.tape().constant(Tensor::scalar(factor))); }

Var add_scalar(Var a, double c) { return add(a, a.tape().constant(Tensor::scalar(c))); }

Var neg(Var a) { return scale(a, -1.0); }

Var sub(Var a, Var b) { return add(a, neg(b)); }

Var dot(Var a, Var b) { return sum(mul(a, b)); }

Var affine(Var w, Var x, Var b) { return add(matmul(w, x), b); }

}  // namespace pee::nk
