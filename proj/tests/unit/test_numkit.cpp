#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "doctest.h"
#include "pee/error.hpp"
#include "pee/numkit/gradcheck.hpp"
#include "pee/numkit/layers.hpp"
#include "pee/numkit/ops.hpp"
#include "pee/numkit/optim.hpp"

using namespace pee::nk;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& v : t.data()) v = d(rng);
  t.set_requires_grad(true);
  return t;
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Straight-line GRU step written against raw tensor storage.
std::vector<double> gru_oracle(const std::vector<double>& x, const std::vector<double>& h,
                               const GruParams& p) {
  const std::size_t H = p.hidden_dim();
  const std::size_t D = p.input_dim();
  std::vector<double> z(H), r(H), n(H), out(H);
  for (std::size_t i = 0; i < H; ++i) {
    double az = (*p.b_update)[i];
    double ar = (*p.b_reset)[i];
    for (std::size_t j = 0; j < D; ++j) {
      az += p.w_update->at(i, j) * x[j];
      ar += p.w_reset->at(i, j) * x[j];
    }
    for (std::size_t j = 0; j < H; ++j) {
      az += p.u_update->at(i, j) * h[j];
      ar += p.u_reset->at(i, j) * h[j];
    }
    z[i] = sigmoid_ref(az);
    r[i] = sigmoid_ref(ar);
  }
  for (std::size_t i = 0; i < H; ++i) {
    double an = (*p.b_candidate)[i];
    for (std::size_t j = 0; j < D; ++j) an += p.w_candidate->at(i, j) * x[j];
    for (std::size_t j = 0; j < H; ++j) an += p.u_candidate->at(i, j) * (r[j] * h[j]);
    n[i] = std::tanh(an);
    out[i] = (1.0 - z[i]) * n[i] + z[i] * h[i];
  }
  return out;
}

std::vector<double> values_of(Var v) { return v.value().values(); }

}  // namespace

TEST_CASE("backward: product rule and sum") {
  Tensor x = Tensor::vector({2.0});
  Tensor y = Tensor::vector({3.0});
  x.set_requires_grad(true);
  y.set_requires_grad(true);
  Tape tape;
  Var loss = mul(tape.param(x), tape.param(y));
  const Gradients g = backward(loss);
  CHECK(g.get(x)[0] == 3.0);
  CHECK(g.get(y)[0] == 2.0);

  Tensor v = Tensor::vector({1.0, -2.0, 5.0});
  v.set_requires_grad(true);
  Tape t2;
  const Gradients gs = backward(sum(t2.param(v)));
  CHECK(gs.get(v) == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("backward: unreachable parameters get zero gradient") {
  Tensor used = Tensor::vector({1.0, 2.0});
  Tensor unused = Tensor::vector({4.0, 5.0});
  used.set_requires_grad(true);
  unused.set_requires_grad(true);
  Tape tape;
  tape.param(unused);
  const Gradients g = backward(sum(tape.param(used)));
  CHECK_FALSE(g.contains(unused));
  CHECK(g.get(unused) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("backward: non-scalar loss is a contract violation") {
  Tensor x = Tensor::vector({1.0, 2.0});
  x.set_requires_grad(true);
  Tape tape;
  Var v = tanh(tape.param(x));
  CHECK_THROWS_AS(backward(v), pee::ContractError);
}

TEST_CASE("softmax cross-entropy gradient matches central differences") {
  std::mt19937_64 rng(11);
  Tensor logits = random_tensor({4}, rng, -2.0, 2.0);
  const std::size_t target = 2;
  auto loss_at = [&](const Tensor& l) {
    // Independent evaluation: -log(exp(l_t) / sum exp(l)).
    double z = 0.0;
    for (double v : l.data()) z += std::exp(v);
    return -std::log(std::exp(l[target]) / z);
  };
  Tape tape;
  const Gradients g = backward(cross_entropy(tape.param(logits), target));
  const auto analytic = g.get(logits);
  const double h = 1e-5;
  for (std::size_t i = 0; i < 4; ++i) {
    Tensor up = logits, down = logits;
    up[i] += h;
    down[i] -= h;
    const double numeric = (loss_at(up) - loss_at(down)) / (2 * h);
    CHECK(std::abs(analytic[i] - numeric) / std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric)) <
          1e-6);
  }
}

TEST_CASE("grad_check boundary cases") {
  Tensor x = Tensor::vector({3.0});
  x.set_requires_grad(true);
  std::vector<Tensor*> params{&x};
  const double sq = grad_check([&](Tape& t) { Var v = t.param(x); return mul(v, v); }, params, 1e-4);
  CHECK(sq < 1e-8);

  const double c = grad_check(
      [&](Tape& t) {
        t.param(x);
        return t.constant(Tensor::scalar(4.0));
      },
      params, 1e-4);
  CHECK(c == 0.0);

  CHECK_THROWS_AS(grad_check([&](Tape& t) { return t.param(x); }, params, 0.0), pee::ContractError);

  // log(x - 3) is -inf at the lower perturbation.
  Tensor y = Tensor::vector({3.0});
  y.set_requires_grad(true);
  std::vector<Tensor*> py{&y};
  CHECK_THROWS_AS(grad_check([&](Tape& t) { return sum(log(add_scalar(t.param(y), -2.99995))); },
                             py, 1e-4),
                  pee::NumericError);
}

TEST_CASE("every primitive passes grad_check at 1e-6") {
  std::mt19937_64 rng(3);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4}, rng);
  Tensor c = random_tensor({4, 2}, rng);
  Tensor d = random_tensor({3, 2}, rng);
  Tensor e = random_tensor({3, 4}, rng);
  Tensor f = random_tensor({2, 3}, rng);
  Tensor pos = random_tensor({4}, rng, 0.5, 2.0);
  Tensor s = random_tensor({1}, rng);
  std::vector<Tensor*> all{&a, &b, &c, &d, &e, &f, &pos, &s};
  // Weighted sums make every output entry matter with a distinct weight.
  auto weigh = [](Var v) {
    std::vector<double> w(v.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.17 * static_cast<double>(i);
    return sum(mul(v, v.tape().constant(Tensor(v.shape(), w))));
  };
  const std::vector<std::pair<const char*, ScalarFn>> cases{
      {"matmul-vec", [&](Tape& t) { return weigh(matmul(t.param(a), t.param(b))); }},
      {"matmul-mat", [&](Tape& t) { return weigh(matmul(t.param(a), t.param(c))); }},
      {"matmul-ta", [&](Tape& t) { return weigh(matmul(t.param(a), t.param(d), true, false)); }},
      {"matmul-tb", [&](Tape& t) { return weigh(matmul(t.param(a), t.param(e), false, true)); }},
      {"matmul-tt", [&](Tape& t) { return weigh(matmul(t.param(a), t.param(f), true, true)); }},
      {"matmul-vec-ta", [&](Tape& t) { return weigh(matmul(t.param(d), slice(t.param(b), 0, 3), true)); }},
      {"add", [&](Tape& t) { return weigh(add(t.param(a), t.param(e))); }},
      {"add-row", [&](Tape& t) { return weigh(add(t.param(a), t.param(b))); }},
      {"add-scalar", [&](Tape& t) { return weigh(add(t.param(s), t.param(b))); }},
      {"mul", [&](Tape& t) { return weigh(mul(t.param(a), t.param(e))); }},
      {"mul-scalar", [&](Tape& t) { return weigh(mul(t.param(b), t.param(s))); }},
      {"concat", [&](Tape& t) { return weigh(concat({t.param(b), t.param(pos)})); }},
      {"concat-rows", [&](Tape& t) { return weigh(concat({t.param(a), t.param(e)})); }},
      {"slice", [&](Tape& t) { return weigh(slice(t.param(a), 1, 2)); }},
      {"reshape", [&](Tape& t) { return weigh(reshape(t.param(a), {4, 3})); }},
      {"sum", [&](Tape& t) { return mul(sum(t.param(a)), sum(t.param(b))); }},
      {"mean", [&](Tape& t) { return mul(mean(t.param(a)), mean(t.param(pos))); }},
      {"tanh", [&](Tape& t) { return weigh(tanh(t.param(a))); }},
      {"sigmoid", [&](Tape& t) { return weigh(sigmoid(t.param(a))); }},
      {"softplus", [&](Tape& t) { return weigh(softplus(t.param(a))); }},
      {"exp", [&](Tape& t) { return weigh(exp(t.param(b))); }},
      {"log", [&](Tape& t) { return weigh(log(t.param(pos))); }},
      {"softmax", [&](Tape& t) { return weigh(softmax(t.param(b))); }},
      {"softmax-rows", [&](Tape& t) { return weigh(softmax(t.param(a))); }},
      {"embedding", [&](Tape& t) { return weigh(embedding(t.param(a), 2)); }},
      {"cross_entropy", [&](Tape& t) { return cross_entropy(t.param(b), 1); }},
  };
  for (const auto& [name, fn] : cases) {
    CAPTURE(name);
    CHECK(grad_check(fn, all, 1e-5) < 1e-6);
  }
}

TEST_CASE("backward is linear in the loss") {
  std::mt19937_64 rng(5);
  Tensor w = random_tensor({3, 3}, rng);
  Tensor x = random_tensor({3}, rng);
  auto l1 = [&](Tape& t) { return sum(tanh(matmul(t.param(w), t.param(x)))); };
  auto l2 = [&](Tape& t) { return sum(softmax(mul(t.param(x), t.param(x)))); };
  Tape t1, t2, t3;
  const Gradients g1 = backward(l1(t1));
  const Gradients g2 = backward(l2(t2));
  const Gradients g12 = backward(add(l1(t3), l2(t3)));
  for (const Tensor* p : {&w, &x}) {
    const auto a = g1.get(*p), b = g2.get(*p), c = g12.get(*p);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(c[i] == doctest::Approx(a[i] + b[i]).epsilon(1e-12));
  }
}

TEST_CASE("softmax output is a distribution") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor({7}, rng, -30.0, 30.0);
    Tape t;
    const auto p = values_of(softmax(t.param(x)));
    double z = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      z += v;
    }
    CHECK(std::abs(z - 1.0) <= 1e-12);
  }
}

TEST_CASE("record rejects non-finite values") {
  Tensor x = Tensor::vector({-1.0});
  Tape t;
  CHECK_THROWS_AS(log(t.param(x)), pee::NumericError);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged and decays moments") {
  Tensor p = Tensor::vector({1.0, -2.0});
  p.set_requires_grad(true);
  std::vector<Tensor*> ps{&p};
  AdamState st;
  adam_step(ps, Gradients{}, st);
  CHECK(p.values() == std::vector<double>{1.0, -2.0});
  CHECK(st.step == 1);

  Gradients g;
  g.slot(p) = {0.5, 0.5};
  adam_step(ps, g, st);
  const auto m1 = st.first_moment[0];
  const auto v1 = st.second_moment[0];
  adam_step(ps, Gradients{}, st);
  CHECK(st.first_moment[0][0] == doctest::Approx(0.9 * m1[0]).epsilon(1e-15));
  CHECK(st.second_moment[0][1] == doctest::Approx(0.999 * v1[1]).epsilon(1e-15));
  CHECK(st.step == 3);
}

TEST_CASE("adam: first step from zero state moves by the learning rate") {
  Tensor p = Tensor::vector({0.0});
  p.set_requires_grad(true);
  std::vector<Tensor*> ps{&p};
  AdamState st(AdamConfig{1e-4, 0.9, 0.999, 1e-8});
  Gradients g;
  g.slot(p) = {1.0};
  adam_step(ps, g, st);
  // m̂ = 1, v̂ = 1 → Δθ = -lr * 1 / (1 + 1e-8)
  CHECK(p[0] == doctest::Approx(-1e-4 / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam: constant gradient gives steps approaching the learning rate") {
  Tensor p = Tensor::vector({0.0, 0.0});
  p.set_requires_grad(true);
  std::vector<Tensor*> ps{&p};
  AdamState st(AdamConfig{1e-3, 0.9, 0.999, 1e-8});
  Gradients g;
  g.slot(p) = {2.5, -0.3};
  double prev0 = 0.0, prev1 = 0.0;
  for (int i = 0; i < 500; ++i) {
    prev0 = p[0];
    prev1 = p[1];
    adam_step(ps, g, st);
  }
  CHECK(p[0] - prev0 == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(p[1] - prev1 == doctest::Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("adam: shape mismatch and determinism") {
  Tensor p = Tensor::vector({1.0, 2.0});
  p.set_requires_grad(true);
  std::vector<Tensor*> ps{&p};
  AdamState st;
  Gradients bad;
  bad.slot(p) = {1.0, 2.0};
  bad.slot(p).push_back(3.0);
  CHECK_THROWS_AS(adam_step(ps, bad, st), pee::ContractError);

  auto run = [] {
    Tensor q = Tensor::vector({0.3, -0.7, 1.1});
    q.set_requires_grad(true);
    std::vector<Tensor*> qs{&q};
    AdamState s2;
    for (int i = 0; i < 10; ++i) {
      Gradients g;
      g.slot(q) = {0.1 * i, -0.2, std::sin(i)};
      adam_step(qs, g, s2);
    }
    return q.values();
  };
  CHECK(run() == run());
}

TEST_CASE("clip_global_norm rescales to the bound") {
  Tensor p = Tensor::vector({0.0, 0.0});
  p.set_requires_grad(true);
  std::vector<Tensor*> ps{&p};
  Gradients g;
  g.slot(p) = {30.0, 40.0};
  CHECK(clip_global_norm(ps, g, 5.0) == doctest::Approx(50.0));
  CHECK(g.get(p)[0] == doctest::Approx(3.0));
  CHECK(global_norm(ps, g) == doctest::Approx(5.0));
}

TEST_CASE("gru_cell: zero parameters halve the hidden state") {
  ParamStore store;
  Rng rng(1);
  GruParams p = GruParams::create(store, "gru", 2, 3, rng);
  for (Tensor* t : store.tensors()) std::fill(t->data().begin(), t->data().end(), 0.0);
  Tape tape;
  Var h = tape.constant(Tensor::vector({0.4, -1.0, 2.0}));
  Var x = tape.constant(Tensor::vector({5.0, -3.0}));
  const auto out = values_of(gru_cell(tape, x, h, p));
  CHECK(out == std::vector<double>{0.2, -0.5, 1.0});
}

TEST_CASE("gru_cell: zero input and state stay zero with zero biases") {
  ParamStore store;
  Rng rng(2);
  GruParams p = GruParams::create(store, "gru", 2, 3, rng);
  Tape tape;
  const auto out = values_of(gru_cell(tape, tape.constant(Tensor({2}, 0.0)),
                                      tape.constant(Tensor({3}, 0.0)), p));
  for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("gru_cell matches a straight-line oracle") {
  ParamStore store;
  Rng rng(42);
  GruParams p = GruParams::create(store, "gru", 2, 3, rng);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  for (Tensor* b : {p.b_update, p.b_reset, p.b_candidate}) {
    for (double& v : b->data()) v = d(rng);
  }
  const std::vector<double> x{0.7, -1.3};
  const std::vector<double> h{0.2, 0.5, -0.9};
  Tape tape;
  const auto out = values_of(gru_cell(tape, tape.constant(Tensor::vector(x)),
                                      tape.constant(Tensor::vector(h)), p));
  const auto expect = gru_oracle(x, h, p);
  for (std::size_t i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-14));
}

TEST_CASE("gru_cell rejects mismatched dimensions") {
  ParamStore store;
  Rng rng(1);
  GruParams p = GruParams::create(store, "gru", 2, 3, rng);
  Tape tape;
  CHECK_THROWS_AS(gru_cell(tape, tape.constant(Tensor({3}, 0.0)), tape.constant(Tensor({3}, 0.0)), p),
                  pee::ContractError);
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("bigru_encode contracts") {
  ParamStore store;
  Rng rng(8);
  GruParams f = GruParams::create(store, "f", 2, 3, rng);
  GruParams b = GruParams::create(store, "b", 2, 3, rng);

  SUBCASE("empty sequence") {
    Tape tape;
    CHECK_THROWS_AS(bigru_encode(tape, {}, f, b), pee::ContractError);
  }
  SUBCASE("length one: step state equals final state") {
    Tape tape;
    auto out = bigru_encode(tape, {tape.constant(Tensor::vector({0.3, -0.2}))}, f, b);
    REQUIRE(out.states.size() == 1);
    CHECK(values_of(out.states[0]) == values_of(out.final));
    CHECK(out.final.size() == 6);
  }
  SUBCASE("palindrome with shared parameters mirrors") {
    Tape tape;
    std::vector<Var> seq{tape.constant(Tensor::vector({1.0, 0.0})),
                         tape.constant(Tensor::vector({0.0, 2.0})),
                         tape.constant(Tensor::vector({1.0, 0.0}))};
    auto out = bigru_encode(tape, seq, f, f);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto fi = values_of(out.states[i]);
      const auto mirror = values_of(out.states[2 - i]);
      for (std::size_t j = 0; j < 3; ++j) CHECK(fi[j] == mirror[3 + j]);
    }
  }
  SUBCASE("composition of gru_cell in both directions") {
    const std::vector<std::vector<double>> xs{{0.1, 0.2}, {-0.5, 0.4}, {0.9, -0.3}};
    Tape tape;
    std::vector<Var> seq;
    for (const auto& x : xs) seq.push_back(tape.constant(Tensor::vector(x)));
    auto out = bigru_encode(tape, seq, f, b);

    std::vector<std::vector<double>> fw(3), bw(3);
    std::vector<double> h(3, 0.0);
    for (std::size_t i = 0; i < 3; ++i) h = fw[i] = gru_oracle(xs[i], h, f);
    h.assign(3, 0.0);
    for (std::size_t i = 3; i-- > 0;) h = bw[i] = gru_oracle(xs[i], h, b);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto s = values_of(out.states[i]);
      for (std::size_t j = 0; j < 3; ++j) {
        CHECK(s[j] == doctest::Approx(fw[i][j]).epsilon(1e-13));
        CHECK(s[3 + j] == doctest::Approx(bw[i][j]).epsilon(1e-13));
      }
    }
    const auto fin = values_of(out.final);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(fin[j] == doctest::Approx(fw[2][j]).epsilon(1e-13));
      CHECK(fin[3 + j] == doctest::Approx(bw[0][j]).epsilon(1e-13));
    }
  }
}

TEST_CASE("gru and mlp gradients pass grad_check") {
  ParamStore store;
  Rng rng(13);
  GruParams f = GruParams::create(store, "f", 2, 3, rng);
  GruParams b = GruParams::create(store, "b", 2, 3, rng);
  Mlp mlp = Mlp::create(store, "mlp", {6, 4, 2}, rng);
  auto tensors = store.tensors();
  const double err = grad_check(
      [&](Tape& t) {
        std::vector<Var> seq{t.constant(Tensor::vector({0.5, -0.1})),
                             t.constant(Tensor::vector({0.2, 0.8}))};
        auto out = bigru_encode(t, seq, f, b);
        return sum(tanh(mlp(t, out.final)));
      },
      tensors, 1e-5);
  CHECK(err < 1e-6);
}
