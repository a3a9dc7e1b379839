#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "pee/error.hpp"
#include "pee/memory.hpp"
#include "pee/numkit/gradcheck.hpp"
#include "pee/numkit/ops.hpp"

using namespace pee;
using memory::KeyValueMemory;
using nk::Tape;
using nk::Tensor;
using nk::Var;
using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

namespace {

Var vec(Tape& t, Vec v) { return t.constant(Tensor::vector(std::move(v))); }

Var mat(Tape& t, const Mat& rows) {
  Vec flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return t.constant(Tensor({rows.size(), rows.front().size()}, flat));
}

KeyValueMemory mem(Tape& t, const Mat& keys, const Mat& values) {
  return KeyValueMemory(mat(t, keys), mat(t, values));
}

// Plain-double reference for retri.
Vec retri_oracle(const Vec& q, const Mat& keys, const Mat& values, Vec* weights = nullptr) {
  Vec s;
  for (const auto& k : keys) s.push_back(std::inner_product(q.begin(), q.end(), k.begin(), 0.0));
  const double mx = *std::max_element(s.begin(), s.end());
  double z = 0;
  for (double& x : s) z += (x = std::exp(x - mx));
  for (double& x : s) x /= z;
  Vec o(values.front().size(), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t d = 0; d < o.size(); ++d) o[d] += s[i] * values[i][d];
  }
  if (weights) *weights = s;
  return o;
}

Vec plus(Vec a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

Mat random_mat(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Mat m(n, Vec(d));
  for (auto& r : m) for (double& x : r) x = g(rng);
  return m;
}

void check_vec(const Var& v, const Vec& expect, double tol) {
  REQUIRE(v.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(std::abs(v.value()[i] - expect[i]) <= tol);
}

nk::Mlp identity_mlp(nk::ParamStore& store, const std::string& name, std::size_t d) {
  nk::Rng rng(0);
  nk::Mlp m = nk::Mlp::create(store, name, {d, d}, rng);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) m.layers[0].weight->at(r, c) = r == c ? 1.0 : 0.0;
  }
  return m;
}

}  // namespace

TEST_CASE("build_memory") {
  nk::ParamStore store;
  Tape tape;
  SUBCASE("identity projections copy the representations") {
    const auto id = identity_mlp(store, "id", 3);
    const std::vector<Var> reps{vec(tape, {1, 2, 3}), vec(tape, {-1, 0, 4})};
    const auto m = memory::build_memory(tape, reps, id, id);
    CHECK(m.slots() == 2);
    CHECK(m.keys().value().values() == Vec{1, 2, 3, -1, 0, 4});
    CHECK(m.values().value().values() == Vec{1, 2, 3, -1, 0, 4});
  }
  SUBCASE("empty input") {
    nk::Rng rng(1);
    const auto k = nk::Mlp::create(store, "k", {3, 4}, rng);
    const auto v = nk::Mlp::create(store, "v", {3, 5}, rng);
    const auto m = memory::build_memory(tape, std::span<const Var>{}, k, v);
    CHECK(m.empty());
    CHECK(m.key_dim() == 4);
    CHECK(m.value_dim() == 5);
  }
  SUBCASE("single-layer projections match a straight-line oracle") {
    nk::Rng rng(2);
    const auto k = nk::Mlp::create(store, "k", {3, 2}, rng);
    const auto v = nk::Mlp::create(store, "v", {3, 4}, rng);
    store.at("k.0.bias")[1] = 0.25;
    const Mat reps{{0.5, -1, 2}, {1, 1, 1}};
    const std::vector<Var> rv{vec(tape, reps[0]), vec(tape, reps[1])};
    const auto m = memory::build_memory(tape, rv, k, v);
    for (std::size_t i = 0; i < 2; ++i) {
      for (auto [mlp, out] : {std::pair{&k, m.keys()}, std::pair{&v, m.values()}}) {
        const Tensor& w = *mlp->layers[0].weight;
        const Tensor& b = *mlp->layers[0].bias;
        for (std::size_t r = 0; r < w.dim(0); ++r) {
          double s = b[r];
          for (std::size_t c = 0; c < 3; ++c) s += w.at(r, c) * reps[i][c];
          CHECK(out.value().at(i, r) == doctest::Approx(s).epsilon(1e-14));
        }
      }
    }
  }
  SUBCASE("dimension mismatch") {
    const auto id = identity_mlp(store, "id", 3);
    const std::vector<Var> reps{vec(tape, {1, 2})};
    CHECK_THROWS_AS(memory::build_memory(tape, reps, id, id), ContractError);
  }
}

TEST_CASE("retri") {
  Tape tape;
  SUBCASE("single slot returns its value") {
    const auto r = memory::retri(vec(tape, {3, -2}), mem(tape, {{1, 1}}, {{7, 8, 9}}));
    CHECK(r.weights.value().values() == Vec{1.0});
    CHECK(r.output.value().values() == Vec{7, 8, 9});
  }
  SUBCASE("identical keys average the values") {
    const auto r = memory::retri(vec(tape, {0.3, 2}), mem(tape, {{1, 2}, {1, 2}, {1, 2}}, {{3, 0}, {0, 3}, {3, 3}}));
    check_vec(r.output, {2, 2}, 1e-14);
  }
  SUBCASE("hand softmax") {
    const auto r = memory::retri(vec(tape, {1, 0}), mem(tape, {{1, 0}, {0, 1}}, {{1, 0}, {0, 1}}));
    const double e = std::exp(1.0);
    check_vec(r.weights, {e / (e + 1), 1 / (e + 1)}, 1e-15);
    check_vec(r.output, {0.7311, 0.2689}, 1e-4);
  }
  SUBCASE("empty memory gives zeros") {
    const auto r = memory::retri(vec(tape, {1, 2}), KeyValueMemory(2, 3));
    CHECK(r.output.value().values() == Vec{0, 0, 0});
    CHECK_FALSE(r.weights.valid());
  }
  SUBCASE("query dim mismatch") {
    CHECK_THROWS_AS(memory::retri(vec(tape, {1}), mem(tape, {{1, 0}}, {{1}})), ContractError);
  }
}

TEST_CASE("retri properties") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Tape tape;
    const std::size_t n = 1 + rng() % 6, d = 1 + rng() % 4, dv = 1 + rng() % 4;
    const Mat keys = random_mat(n, d, rng), values = random_mat(n, dv, rng);
    const Vec q = random_mat(1, d, rng)[0];
    const auto r = memory::retri(vec(tape, q), mem(tape, keys, values));
    const auto w = r.weights.value().values();
    CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) <= 1e-9);
    for (double x : w) CHECK(x > 0.0);
    // Convex hull: each coordinate lies within the values' range.
    for (std::size_t c = 0; c < dv; ++c) {
      double lo = values[0][c], hi = values[0][c];
      for (const auto& v : values) lo = std::min(lo, v[c]), hi = std::max(hi, v[c]);
      CHECK(r.output.value()[c] >= lo - 1e-12);
      CHECK(r.output.value()[c] <= hi + 1e-12);
    }
    check_vec(r.output, retri_oracle(q, keys, values), 1e-12);
  }
}

TEST_CASE("key scaling sharpens attention without moving the argmax") {
  const Mat keys{{1, 0}, {0.5, 0.5}, {-1, 0.2}};
  const Mat values{{1}, {2}, {3}};
  const Vec q{1, 0.1};
  for (double alpha : {0.5, 1.0, 10.0, 100.0}) {
    Mat scaled = keys;
    for (auto& r : scaled) for (double& x : r) x *= alpha;
    Tape tape;
    const auto w = memory::retri(vec(tape, q), mem(tape, scaled, values)).weights.value().values();
    CHECK(std::max_element(w.begin(), w.end()) - w.begin() == 0);
    if (alpha == 100.0) CHECK(w[0] > 0.99);
  }
}

TEST_CASE("persona_information_retrieval") {
  Tape tape;
  const Mat keys{{1, 0}, {0, 1}}, values{{0.5, -1}, {2, 0.25}};
  SUBCASE("one step equals retri") {
    const std::vector<Var> c{vec(tape, {0.3, -0.7})};
    const auto m = mem(tape, keys, values);
    const auto r = memory::persona_information_retrieval(c, m);
    check_vec(r.output, retri_oracle({0.3, -0.7}, keys, values), 1e-15);
    CHECK(r.trace.queries.size() == 1);
  }
  SUBCASE("zero values leave the queries untouched") {
    const std::vector<Var> c{vec(tape, {1, 2}), vec(tape, {3, 4}), vec(tape, {5, 6})};
    const auto r = memory::persona_information_retrieval(c, mem(tape, keys, {{0, 0}, {0, 0}}));
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(r.trace.queries[i].value().values() == c[i].value().values());
      CHECK(r.trace.outputs[i].value().values() == Vec{0, 0});
    }
  }
  SUBCASE("two steps match the unrolled oracle") {
    const Vec c1{0.2, 1.0}, c2{-0.4, 0.3};
    const std::vector<Var> c{vec(tape, c1), vec(tape, c2)};
    const auto r = memory::persona_information_retrieval(c, mem(tape, keys, values));
    const Vec o1 = retri_oracle(c1, keys, values);
    Vec w2;
    const Vec o2 = retri_oracle(plus(c2, o1), keys, values, &w2);
    check_vec(r.trace.queries[1], plus(c2, o1), 1e-15);
    check_vec(r.output, o2, 1e-14);
    check_vec(r.trace.last_weights, w2, 1e-14);
  }
  SUBCASE("single-slot memory puts all weight on it") {
    const std::vector<Var> c{vec(tape, {1, 2}), vec(tape, {3, 4})};
    const auto r = memory::persona_information_retrieval(c, mem(tape, {{1, 1}}, {{1, 1}}));
    CHECK(r.trace.last_weights.value().values() == Vec{1.0});
  }
  SUBCASE("errors") {
    const auto m = mem(tape, keys, values);
    CHECK_THROWS_AS(memory::persona_information_retrieval({}, m), ContractError);
    const std::vector<Var> c{vec(tape, {1, 2})};
    CHECK_THROWS_AS(memory::persona_information_retrieval(c, KeyValueMemory(2, 2)), ContractError);
  }
}

TEST_CASE("multihop") {
  const Mat wk{{1, 0}, {0.3, -1}}, wv{{0.2, 0.1}, {-0.5, 0.4}};
  const Mat ek{{0, 1}, {1, 1}}, ev{{0.3, -0.2}, {0.1, 0.6}};
  const Vec q0{0.5, -0.25};
  SUBCASE("one hop") {
    Tape tape;
    const auto r = memory::multihop(vec(tape, q0), mem(tape, wk, wv), mem(tape, ek, ev), 1);
    const Vec ow = retri_oracle(q0, wk, wv), oe = retri_oracle(q0, ek, ev);
    check_vec(r.word_output, ow, 1e-15);
    check_vec(r.external_output, oe, 1e-15);
    check_vec(r.query, plus(plus(q0, ow), oe), 1e-15);
  }
  SUBCASE("three hops match the unrolled oracle") {
    Tape tape;
    const auto r = memory::multihop(vec(tape, q0), mem(tape, wk, wv), mem(tape, ek, ev), 3);
    Vec q = q0, ow, oe;
    for (int h = 0; h < 3; ++h) {
      ow = retri_oracle(q, wk, wv);
      oe = retri_oracle(q, ek, ev);
      q = plus(plus(q, ow), oe);
    }
    check_vec(r.word_output, ow, 1e-10);
    check_vec(r.external_output, oe, 1e-10);
    check_vec(r.query, q, 1e-10);
    CHECK(r.word_weights.size() == 3);
  }
  SUBCASE("zero values are a fixed point") {
    for (std::size_t hops = 1; hops <= 5; ++hops) {
      Tape tape;
      const auto r = memory::multihop(vec(tape, q0), mem(tape, wk, {{0, 0}, {0, 0}}),
                                      mem(tape, ek, {{0, 0}, {0, 0}}), hops);
      CHECK(r.query.value().values() == q0);
      CHECK(r.word_output.value().values() == Vec{0, 0});
    }
  }
  SUBCASE("empty external memory") {
    Tape tape;
    const auto r = memory::multihop(vec(tape, q0), mem(tape, wk, wv), KeyValueMemory(2, 2), 2);
    CHECK(r.external_output.value().values() == Vec{0, 0});
  }
  SUBCASE("errors") {
    Tape tape;
    CHECK_THROWS_AS(memory::multihop(vec(tape, q0), mem(tape, wk, wv), mem(tape, ek, ev), 0),
                    ContractError);
    CHECK_THROWS_AS(memory::multihop(vec(tape, q0), mem(tape, wk, {{1}, {2}}), mem(tape, ek, ev), 1),
                    ContractError);
  }
  SUBCASE("gradients through three hops") {
    std::mt19937_64 rng(5);
    auto tensor = [&](std::size_t r, std::size_t c) {
      Tensor t({r, c});
      std::normal_distribution<double> g(0, 0.7);
      for (double& x : t.data()) x = g(rng);
      t.set_requires_grad(true);
      return t;
    };
    Tensor twk = tensor(3, 2), twv = tensor(3, 2), tek = tensor(2, 2), tev = tensor(2, 2),
           tq = tensor(1, 2);
    std::vector<Tensor*> params{&twk, &twv, &tek, &tev, &tq};
    const auto rep = nk::grad_check_report(
        [&](Tape& t) {
          const auto r = memory::multihop(nk::reshape(t.param(tq), {2}),
                                          KeyValueMemory(t.param(twk), t.param(twv)),
                                          KeyValueMemory(t.param(tek), t.param(tev)), 3);
          return nk::sum(nk::mul(r.query, r.query));
        },
        params, 1e-5);
    INFO("param " << rep.param << " entry " << rep.entry << " analytic " << rep.analytic
                  << " numeric " << rep.numeric);
    CHECK(rep.max_rel_error < 1e-6);
  }
}
