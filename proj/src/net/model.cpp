#include <cmath>
#include <string>

#include "pee/error.hpp"
#include "pee/net.hpp"
#include "pee/numkit/ops.hpp"

namespace pee::net {

using corpus::Vocabulary;
using nk::Tensor;

DialogueInput make_input(const std::vector<corpus::TokenList>& persona,
                         const std::vector<corpus::TokenList>& history,
                         const std::vector<std::string>& external_words, const Vocabulary& vocab) {
  DialogueInput in;
  for (const auto& s : persona) {
    if (!s.empty()) in.persona.push_back(vocab.encode(s));
  }
  for (const auto& u : history) {
    in.history.push_back(u.empty() ? std::vector<std::size_t>{Vocabulary::kUnk} : vocab.encode(u));
  }
  for (const auto& w : external_words) {
    if (auto id = vocab.find(w); id && *id >= Vocabulary::kNumReserved) in.external.push_back(*id);
  }
  if (in.persona.empty()) throw ContractError("make_input: no persona sentences");
  if (in.history.empty()) throw ContractError("make_input: empty history");
  return in;
}

namespace {

void check_config(const ModelConfig& c) {
  if (c.vocab_size <= Vocabulary::kNumReserved || c.embed_dim == 0 || c.hidden == 0 || c.hops == 0) {
    throw ContractError("model config: vocab_size must exceed the reserved ids and all dims be positive");
  }
}

void init_embedding(Tensor& table, const Vocabulary* vocab, const corpus::EmbeddingTable* pretrained,
                    nk::Rng& rng) {
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (double& x : table.data()) x = u(rng);
  if (vocab == nullptr || pretrained == nullptr || pretrained->dim != table.dim(1)) return;
  const std::size_t rows = std::min(vocab->size(), table.dim(0));
  for (std::size_t r = 0; r < rows; ++r) {
    if (const auto* v = pretrained->find(vocab->token(r))) {
      for (std::size_t c = 0; c < v->size(); ++c) table.at(r, c) = (*v)[c];
    }
  }
}

nk::GruParams gru(nk::ParamStore& s, const std::string& name) {
  nk::GruParams p;
  p.w_update = &s.at(name + ".w_update");
  p.w_reset = &s.at(name + ".w_reset");
  p.w_candidate = &s.at(name + ".w_candidate");
  p.u_update = &s.at(name + ".u_update");
  p.u_reset = &s.at(name + ".u_reset");
  p.u_candidate = &s.at(name + ".u_candidate");
  p.b_update = &s.at(name + ".b_update");
  p.b_reset = &s.at(name + ".b_reset");
  p.b_candidate = &s.at(name + ".b_candidate");
  p.validate();
  return p;
}

nk::Affine affine(nk::ParamStore& s, const std::string& name) {
  return {&s.at(name + ".weight"), &s.at(name + ".bias")};
}

nk::Mlp mlp(nk::ParamStore& s, const std::string& name) {
  nk::Mlp m;
  for (std::size_t i = 0; s.find(name + "." + std::to_string(i) + ".weight") != nullptr; ++i) {
    m.layers.push_back(affine(s, name + "." + std::to_string(i)));
  }
  if (m.layers.empty()) throw ContractError("missing parameters for " + name);
  return m;
}

void expect_shape(const Tensor& t, const nk::Shape& shape, const std::string& what) {
  if (t.shape() != shape) {
    throw ContractError(what + " has shape " + nk::shape_string(t.shape()) + ", expected " +
                        nk::shape_string(shape));
  }
}

void expect_io(std::size_t in, std::size_t out, std::size_t want_in, std::size_t want_out,
               const std::string& what) {
  if (in != want_in || out != want_out) {
    throw ContractError(what + " maps " + std::to_string(in) + " -> " + std::to_string(out) +
                        ", expected " + std::to_string(want_in) + " -> " + std::to_string(want_out));
  }
}

}  // namespace

PeeModel PeeModel::create(const ModelConfig& config, nk::Rng& rng, const Vocabulary* vocab,
                          const corpus::EmbeddingTable* pretrained) {
  check_config(config);
  const std::size_t v = config.vocab_size, e = config.embed_dim, h = config.hidden;
  PeeModel m;
  m.config_ = config;
  nk::ParamStore& s = m.params_;
  init_embedding(s.zeros("embedding.encoder", {v, e}), vocab, pretrained, rng);
  init_embedding(s.zeros("embedding.decoder", {v, e}), vocab, pretrained, rng);
  nk::GruParams::create(s, "persona.fwd", e, h, rng);
  nk::GruParams::create(s, "persona.bwd", e, h, rng);
  nk::Mlp::create(s, "persona.sentence_key", {2 * h, h, h}, rng);
  nk::Mlp::create(s, "persona.sentence_value", {2 * h, h, h}, rng);
  nk::Mlp::create(s, "persona.word_key", {2 * h, h, h}, rng);
  nk::Mlp::create(s, "persona.word_value", {2 * h, h, h}, rng);
  nk::Mlp::create(s, "external.key", {e, h, h}, rng);
  nk::Mlp::create(s, "external.value", {e, h, h}, rng);
  nk::GruParams::create(s, "history.word_fwd", e, h, rng);
  nk::GruParams::create(s, "history.word_bwd", e, h, rng);
  nk::GruParams::create(s, "history.utterance_fwd", 2 * h, h, rng);
  nk::GruParams::create(s, "history.utterance_bwd", 2 * h, h, rng);
  nk::Affine::create(s, "history.proj", 2 * h, h, rng);
  nk::Affine::create(s, "decoder.init", 3 * h, h, rng);
  nk::GruParams::create(s, "decoder.gru", e, h, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  s.uniform("decoder.attn.ws", {h, h}, bound, rng);
  s.uniform("decoder.attn.wt", {h, 2 * h}, bound, rng);
  s.zeros("decoder.attn.b", {h});
  s.uniform("decoder.attn.v", {h}, bound, rng);
  nk::Affine::create(s, "decoder.output", 5 * h, v, rng);
  m.bind();
  return m;
}

PeeModel PeeModel::from_params(const ModelConfig& config, nk::ParamStore params) {
  check_config(config);
  PeeModel m;
  m.config_ = config;
  m.params_ = std::move(params);
  m.bind();
  return m;
}

void PeeModel::bind() {
  nk::ParamStore& s = params_;
  const std::size_t v = config_.vocab_size, e = config_.embed_dim, h = config_.hidden;
  Layers& l = layers_;
  l.encoder_embedding = &s.at("embedding.encoder");
  l.decoder_embedding = &s.at("embedding.decoder");
  expect_shape(*l.encoder_embedding, {v, e}, "embedding.encoder");
  expect_shape(*l.decoder_embedding, {v, e}, "embedding.decoder");
  l.persona_fwd = gru(s, "persona.fwd");
  l.persona_bwd = gru(s, "persona.bwd");
  l.sentence_key = mlp(s, "persona.sentence_key");
  l.sentence_value = mlp(s, "persona.sentence_value");
  l.word_key = mlp(s, "persona.word_key");
  l.word_value = mlp(s, "persona.word_value");
  l.external_key = mlp(s, "external.key");
  l.external_value = mlp(s, "external.value");
  l.word_fwd = gru(s, "history.word_fwd");
  l.word_bwd = gru(s, "history.word_bwd");
  l.utterance_fwd = gru(s, "history.utterance_fwd");
  l.utterance_bwd = gru(s, "history.utterance_bwd");
  l.history_proj = affine(s, "history.proj");
  l.init_proj = affine(s, "decoder.init");
  l.decoder = gru(s, "decoder.gru");
  l.attn_ws = &s.at("decoder.attn.ws");
  l.attn_wt = &s.at("decoder.attn.wt");
  l.attn_b = &s.at("decoder.attn.b");
  l.attn_v = &s.at("decoder.attn.v");
  l.output = affine(s, "decoder.output");

  for (const auto* g : {&l.persona_fwd, &l.persona_bwd, &l.word_fwd, &l.word_bwd, &l.decoder}) {
    expect_io(g->input_dim(), g->hidden_dim(), e, h, "encoder/decoder GRU");
  }
  for (const auto* g : {&l.utterance_fwd, &l.utterance_bwd}) {
    expect_io(g->input_dim(), g->hidden_dim(), 2 * h, h, "utterance GRU");
  }
  for (const auto* m : {&l.sentence_key, &l.sentence_value, &l.word_key, &l.word_value}) {
    expect_io(m->in_dim(), m->out_dim(), 2 * h, h, "persona memory projection");
  }
  for (const auto* m : {&l.external_key, &l.external_value}) {
    expect_io(m->in_dim(), m->out_dim(), e, h, "external memory projection");
  }
  expect_io(l.history_proj.in_dim(), l.history_proj.out_dim(), 2 * h, h, "history.proj");
  expect_io(l.init_proj.in_dim(), l.init_proj.out_dim(), 3 * h, h, "decoder.init");
  expect_shape(*l.attn_ws, {h, h}, "decoder.attn.ws");
  expect_shape(*l.attn_wt, {h, 2 * h}, "decoder.attn.wt");
  expect_shape(*l.attn_b, {h}, "decoder.attn.b");
  expect_shape(*l.attn_v, {h}, "decoder.attn.v");
  expect_io(l.output.in_dim(), l.output.out_dim(), 5 * h, v, "decoder.output");
}

}  // namespace pee::net
