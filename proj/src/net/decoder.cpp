#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pee/error.hpp"
#include "pee/net.hpp"
#include "pee/numkit/ops.hpp"

namespace pee::net {

using corpus::Vocabulary;
using nk::Tape;
using nk::Var;

namespace {

std::vector<Var> embed(Tape& tape, const nk::Tensor& table, const std::vector<std::size_t>& ids) {
  if (ids.empty()) throw ContractError("cannot encode an empty token sequence");
  Var t = tape.param(table);
  std::vector<Var> out;
  out.reserve(ids.size());
  for (std::size_t id : ids) {
    if (id >= table.dim(0)) throw ContractError("token id " + std::to_string(id) + " outside the vocabulary");
    out.push_back(nk::embedding(t, id));
  }
  return out;
}

std::vector<double> values_or_empty(const Var& v) {
  return v.valid() ? v.value().values() : std::vector<double>{};
}

}  // namespace

PersonaMemories encode_persona(Tape& tape, const PeeModel& model,
                               const std::vector<std::vector<std::size_t>>& persona) {
  if (persona.empty()) throw ContractError("encode_persona: no persona sentences");
  const auto& l = model.layers();
  PersonaMemories out;
  for (const auto& sentence : persona) {
    auto enc = nk::bigru_encode(tape, embed(tape, *l.encoder_embedding, sentence), l.persona_fwd,
                                l.persona_bwd);
    out.sentence_reps.push_back(enc.final);
    out.word_reps.insert(out.word_reps.end(), enc.states.begin(), enc.states.end());
  }
  out.sentence = memory::build_memory(tape, out.sentence_reps, l.sentence_key, l.sentence_value);
  out.word = memory::build_memory(tape, out.word_reps, l.word_key, l.word_value);
  return out;
}

memory::KeyValueMemory encode_external(Tape& tape, const PeeModel& model,
                                       const std::vector<std::size_t>& words) {
  const auto& l = model.layers();
  if (words.empty()) return memory::build_memory(tape, std::span<const Var>{}, l.external_key, l.external_value);
  const auto reps = embed(tape, *l.encoder_embedding, words);
  return memory::build_memory(tape, reps, l.external_key, l.external_value);
}

HistoryEncoding encode_history(Tape& tape, const PeeModel& model,
                               const std::vector<std::vector<std::size_t>>& history) {
  if (history.empty()) throw ContractError("encode_history: empty history");
  const auto& l = model.layers();
  std::vector<Var> sentence_vectors;
  std::vector<Var> words;
  for (const auto& u : history) {
    auto enc = nk::bigru_encode(tape, embed(tape, *l.encoder_embedding, u), l.word_fwd, l.word_bwd);
    sentence_vectors.push_back(enc.final);
    words.insert(words.end(), enc.states.begin(), enc.states.end());
  }
  auto top = nk::bigru_encode(tape, sentence_vectors, l.utterance_fwd, l.utterance_bwd);
  HistoryEncoding out;
  out.summary = top.final;
  for (const Var& s : top.states) out.utterances.push_back(l.history_proj(tape, s));
  out.word_states = memory::stack_rows(words);
  return out;
}

Var init_state(Tape& tape, const PeeModel& model, Var summary, Var persona_output) {
  return model.layers().init_proj(tape, nk::concat({summary, persona_output}));
}

Var project_word_states(Tape& tape, const PeeModel& model, Var word_states) {
  return nk::matmul(word_states, tape.param(*model.layers().attn_wt), false, true);
}

Attention attend_history(Tape& tape, const PeeModel& model, Var state, Var word_states,
                         Var projected_states) {
  const auto& l = model.layers();
  Var query = nk::add(nk::matmul(tape.param(*l.attn_ws), state), tape.param(*l.attn_b));
  Var scores = nk::matmul(nk::tanh(nk::add(projected_states, query)), tape.param(*l.attn_v));
  Var weights = nk::softmax(scores);
  return {nk::matmul(word_states, weights, true), weights};
}

Context encode_context(Tape& tape, const PeeModel& model, const DialogueInput& input) {
  Context ctx;
  ctx.persona = encode_persona(tape, model, input.persona);
  ctx.external = encode_external(tape, model, input.external);
  ctx.history = encode_history(tape, model, input.history);
  ctx.retrieval = memory::persona_information_retrieval(ctx.history.utterances, ctx.persona.sentence);
  ctx.projected_states = project_word_states(tape, model, ctx.history.word_states);
  ctx.initial_state = init_state(tape, model, ctx.history.summary, ctx.retrieval.output);
  return ctx;
}

StepOutput decode_step(Tape& tape, const PeeModel& model, const Context& ctx,
                       std::size_t prev_token, Var state) {
  const auto& l = model.layers();
  if (prev_token >= model.config().vocab_size) {
    throw ContractError("decode_step: token " + std::to_string(prev_token) + " outside the vocabulary");
  }
  StepOutput out;
  Var x = nk::embedding(tape.param(*l.decoder_embedding), prev_token);
  out.state = nk::gru_cell(tape, x, state, l.decoder);
  out.attention = attend_history(tape, model, out.state, ctx.history.word_states, ctx.projected_states);
  out.retrieval = memory::multihop(out.state, ctx.persona.word, ctx.external, model.config().hops);
  out.logits = l.output(tape, nk::concat({out.state, out.attention.context, out.retrieval.word_output,
                                          out.retrieval.external_output}));
  out.probs = nk::softmax(out.logits);
  return out;
}

ForwardResult forward(Tape& tape, const PeeModel& model, const DialogueInput& input,
                      const std::vector<std::size_t>& targets) {
  if (targets.empty()) throw ContractError("forward: empty target sequence");
  ForwardResult r;
  r.context = encode_context(tape, model, input);
  Var state = r.context.initial_state;
  std::size_t prev = Vocabulary::kSos;
  for (std::size_t t : targets) {
    r.steps.push_back(decode_step(tape, model, r.context, prev, state));
    state = r.steps.back().state;
    prev = t;
  }
  return r;
}

namespace {

struct Hypothesis {
  std::vector<std::size_t> tokens;
  double score = 0.0;
  Var state;
  std::vector<StepDiagnostics> steps;

  bool finished() const { return !tokens.empty() && tokens.back() == Vocabulary::kEos; }
};

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

double log_prob(double p) {
  return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

StepDiagnostics diagnostics(const StepOutput& s) {
  return {s.attention.weights.value().values(), values_or_empty(s.retrieval.word_weights.back()),
          values_or_empty(s.retrieval.external_weights.back())};
}

Generation finish(const Hypothesis& h, const Context& ctx) {
  return {h.tokens, h.score, ctx.retrieval.trace.last_weights.value().values(), h.steps};
}

}  // namespace

Generation generate(const PeeModel& model, const DialogueInput& input, const GenerateConfig& config) {
  if (config.max_len == 0) throw ContractError("generate: max_len must be at least 1");
  if (config.mode == SearchMode::Beam && config.beam_width == 0) {
    throw ContractError("generate: beam width must be at least 1");
  }
  Tape tape;
  const Context ctx = encode_context(tape, model, input);

  if (config.mode == SearchMode::Greedy) {
    Hypothesis h{{}, 0.0, ctx.initial_state, {}};
    while (h.tokens.size() < config.max_len && !h.finished()) {
      const std::size_t prev = h.tokens.empty() ? Vocabulary::kSos : h.tokens.back();
      const StepOutput s = decode_step(tape, model, ctx, prev, h.state);
      const auto p = s.probs.value().data();
      const std::size_t best =
          static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
      h.tokens.push_back(best);
      h.score += log_prob(p[best]);
      h.state = s.state;
      h.steps.push_back(diagnostics(s));
    }
    return finish(h, ctx);
  }

  const std::size_t width = config.beam_width;
  std::vector<Hypothesis> live{{{}, 0.0, ctx.initial_state, {}}};
  std::vector<Hypothesis> done;
  for (std::size_t len = 0; len < config.max_len && !live.empty(); ++len) {
    std::vector<Hypothesis> candidates;
    for (const Hypothesis& h : live) {
      const std::size_t prev = h.tokens.empty() ? Vocabulary::kSos : h.tokens.back();
      const StepOutput s = decode_step(tape, model, ctx, prev, h.state);
      const auto p = s.probs.value().data();
      std::vector<std::size_t> order(p.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      const std::size_t keep = std::min(width, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                        [&](std::size_t a, std::size_t b) { return p[a] != p[b] ? p[a] > p[b] : a < b; });
      const StepDiagnostics diag = diagnostics(s);
      for (std::size_t k = 0; k < keep; ++k) {
        Hypothesis next{h.tokens, h.score + log_prob(p[order[k]]), s.state, h.steps};
        next.tokens.push_back(order[k]);
        next.steps.push_back(diag);
        candidates.push_back(std::move(next));
      }
    }
    std::sort(candidates.begin(), candidates.end(), better);
    candidates.resize(std::min(width, candidates.size()));
    live.clear();
    for (auto& c : candidates) (c.finished() ? done : live).push_back(std::move(c));
    if (!done.empty() && !live.empty()) {
      const auto best_done = std::min_element(done.begin(), done.end(), better);
      // Scores only fall as hypotheses grow, so no live one can overtake.
      if (best_done->score >= live.front().score) break;
    }
  }
  done.insert(done.end(), live.begin(), live.end());
  return finish(*std::min_element(done.begin(), done.end(), better), ctx);
}

}  // namespace pee::net
