#pragma once
// Persona exploration and exploitation dialogue model.
//
// Encoders: a shared Bi-GRU turns each persona sentence into a sentence slot
// (final state) and word slots (per-step states); expanded persona words use
// their embeddings. History is encoded hierarchically: a word-level Bi-GRU per
// utterance, then an utterance-level Bi-GRU over the utterance vectors.
//
// Decoder step t, with hidden size H:
//   s_t   = GRU(embed(y_{t-1}), s_{t-1})
//   u^X   = sum_j a_j h^X_j,  a = softmax_j(v^T tanh(W_s s_t + W_t h^X_j + b))
//   o^w, o^e = multihop(s_t, M^w, M^e)
//   p_t   = softmax(f_o([s_t ; u^X ; o^w ; o^e]))

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "pee/corpus.hpp"
#include "pee/memory.hpp"
#include "pee/numkit/layers.hpp"

namespace pee::net {

struct ModelConfig {
  std::size_t vocab_size = 0;  // |V| including reserved entries
  std::size_t embed_dim = 300;
  std::size_t hidden = 512;
  std::size_t hops = 3;
};

// Token ids for one training or inference instance.
struct DialogueInput {
  std::vector<std::vector<std::size_t>> persona;  // non-empty sentences
  std::vector<std::vector<std::size_t>> history;  // non-empty utterances, oldest first
  std::vector<std::size_t> external;              // expanded persona words
};

// Maps tokens through `vocab`. Empty persona sentences are dropped and empty
// utterances become a single <unk>; throws ContractError when no persona
// sentence or no history remains.
DialogueInput make_input(const std::vector<corpus::TokenList>& persona,
                         const std::vector<corpus::TokenList>& history,
                         const std::vector<std::string>& external_words,
                         const corpus::Vocabulary& vocab);

class PeeModel {
 public:
  // Embedding rows for tokens found in `pretrained` (when its dim matches
  // embed_dim) are copied from it; other rows are uniform in [-0.1, 0.1].
  static PeeModel create(const ModelConfig& config, nk::Rng& rng,
                         const corpus::Vocabulary* vocab = nullptr,
                         const corpus::EmbeddingTable* pretrained = nullptr);
  // Rebinds to tensors already in `params` (checkpoint loading); shapes are
  // checked against `config`.
  static PeeModel from_params(const ModelConfig& config, nk::ParamStore params);

  const ModelConfig& config() const { return config_; }
  nk::ParamStore& params() { return params_; }
  const nk::ParamStore& params() const { return params_; }

  struct Layers {
    nk::Tensor* encoder_embedding = nullptr;  // [|V|, E]
    nk::Tensor* decoder_embedding = nullptr;  // [|V|, E]
    nk::GruParams persona_fwd, persona_bwd;   // E -> H
    nk::Mlp sentence_key, sentence_value;     // 2H -> H
    nk::Mlp word_key, word_value;             // 2H -> H
    nk::Mlp external_key, external_value;     // E -> H
    nk::GruParams word_fwd, word_bwd;         // E -> H
    nk::GruParams utterance_fwd, utterance_bwd;  // 2H -> H
    nk::Affine history_proj;                  // 2H -> H
    nk::Affine init_proj;                     // 3H -> H
    nk::GruParams decoder;                    // E -> H
    nk::Tensor* attn_ws = nullptr;            // [H, H]
    nk::Tensor* attn_wt = nullptr;            // [H, 2H]
    nk::Tensor* attn_b = nullptr;             // [H]
    nk::Tensor* attn_v = nullptr;             // [H]
    nk::Affine output;                        // 5H -> |V|
  };
  const Layers& layers() const { return layers_; }

 private:
  void bind();

  ModelConfig config_;
  nk::ParamStore params_;
  Layers layers_;
};

struct PersonaMemories {
  memory::KeyValueMemory sentence;  // M^s
  memory::KeyValueMemory word;      // M^w
  std::vector<nk::Var> sentence_reps;  // e_{P_i}
  std::vector<nk::Var> word_reps;      // e_{p^i_j}, sentences concatenated
};

PersonaMemories encode_persona(nk::Tape& tape, const PeeModel& model,
                               const std::vector<std::vector<std::size_t>>& persona);

memory::KeyValueMemory encode_external(nk::Tape& tape, const PeeModel& model,
                                       const std::vector<std::size_t>& words);

struct HistoryEncoding {
  nk::Var summary;                    // e_X, dim 2H
  std::vector<nk::Var> utterances;    // C_i, projected to dim H
  nk::Var word_states;                // h^X_j stacked, [n, 2H]
};

HistoryEncoding encode_history(nk::Tape& tape, const PeeModel& model,
                               const std::vector<std::vector<std::size_t>>& history);

// s_0 = init_proj([e_X ; o_k])
nk::Var init_state(nk::Tape& tape, const PeeModel& model, nk::Var summary, nk::Var persona_output);

struct Attention {
  nk::Var context;  // u^X, dim 2H
  nk::Var weights;  // over word states
};

// `projected_states` is W_t h^X_j for every j ([n, H]); see project_word_states.
nk::Var project_word_states(nk::Tape& tape, const PeeModel& model, nk::Var word_states);
Attention attend_history(nk::Tape& tape, const PeeModel& model, nk::Var state,
                         nk::Var word_states, nk::Var projected_states);

// Everything the decoder needs, computed once per instance.
struct Context {
  PersonaMemories persona;
  memory::KeyValueMemory external;
  HistoryEncoding history;
  memory::PirResult retrieval;
  nk::Var projected_states;
  nk::Var initial_state;
};

Context encode_context(nk::Tape& tape, const PeeModel& model, const DialogueInput& input);

struct StepOutput {
  nk::Var logits;  // s~_t
  nk::Var probs;   // p_{y_t}
  nk::Var state;   // s_t
  Attention attention;
  memory::MultihopResult retrieval;
};

// Throws ContractError for a token outside the vocabulary.
StepOutput decode_step(nk::Tape& tape, const PeeModel& model, const Context& ctx,
                       std::size_t prev_token, nk::Var state);

struct ForwardResult {
  Context context;
  std::vector<StepOutput> steps;
};

// Teacher-forced pass: the decoder reads <sos>, targets[0], ..., targets[T-2].
ForwardResult forward(nk::Tape& tape, const PeeModel& model, const DialogueInput& input,
                      const std::vector<std::size_t>& targets);

enum class SearchMode { Greedy, Beam };

struct GenerateConfig {
  SearchMode mode = SearchMode::Beam;
  std::size_t beam_width = 2;
  std::size_t max_len = 30;
};

struct StepDiagnostics {
  std::vector<double> attention;         // over history words
  std::vector<double> word_memory;       // M^w weights of the last hop
  std::vector<double> external_memory;   // M^e weights of the last hop; empty if M^e is
};

struct Generation {
  std::vector<std::size_t> tokens;  // includes the final <eos> when one was produced
  double log_prob = 0.0;
  std::vector<double> persona_weights;  // a^s
  std::vector<StepDiagnostics> steps;
};

// Greedy takes the arg-max (lowest index on ties). Beam search ranks by the
// summed log-probability without length normalisation, retires hypotheses at
// <eos>, stops once the best retired hypothesis scores at least as well as the
// best live one, and breaks ties by comparing token ids.
Generation generate(const PeeModel& model, const DialogueInput& input, const GenerateConfig& config);

}  // namespace pee::net
