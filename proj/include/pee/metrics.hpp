#pragma once
// Automatic response metrics: corpus BLEU, token F1, embedding similarities
// and persona use ratio.

#include <cstddef>
#include <vector>

#include "pee/corpus.hpp"

namespace pee::metrics {

// Corpus BLEU over orders 1..n (pooled clipped counts, geometric mean,
// brevity penalty), as a percentage. Candidates and references pair up by
// index.
double bleu_n(const std::vector<corpus::TokenList>& candidates,
              const std::vector<corpus::TokenList>& references, int n);

// Harmonic mean of multiset precision and recall; 0 if either side is empty.
double f1_tokens(const corpus::TokenList& candidate, const corpus::TokenList& reference);

// Tokens missing from the table are skipped; a side with no embedded tokens
// scores 0.
double emb_average(const corpus::TokenList& candidate, const corpus::TokenList& reference,
                   const corpus::EmbeddingTable& table);
double emb_extrema(const corpus::TokenList& candidate, const corpus::TokenList& reference,
                   const corpus::EmbeddingTable& table);
double emb_greedy(const corpus::TokenList& candidate, const corpus::TokenList& reference,
                  const corpus::EmbeddingTable& table);

// Share of the distinct persona content words that appear in any of the
// responses. 0 when the persona has no content words.
double persona_use_ratio(const std::vector<corpus::TokenList>& persona,
                         const std::vector<corpus::TokenList>& responses);

struct EvalReport {
  double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
  double f1 = 0;
  double emb_average = 0, emb_extrema = 0, emb_greedy = 0;
  double persona_use_ratio = 0;
};

struct EvalItem {
  std::size_t conversation = 0;
  std::vector<corpus::TokenList> persona;
  corpus::TokenList candidate;
  corpus::TokenList reference;
};

// Corpus BLEU; F1 and embedding scores averaged over items; persona use
// ratio averaged over conversations (items grouped by conversation id).
EvalReport evaluate(const std::vector<EvalItem>& items, const corpus::EmbeddingTable& table);

}  // namespace pee::metrics
