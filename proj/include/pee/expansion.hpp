#pragma once
// Persona exploration: grows each conversation's persona vocabulary V^P with
// the external words closest to it in topic space.

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pee/corpus.hpp"
#include "pee/topic.hpp"

namespace pee::expansion {

struct ScoredToken {
  std::string token;
  double score = 0.0;

  bool operator==(const ScoredToken&) const = default;
};

struct ExpansionResult {
  std::size_t conversation = 0;
  std::vector<ScoredToken> words;  // score descending, then token ascending
};

struct ExpansionConfig {
  std::size_t neighbors = 20;  // m
  std::size_t max_words = 100;  // n_w
};

using TokenSet = std::set<std::string>;

// Non-stop-word persona tokens that the topic model knows about.
TokenSet persona_vocab(const std::vector<corpus::TokenList>& persona,
                       const topic::WordVectors& vectors);

// Cosine similarity; 0 when both vectors are zero. Throws ContractError on a
// dimension mismatch.
double cosine(std::span<const double> a, std::span<const double> b);

// Top-m words by cosine to `word`, skipping `word` and everything in
// `exclude`. Throws ContractError when `word` has no topic vector.
std::vector<ScoredToken> nearest_words(const std::string& word, const topic::WordVectors& vectors,
                                       const TokenSet& exclude, std::size_t m);

// Union of nearest_words over V^P, keeping each token's best score, truncated
// to n_w entries.
ExpansionResult expand(std::size_t conversation, const TokenSet& persona_words,
                       const topic::WordVectors& vectors, const ExpansionConfig& config);
ExpansionResult expand(const corpus::Conversation& conversation, const topic::WordVectors& vectors,
                       const ExpansionConfig& config);

}  // namespace pee::expansion
