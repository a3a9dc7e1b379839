#pragma once
// Training objectives: NLL, persona matching (P-Match), persona bag-of-words
// (P-BoWs) and their weighted sum. Every log argument is clamped at
// kProbFloor.

#include <cstddef>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "pee/corpus.hpp"
#include "pee/numkit/tape.hpp"

namespace pee::losses {

inline constexpr double kProbFloor = 1e-12;

using TokenSet = std::unordered_set<std::string>;

// |a ∩ b| / |a ∪ b|, 0 when both are empty.
double jaccard(const TokenSet& a, const TokenSet& b);

// a_i = 1 iff the content-word Jaccard index of persona sentence i and the
// response is at least `threshold`.
std::vector<double> p_match_targets(const std::vector<corpus::TokenList>& persona,
                                    const corpus::TokenList& response, double threshold);

// -sum_i a_i log a^s_i
nk::Var p_match_loss(nk::Var weights, std::span<const double> targets);

// Vector over the vocabulary: 1 for content words of the response, 1 + lambda
// when the word is also a persona word, 0 otherwise. Out-of-vocabulary
// response tokens are ignored.
std::vector<double> p_bows_targets(const corpus::TokenList& response, const TokenSet& persona_words,
                                   const corpus::Vocabulary& vocab, double lambda);

// p = sigmoid(sum_t logits_t);
// loss = -(1/|V|) sum_i [b_i log p_i + (1 - b_i) log(1 - p_i)].
nk::Var p_bows_loss(std::span<const nk::Var> step_logits, std::span<const double> targets);

// -(1/T) sum_t log p_t[target_t] over per-step probability vectors.
nk::Var nll_loss(std::span<const nk::Var> step_probs, std::span<const std::size_t> targets);

nk::Var joint_loss(nk::Var nll, nk::Var p_match, nk::Var p_bows, double gamma1, double gamma2);
double joint_loss(double nll, double p_match, double p_bows, double gamma1, double gamma2);

}  // namespace pee::losses
