#include "pee/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "pee/error.hpp"

namespace pee::expansion {

namespace {

bool ranked_before(const ScoredToken& a, const ScoredToken& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.token < b.token;
}

}  // namespace

TokenSet persona_vocab(const std::vector<corpus::TokenList>& persona,
                       const topic::WordVectors& vectors) {
  TokenSet out;
  for (const auto& sentence : persona) {
    for (const auto& t : sentence) {
      if (!corpus::is_stopword(t) && vectors.find(t) != nullptr) out.insert(t);
    }
  }
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("cosine: vectors differ in length");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

std::vector<ScoredToken> nearest_words(const std::string& word, const topic::WordVectors& vectors,
                                       const TokenSet& exclude, std::size_t m) {
  const auto* seed = vectors.find(word);
  if (seed == nullptr) throw ContractError("nearest_words: '" + word + "' is not in the topic vocabulary");
  std::vector<ScoredToken> pool;
  for (const auto& cand : vectors.all()) {
    if (cand.token == word || exclude.count(cand.token) > 0) continue;
    pool.push_back({cand.token, cosine(seed->u, cand.u)});
  }
  const std::size_t keep = std::min(m, pool.size());
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep), pool.end(),
                    ranked_before);
  pool.resize(keep);
  return pool;
}

ExpansionResult expand(std::size_t conversation, const TokenSet& persona_words,
                       const topic::WordVectors& vectors, const ExpansionConfig& config) {
  std::map<std::string, double> best;
  for (const auto& w : persona_words) {
    for (auto& n : nearest_words(w, vectors, persona_words, config.neighbors)) {
      auto [it, fresh] = best.emplace(n.token, n.score);
      if (!fresh) it->second = std::max(it->second, n.score);
    }
  }
  ExpansionResult result;
  result.conversation = conversation;
  for (auto& [token, score] : best) result.words.push_back({token, score});
  std::sort(result.words.begin(), result.words.end(), ranked_before);
  if (result.words.size() > config.max_words) result.words.resize(config.max_words);
  return result;
}

ExpansionResult expand(const corpus::Conversation& conversation, const topic::WordVectors& vectors,
                       const ExpansionConfig& config) {
  return expand(conversation.id, persona_vocab(conversation.persona, vectors), vectors, config);
}

}  // namespace pee::expansion
