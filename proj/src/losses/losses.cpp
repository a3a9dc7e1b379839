#include "pee/losses.hpp"

#include <string>

#include "pee/error.hpp"
#include "pee/numkit/ops.hpp"

namespace pee::losses {

using nk::Var;

double jaccard(const TokenSet& a, const TokenSet& b) {
  std::size_t common = 0;
  for (const auto& t : a) common += b.count(t);
  const std::size_t all = a.size() + b.size() - common;
  return all == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(all);
}

std::vector<double> p_match_targets(const std::vector<corpus::TokenList>& persona,
                                    const corpus::TokenList& response, double threshold) {
  if (threshold < 0.0) throw ContractError("p_match_targets: threshold must be non-negative");
  const TokenSet reply = corpus::content_tokens(response);
  std::vector<double> out;
  out.reserve(persona.size());
  for (const auto& sentence : persona) {
    const TokenSet words = corpus::content_tokens(sentence);
    const bool any = !words.empty() || !reply.empty();
    out.push_back(any && jaccard(words, reply) >= threshold ? 1.0 : 0.0);
  }
  return out;
}

Var p_match_loss(Var weights, std::span<const double> targets) {
  if (weights.size() != targets.size()) {
    throw ContractError("p_match_loss: " + std::to_string(weights.size()) + " weights, " +
                        std::to_string(targets.size()) + " targets");
  }
  Var a = weights.tape().constant(nk::Tensor({targets.size()}, {targets.begin(), targets.end()}));
  return nk::neg(nk::dot(a, nk::log(weights, kProbFloor)));
}

std::vector<double> p_bows_targets(const corpus::TokenList& response, const TokenSet& persona_words,
                                   const corpus::Vocabulary& vocab, double lambda) {
  if (!(lambda > 0.0)) throw ContractError("p_bows_targets: lambda must be positive");
  std::vector<double> b(vocab.size(), 0.0);
  for (const auto& t : response) {
    if (corpus::is_stopword(t)) continue;
    const auto id = vocab.find(t);
    if (!id || *id < corpus::Vocabulary::kNumReserved) continue;
    b[*id] = persona_words.count(t) > 0 ? 1.0 + lambda : 1.0;
  }
  return b;
}

Var p_bows_loss(std::span<const Var> step_logits, std::span<const double> targets) {
  if (step_logits.empty()) throw ContractError("p_bows_loss: no decoding steps");
  Var total = step_logits.front();
  for (std::size_t t = 1; t < step_logits.size(); ++t) total = nk::add(total, step_logits[t]);
  if (total.size() != targets.size()) throw ContractError("p_bows_loss: target size mismatch");
  nk::Tape& tape = total.tape();
  const std::vector<double> b(targets.begin(), targets.end());
  std::vector<double> one_minus_b(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) one_minus_b[i] = 1.0 - b[i];
  Var p = nk::sigmoid(total);
  // The lower floor on 1 - p is the upper clamp of p.
  Var log_p = nk::log(p, kProbFloor);
  Var log_q = nk::log(nk::add_scalar(nk::neg(p), 1.0), kProbFloor);
  Var ce = nk::add(nk::dot(tape.constant(nk::Tensor::vector(b)), log_p),
                   nk::dot(tape.constant(nk::Tensor::vector(one_minus_b)), log_q));
  return nk::scale(ce, -1.0 / static_cast<double>(b.size()));
}

Var nll_loss(std::span<const Var> step_probs, std::span<const std::size_t> targets) {
  if (step_probs.empty() || step_probs.size() != targets.size()) {
    throw ContractError("nll_loss: need one target per step");
  }
  Var total;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (targets[t] >= step_probs[t].size()) throw ContractError("nll_loss: target out of range");
    Var lp = nk::log(nk::slice(step_probs[t], targets[t], 1), kProbFloor);
    total = total.valid() ? nk::add(total, lp) : lp;
  }
  return nk::scale(nk::sum(total), -1.0 / static_cast<double>(targets.size()));
}

Var joint_loss(Var nll, Var p_match, Var p_bows, double gamma1, double gamma2) {
  if (gamma1 < 0.0 || gamma2 < 0.0) throw ContractError("joint_loss: weights must be non-negative");
  return nk::add(nk::add(nll, nk::scale(p_match, gamma1)), nk::scale(p_bows, gamma2));
}

double joint_loss(double nll, double p_match, double p_bows, double gamma1, double gamma2) {
  if (gamma1 < 0.0 || gamma2 < 0.0) throw ContractError("joint_loss: weights must be non-negative");
  return nll + gamma1 * p_match + gamma2 * p_bows;
}

}  // namespace pee::losses
