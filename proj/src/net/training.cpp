#include "pee/training.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "pee/error.hpp"
#include "pee/losses.hpp"
#include "pee/numkit/optim.hpp"

namespace pee::net {

using corpus::Vocabulary;

TrainingExample prepare_example(const corpus::DialogueExample& example,
                                const std::vector<std::string>& expansion, const Vocabulary& vocab,
                                const LossWeights& weights) {
  TrainingExample out;
  out.conversation = example.conversation;
  out.input = make_input(example.persona, example.history, expansion, vocab);
  out.targets = vocab.encode(example.response);
  out.targets.push_back(Vocabulary::kEos);

  std::vector<corpus::TokenList> kept;
  losses::TokenSet persona_words(expansion.begin(), expansion.end());
  for (const auto& s : example.persona) {
    if (s.empty()) continue;
    kept.push_back(s);
    for (const auto& t : corpus::content_tokens(s)) persona_words.insert(t);
  }
  out.match_targets = losses::p_match_targets(kept, example.response, weights.threshold);
  out.bows_targets = losses::p_bows_targets(example.response, persona_words, vocab, weights.lambda);
  return out;
}

LossTerms example_loss(nk::Tape& tape, const PeeModel& model, const TrainingExample& example,
                       const LossWeights& weights) {
  const ForwardResult fwd = forward(tape, model, example.input, example.targets);
  std::vector<nk::Var> probs, logits;
  for (const auto& s : fwd.steps) {
    probs.push_back(s.probs);
    logits.push_back(s.logits);
  }
  LossTerms t;
  t.nll = losses::nll_loss(probs, example.targets);
  t.p_match = losses::p_match_loss(fwd.context.retrieval.trace.last_weights, example.match_targets);
  t.p_bows = losses::p_bows_loss(logits, example.bows_targets);
  t.total = losses::joint_loss(t.nll, t.p_match, t.p_bows, weights.gamma1, weights.gamma2);
  return t;
}

LossValues loss_values(const LossTerms& terms) {
  return {terms.total.item(), terms.nll.item(), terms.p_match.item(), terms.p_bows.item()};
}

namespace {

void accumulate(LossValues& acc, const LossValues& v) {
  acc.total += v.total;
  acc.nll += v.nll;
  acc.p_match += v.p_match;
  acc.p_bows += v.p_bows;
}

LossValues scaled(LossValues v, double f) {
  return {v.total * f, v.nll * f, v.p_match * f, v.p_bows * f};
}

bool finite(const LossValues& v) {
  return std::isfinite(v.total) && std::isfinite(v.nll) && std::isfinite(v.p_match) &&
         std::isfinite(v.p_bows);
}

std::string describe(const LossValues& v) {
  std::ostringstream os;
  os << "total=" << v.total << " nll=" << v.nll << " p_match=" << v.p_match << " p_bows=" << v.p_bows;
  return os.str();
}

}  // namespace

LossValues evaluate_loss(const PeeModel& model, const std::vector<TrainingExample>& examples,
                         const LossWeights& weights) {
  LossValues acc;
  for (const auto& ex : examples) {
    nk::Tape tape;
    accumulate(acc, loss_values(example_loss(tape, model, ex, weights)));
  }
  return examples.empty() ? acc : scaled(acc, 1.0 / static_cast<double>(examples.size()));
}

std::vector<EpochRecord> train(PeeModel& model, const std::vector<TrainingExample>& train_set,
                               const std::vector<TrainingExample>& valid_set,
                               const TrainConfig& config, nk::Rng& rng,
                               const EpochCallback& on_epoch) {
  if (train_set.empty()) throw ContractError("train: no training examples");
  if (config.batch_size == 0) throw ContractError("train: batch_size must be positive");
  auto params = model.params().tensors();
  nk::AdamState adam(nk::AdamConfig{config.learning_rate});
  std::vector<std::size_t> order(train_set.size());
  std::vector<EpochRecord> records;
  std::optional<double> best_valid;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t batch_id = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_id) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      nk::Gradients grads;
      for (std::size_t i = start; i < end; ++i) {
        nk::Tape tape;
        const LossTerms terms = example_loss(tape, model, train_set[order[i]], config.weights);
        const LossValues v = loss_values(terms);
        if (!finite(v)) {
          throw NumericError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_id) + ", example " + std::to_string(order[i]) +
                             ": " + describe(v));
        }
        accumulate(rec.train, v);
        grads.add(tape.backward(terms.total));
      }
      grads.scale(1.0 / static_cast<double>(end - start));
      nk::clip_global_norm(params, grads, config.clip_norm);
      nk::adam_step(params, grads, adam);
    }
    rec.train = scaled(rec.train, 1.0 / static_cast<double>(train_set.size()));
    if (!valid_set.empty()) {
      rec.valid = evaluate_loss(model, valid_set, config.weights);
      if (!finite(*rec.valid)) {
        throw NumericError("non-finite validation loss in epoch " + std::to_string(epoch) + ": " +
                           describe(*rec.valid));
      }
      rec.best = !best_valid || rec.valid->total < *best_valid;
      if (rec.best) best_valid = rec.valid->total;
    } else {
      rec.best = true;
    }
    if (on_epoch) on_epoch(rec);
    records.push_back(rec);
  }
  return records;
}

}  // namespace pee::net
